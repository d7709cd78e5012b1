"""Command-line surface: file formats, exit codes, reproducibility."""

from __future__ import annotations

import json

import numpy as np

from qcert import formats
from qcert.cli import main
from qcert.selftest import qc_group_sums, table_from_array


def write_json(path, doc):
    path.write_text(json.dumps(doc, indent=2) + "\n")


def experiment(scenario, **kwargs):
    doc = {"schema": "qcert/v1", "kind": "experiment", "scenario": scenario}
    doc.update(kwargs)
    return doc


def chain_doc(n, d=2, p=1.0, **kwargs):
    doc = {
        "schema": "qcert/v1",
        "kind": "chain_spec",
        "d": d,
        "sources": [{"type": "isotropic", "d": d, "p": p} for _ in range(n)],
    }
    doc.update(kwargs)
    return doc


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------


def test_gen_mdi_table_normalization(tmp_path):
    spec = tmp_path / "spec.json"
    out = tmp_path / "table.json"
    write_json(spec, experiment("mdi", state={"type": "phi_plus", "d": 2}))
    assert main(["gen", str(spec), "-o", str(out)]) == 0
    table, scenario, alice, bob = formats.decode_prob_table(formats.loads(out.read_text()))
    assert scenario == "mdi"
    assert table.shape == (4, 4, 4, 4)
    sums = table.sum(axis=(0, 1))
    assert np.max(np.abs(sums - 1.0)) < 1e-10


def test_gen_round_trips_bit_identically(tmp_path):
    spec = tmp_path / "spec.json"
    out = tmp_path / "table.json"
    write_json(spec, experiment("mdi", state={"type": "isotropic", "d": 2, "p": 0.9}))
    main(["gen", str(spec), "-o", str(out)])
    text = out.read_text()
    table, scenario, alice, bob = formats.decode_prob_table(formats.loads(text))
    again = formats.dumps(formats.encode_prob_table(table, scenario, alice, bob_ensemble=bob))
    assert again == text


def test_gen_qc_table_group_sums(tmp_path):
    spec = tmp_path / "spec.json"
    out = tmp_path / "table.json"
    write_json(spec, experiment("qc", state={"type": "phi_plus", "d": 2}))
    assert main(["gen", str(spec), "-o", str(out)]) == 0
    table, scenario, _, _ = formats.decode_prob_table(formats.loads(out.read_text()))
    assert scenario == "qc"
    groups = qc_group_sums(table_from_array(table))
    assert np.max(np.abs(np.array(groups) - 1.0)) < 1e-10


def test_gen_tele_data_file(tmp_path):
    spec = tmp_path / "spec.json"
    out = tmp_path / "data.json"
    write_json(
        spec,
        experiment("tele", state={"type": "isotropic", "d": 3, "p": 0.5}, ensemble="case1"),
    )
    assert main(["gen", str(spec), "-o", str(out)]) == 0
    data = formats.decode_teleport_data(formats.loads(out.read_text()))
    assert data.d == 3
    assert data.n_outcomes == 9
    assert len(data.ensemble) == 4
    assert len(data.states) == 9 * 4
    # file round-trips bit-identically
    assert formats.dumps(formats.encode_teleport_data(data)) == out.read_text()


def test_gen_sampled_tables_reproducible(tmp_path):
    spec = tmp_path / "spec.json"
    out1, out2 = tmp_path / "t1.json", tmp_path / "t2.json"
    write_json(spec, experiment("mdi", state={"type": "phi_plus", "d": 2}))
    assert main(["gen", str(spec), "-o", str(out1), "--shots", "500", "--seed", "7"]) == 0
    assert main(["gen", str(spec), "-o", str(out2), "--shots", "500", "--seed", "7"]) == 0
    assert out1.read_text() == out2.read_text()
    out3 = tmp_path / "t3.json"
    main(["gen", str(spec), "-o", str(out3), "--shots", "500", "--seed", "8"])
    assert out3.read_text() != out1.read_text()


def test_gen_rejects_bad_spec(tmp_path, capsys):
    spec = tmp_path / "spec.json"
    write_json(spec, {"schema": "qcert/v1", "kind": "experiment", "scenario": "bogus"})
    assert main(["gen", str(spec), "-o", str(tmp_path / "x.json")]) == 2
    assert "scenario" in capsys.readouterr().err


def test_gen_rejects_shots_for_tele(tmp_path):
    spec = tmp_path / "spec.json"
    write_json(spec, experiment("tele", state={"type": "phi_plus", "d": 2}, ensemble="pauli6"))
    assert main(["gen", str(spec), "-o", str(tmp_path / "x.json"), "--shots", "10"]) == 2


# ---------------------------------------------------------------------------
# certify
# ---------------------------------------------------------------------------


def _gen(tmp_path, doc, name="data.json", extra=()):
    spec = tmp_path / f"spec_{name}"
    out = tmp_path / name
    write_json(spec, doc)
    code = main(["gen", str(spec), "-o", str(out), *extra])
    assert code == 0
    return out


def test_certify_mdi_ideal_passes(tmp_path):
    data = _gen(tmp_path, experiment("mdi", state={"type": "phi_plus", "d": 2}))
    report_path = tmp_path / "report.json"
    code = main(["certify", "--mode", "mdi", "--data", str(data), "-o", str(report_path)])
    assert code == 0
    report = formats.loads(report_path.read_text())
    assert report["pass"] is True
    assert abs(report["fidelity_estimate"] - 1.0) < 1e-9


def test_certify_mdi_noisy_fails_with_benchmark_note(tmp_path):
    data = _gen(
        tmp_path,
        experiment(
            "mdi",
            state={"type": "phi_plus", "d": 2},
            alice_visibility=0.95,
            bob_visibility=0.95,
        ),
    )
    report_path = tmp_path / "report.json"
    code = main(
        ["certify", "--mode", "mdi", "--data", str(data), "--tol", "1e-6", "-o", str(report_path)]
    )
    assert code == 1
    report = formats.loads(report_path.read_text())
    assert report["pass"] is False
    assert abs(report["fidelity_estimate"] - (0.95**2 + (1 - 0.95**2) / 4)) < 1e-9
    assert report["diagnostics"]["noisy_bsm_benchmark"]["reported_fidelity"] == 0.893


def test_certify_mdi_incomplete_ensemble_exit_2(tmp_path, capsys):
    data = _gen(
        tmp_path,
        experiment(
            "mdi",
            state={"type": "isotropic", "d": 3, "p": 1.0},
            alice_ensemble="case1",
            bob_ensemble="case1",
        ),
    )
    code = main(["certify", "--mode", "mdi", "--data", str(data)])
    assert code == 2
    assert "deficit" in capsys.readouterr().err


def test_certify_qc_ideal(tmp_path):
    data = _gen(tmp_path, experiment("qc", state={"type": "phi_plus", "d": 2}))
    report_path = tmp_path / "report.json"
    code = main(["certify", "--mode", "qc", "--data", str(data), "-o", str(report_path)])
    assert code == 0
    report = formats.loads(report_path.read_text())
    assert abs(report["diagnostics"]["bell_value"] - 4.0) < 1e-9


def test_certify_mode_mismatch(tmp_path):
    data = _gen(tmp_path, experiment("qc", state={"type": "phi_plus", "d": 2}))
    assert main(["certify", "--mode", "mdi", "--data", str(data)]) == 2


# ---------------------------------------------------------------------------
# tele
# ---------------------------------------------------------------------------


def test_tele_bound_ideal(tmp_path):
    out = tmp_path / "bound.json"
    code = main(
        ["tele", "bound", "--state", "isotropic", "--d", "2", "--p", "1.0",
         "--inputs", "standard", "-o", str(out)]
    )
    assert code == 0
    doc = formats.loads(out.read_text())
    assert doc["status"] == "optimal"
    assert abs(doc["value"] - 1.0) < 1e-5


def test_tele_bound_from_data_file_with_sdpa_export(tmp_path):
    data = _gen(
        tmp_path,
        experiment("tele", state={"type": "isotropic", "d": 2, "p": 0.8}, ensemble="pauli6"),
    )
    out = tmp_path / "bound.json"
    sdpa = tmp_path / "prob.dat-s"
    code = main(
        ["tele", "bound", "--data", str(data), "-o", str(out), "--export-sdpa", str(sdpa)]
    )
    assert code == 0
    doc = formats.loads(out.read_text())
    assert abs(doc["value"] - 0.85) < 1e-4
    from qcert import sdp

    prob = sdp.import_sdpa(sdpa.read_text())
    assert sdp.export_sdpa(prob) == sdpa.read_text()


def test_tele_sweep_qutrit_case1(tmp_path):
    out = tmp_path / "sweep.csv"
    code = main(
        ["tele", "sweep", "--d", "3", "--inputs", "case1", "--p-grid", "0:1:0.25",
         "-o", str(out)]
    )
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "p,bound,status,gap"
    assert len(lines) == 6
    ps = [float(l.split(",")[0]) for l in lines[1:]]
    assert ps == [0.0, 0.25, 0.5, 0.75, 1.0]
    bounds = [float(l.split(",")[1]) for l in lines[1:]]
    for b1, b2 in zip(bounds, bounds[1:]):
        assert b2 >= b1 - 1e-6


def test_tele_sweep_grid_endpoints(tmp_path):
    from qcert.cli import _parse_grid

    assert _parse_grid("0:1:0.5") == [0.0, 0.5, 1.0]
    assert _parse_grid("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    # endpoint included within 1e-12 despite accumulation error
    grid = _parse_grid("0:1:0.1")
    assert len(grid) == 11 and abs(grid[-1] - 1.0) < 1e-9


def test_tele_solver_failure_exit_3(tmp_path, capsys):
    out = tmp_path / "bound.json"
    code = main(
        ["tele", "bound", "--state", "isotropic", "--d", "2", "--p", "0.5",
         "--inputs", "pauli6", "--solver-tol", "1e-30", "-o", str(out)]
    )
    assert code == 3
    doc = formats.loads(out.read_text())
    assert doc["status"] != "optimal"
    assert doc["value"] is None


# ---------------------------------------------------------------------------
# chain
# ---------------------------------------------------------------------------


def test_chain_plan_three_links(tmp_path):
    spec = tmp_path / "chain.json"
    write_json(spec, chain_doc(3))
    out = tmp_path / "plan.json"
    assert main(["chain", str(spec), "--plan-only", "-o", str(out)]) == 0
    doc = formats.loads(out.read_text())
    assert doc["per_source"] == ["quantum-classical", "standard-DI", "steering"]
    assert doc["end_to_end"] == "teleportation-sdp"


def test_chain_bound_all_ideal(tmp_path):
    spec = tmp_path / "chain.json"
    write_json(spec, chain_doc(2))
    out = tmp_path / "plan.json"
    code = main(["chain", str(spec), "--bound", "--inputs", "pauli6", "-o", str(out)])
    assert code == 0
    doc = formats.loads(out.read_text())
    assert abs(doc["end_to_end_bound"]["value"] - 1.0) < 1e-4
    assert abs(doc["chain_state_fidelity"] - 1.0) < 1e-10


def test_chain_malformed_spec_exit_2(tmp_path, capsys):
    spec = tmp_path / "chain.json"
    write_json(spec, {"schema": "qcert/v1", "kind": "chain_spec", "d": 2})
    assert main(["chain", str(spec)]) == 2
    assert "sources" in capsys.readouterr().err


def test_missing_file_exit_2():
    assert main(["certify", "--mode", "mdi", "--data", "/nonexistent.json"]) == 2


def test_povm_and_ensemble_round_trip():
    from qcert.qobjects import noisy_bsm, pauli_ensemble

    povm = noisy_bsm(2, 0.9)
    doc = formats.encode_povm(povm)
    back = formats.decode_povm(doc)
    for e1, e2 in zip(povm.effects, back.effects):
        assert np.max(np.abs(e1.matrix - e2.matrix)) < 1e-15
    ens = pauli_ensemble()
    back_ens = formats.decode_ensemble(formats.encode_ensemble(ens))
    assert back_ens.labels == ens.labels
    for s1, s2 in zip(ens.states, back_ens.states):
        assert np.max(np.abs(s1.amplitudes - s2.amplitudes)) < 1e-15
