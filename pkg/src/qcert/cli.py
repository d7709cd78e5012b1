"""Command-line surface.

Subcommands::

    qcert gen SPEC -o OUT [--shots N --seed S]     synthesize experiment data
    qcert certify --mode {mdi,qc} --data FILE ...  run a certification
    qcert tele {bound,sweep} ...                   teleportation fidelity bounds
    qcert chain SPEC ...                           repeater plan / end-to-end bound

Exit codes: 0 success/pass, 1 certification fail, 2 input or schema error,
3 solver failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import formats, sdp
from .effective import joint_probability_table, qc_probability_table, reconstruct_joint
from .errors import ArgumentError, DataError, QcertError, SolverFailureError
from .network import certify_chain, chain_state, plan
from .qobjects import (
    Povm,
    aligned_bsm,
    isotropic_state,
    phi_plus_state,
    qc_input_ensemble,
)
from .selftest import mdi_certify, qc_bell_value, qc_group_sums, table_from_array
from .telecert import build_sdp, fidelity_lower_bound, sweep_isotropic_bounds, teleport
from . import tensor

NOISY_BSM_BENCHMARK = {"visibility": 0.95, "reported_fidelity": 0.893}


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _load(path: str) -> dict:
    with open(path) as fh:
        return formats.loads(fh.read())


def _qubit_setting(direction: str, visibility: float) -> Povm:
    if direction == "z":
        plus = np.diag([1.0, 0.0]).astype(complex)
    else:
        plus = 0.5 * np.array([[1, 1], [1, 1]], dtype=complex)
    eye = np.eye(2, dtype=complex)
    e0 = visibility * plus + (1 - visibility) * eye / 2
    e1 = eye - e0
    shape = tensor.SystemShape((2,))
    return Povm(
        (
            tensor.LabeledOperator(e0, shape, hermitian=True),
            tensor.LabeledOperator(e1, shape, hermitian=True),
        ),
        (0, 1),
        shape,
    )


def qc_settings(visibility: float = 1.0) -> list[Povm]:
    """The two binary settings of the hybrid scenario (z- and x-type)."""
    return [_qubit_setting("z", visibility), _qubit_setting("x", visibility)]


def _sample_table(table: np.ndarray, shots: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    na, nb, nx, ny = table.shape
    out = np.zeros_like(table)
    for x in range(nx):
        for y in range(ny):
            p = table[:, :, x, y].reshape(-1)
            p = np.clip(p, 0.0, None)
            p = p / p.sum()
            counts = rng.multinomial(shots, p)
            out[:, :, x, y] = (counts / shots).reshape(na, nb)
    return out


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------


def cmd_gen(args: argparse.Namespace) -> int:
    spec = _load(args.spec)
    if spec.get("schema") != formats.SCHEMA or spec.get("kind") != "experiment":
        raise formats.SchemaError("kind", "expected an experiment document")
    scenario = str(spec.get("scenario"))
    shots = args.shots if args.shots is not None else spec.get("shots")
    seed = args.seed if args.seed is not None else spec.get("seed", 0)

    if scenario == "mdi":
        state = formats.resolve_state(spec.get("state", {"type": "phi_plus"}))
        d_a, d_b = state.shape.dims
        ens_a = formats.resolve_ensemble(spec.get("alice_ensemble", "standard"), d_a)
        ens_b = formats.resolve_ensemble(spec.get("bob_ensemble", "standard"), d_b)
        povm_a = aligned_bsm(d_a, 0, eta=float(spec.get("alice_visibility", 1.0)))
        povm_b = aligned_bsm(d_b, 1, eta=float(spec.get("bob_visibility", 1.0)))
        table = joint_probability_table(state, povm_a, povm_b, ens_a, ens_b)
        if shots:
            table = _sample_table(table, int(shots), int(seed))
        doc = formats.encode_prob_table(table, "mdi", ens_a, bob_ensemble=ens_b)
    elif scenario == "qc":
        state = formats.resolve_state(spec.get("state", {"type": "phi_plus"}))
        ensemble = qc_input_ensemble()
        povm_a = aligned_bsm(2, 0, eta=float(spec.get("alice_visibility", 1.0)))
        settings = qc_settings(float(spec.get("bob_visibility", 1.0)))
        table = qc_probability_table(state, povm_a, settings, ensemble)
        if shots:
            table = _sample_table(table, int(shots), int(seed))
        doc = formats.encode_prob_table(table, "qc", ensemble, n_bob_settings=2)
    elif scenario == "tele":
        state = formats.resolve_state(spec.get("state", {"type": "phi_plus"}))
        d = state.shape.dims[0]
        ensemble = formats.resolve_ensemble(spec.get("ensemble", "standard"), d)
        povm_a = aligned_bsm(d, 0, eta=float(spec.get("alice_visibility", 1.0)))
        if shots:
            raise formats.SchemaError("shots", "sampling applies to probability tables only")
        data = teleport(state, povm_a, ensemble)
        doc = formats.encode_teleport_data(data)
    else:
        raise formats.SchemaError("scenario", f"unknown scenario {scenario!r}")
    _write(args.out, formats.dumps(doc))
    return 0


# ---------------------------------------------------------------------------
# certify
# ---------------------------------------------------------------------------


def cmd_certify(args: argparse.Namespace) -> int:
    doc = _load(args.data)
    table, scenario, alice, bob = formats.decode_prob_table(doc)
    if scenario != args.mode:
        raise formats.SchemaError("scenario", f"data is {scenario!r}, requested {args.mode!r}")

    if args.mode == "mdi":
        eff, recon = reconstruct_joint(table, alice, bob)
        d_a, d_b = eff.primed_dims
        if args.reference:
            reference = formats.resolve_pure_state(_load(args.reference))
        else:
            if d_a != d_b:
                raise ArgumentError("asymmetric dimensions need an explicit reference state")
            reference = phi_plus_state(d_a)
        report = mdi_certify(eff, reference, tol=args.tol)
        out = formats.encode_cert_report(report)
        out["diagnostics"]["reconstruction_condition_number"] = recon.condition_number
        out["diagnostics"]["reconstruction_residual"] = recon.max_residual
        out["diagnostics"]["noisy_bsm_benchmark"] = dict(NOISY_BSM_BENCHMARK)
        _write(args.out, formats.dumps(out))
        return 0 if report.passed else 1

    # qc mode: score, group sums and outcome weights straight from the table.
    flat = table_from_array(table)
    groups = qc_group_sums(flat)
    value = qc_bell_value(flat)
    weights = [float(table[a, 0, 0, 0] + table[a, 0, 1, 0]) for a in range(table.shape[0])]
    residuals = {f"group_sum[{g}]": abs(s - 1.0) for g, s in enumerate(groups)}
    residuals["score_gap"] = abs(4.0 - value)
    passed = max(residuals.values()) <= args.tol
    out = {
        "schema": formats.SCHEMA,
        "kind": "cert_report",
        "scenario": "qc",
        "fidelity_estimate": None,
        "residuals": residuals,
        "tolerance": args.tol,
        "pass": passed,
        "diagnostics": {"bell_value": value, "group_sums": groups, "weights": weights},
    }
    _write(args.out, formats.dumps(out))
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# tele
# ---------------------------------------------------------------------------


def _parse_grid(text: str) -> list[float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ArgumentError("grid syntax is start:stop:step")
    start, stop, step = (float(v) for v in parts)
    if step <= 0:
        raise ArgumentError("grid step must be positive")
    values = []
    v = start
    while v <= stop + 1e-12:
        values.append(round(v, 12))
        v += step
    return values


def _tele_data(args: argparse.Namespace):
    if args.data:
        return formats.decode_teleport_data(_load(args.data))
    if args.state != "isotropic":
        raise ArgumentError("only --state isotropic is supported for generation")
    state = isotropic_state(args.d, args.p)
    ensemble = formats.resolve_ensemble(args.inputs, args.d)
    povm = aligned_bsm(args.d, 0, eta=args.visibility)
    return teleport(state, povm, ensemble)


def cmd_tele_bound(args: argparse.Namespace) -> int:
    data = _tele_data(args)
    if args.export_sdpa:
        _write(args.export_sdpa, sdp.export_sdpa(build_sdp(data)))
    bound = fidelity_lower_bound(data, tol=args.solver_tol)
    _write(args.out, formats.dumps(formats.encode_fidelity_bound(bound)))
    if bound.status != "optimal":
        raise SolverFailureError(f"solver returned status {bound.status}")
    return 0


def cmd_tele_sweep(args: argparse.Namespace) -> int:
    grid = _parse_grid(args.p_grid)
    ensemble = formats.resolve_ensemble(args.inputs, args.d)
    povm = aligned_bsm(args.d, 0, eta=args.visibility)
    rows = sweep_isotropic_bounds(args.d, ensemble, grid, povm, tol=args.solver_tol)
    _write(args.out, formats.sweep_csv(rows))
    if any(r.status != "optimal" for r in rows):
        raise SolverFailureError("one or more grid points failed to solve")
    return 0


# ---------------------------------------------------------------------------
# chain
# ---------------------------------------------------------------------------


def cmd_chain(args: argparse.Namespace) -> int:
    spec = formats.decode_chain_spec(_load(args.spec))
    doc = formats.encode_chain_plan(plan(spec))
    if args.bound and not args.plan_only:
        ensemble = formats.resolve_ensemble(args.inputs, spec.d)
        bound = certify_chain(spec, ensemble, tol=args.solver_tol)
        doc["end_to_end_bound"] = formats.encode_fidelity_bound(bound)
        state = chain_state(spec)
        doc["chain_state_fidelity"] = tensor.pure_fidelity(
            state.operator, phi_plus_state(spec.d).amplitudes
        )
        if bound.status != "optimal":
            _write(args.out, formats.dumps(doc))
            raise SolverFailureError(f"solver returned status {bound.status}")
    _write(args.out, formats.dumps(doc))
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcert", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate synthetic experiment data")
    p_gen.add_argument("spec", help="experiment spec JSON")
    p_gen.add_argument("-o", "--out", default=None)
    p_gen.add_argument("--shots", type=int, default=None, help="sample instead of exact")
    p_gen.add_argument("--seed", type=int, default=None)
    p_gen.set_defaults(func=cmd_gen)

    p_cert = sub.add_parser("certify", help="run a certification on a data file")
    p_cert.add_argument("--mode", choices=("mdi", "qc"), required=True)
    p_cert.add_argument("--data", required=True)
    p_cert.add_argument("--reference", default=None, help="pure-state JSON document")
    p_cert.add_argument("--tol", type=float, default=1e-6)
    p_cert.add_argument("-o", "--out", default=None)
    p_cert.set_defaults(func=cmd_certify)

    p_tele = sub.add_parser("tele", help="teleportation fidelity bounds")
    tele_sub = p_tele.add_subparsers(dest="subcommand", required=True)
    p_bound = tele_sub.add_parser("bound")
    p_bound.add_argument("--data", default=None, help="teleportation data JSON")
    p_bound.add_argument("--state", default="isotropic")
    p_bound.add_argument("--d", type=int, default=2)
    p_bound.add_argument("--p", type=float, default=1.0)
    p_bound.add_argument("--inputs", default="standard")
    p_bound.add_argument("--visibility", type=float, default=1.0)
    p_bound.add_argument("--solver-tol", type=float, default=1e-8)
    p_bound.add_argument("--export-sdpa", default=None, metavar="PATH")
    p_bound.add_argument("-o", "--out", default=None)
    p_bound.set_defaults(func=cmd_tele_bound)
    p_sweep = tele_sub.add_parser("sweep")
    p_sweep.add_argument("--d", type=int, default=3)
    p_sweep.add_argument("--inputs", default="case1")
    p_sweep.add_argument("--p-grid", required=True)
    p_sweep.add_argument("--visibility", type=float, default=1.0)
    p_sweep.add_argument("--solver-tol", type=float, default=1e-8)
    p_sweep.add_argument("-o", "--out", default=None)
    p_sweep.set_defaults(func=cmd_tele_sweep)

    p_chain = sub.add_parser("chain", help="repeater-chain plan and bound")
    p_chain.add_argument("spec", help="chain spec JSON")
    p_chain.add_argument("--plan-only", action="store_true")
    p_chain.add_argument("--bound", action="store_true")
    p_chain.add_argument("--inputs", default="standard")
    p_chain.add_argument("--solver-tol", type=float, default=1e-8)
    p_chain.add_argument("-o", "--out", default=None)
    p_chain.set_defaults(func=cmd_chain)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SolverFailureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (formats.SchemaError, DataError, ArgumentError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except QcertError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
