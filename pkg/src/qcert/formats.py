"""Versioned JSON file formats (``"schema": "qcert/v1"``) and CSV output.

Complex numbers are two-element ``[re, im]`` arrays; matrices are row-major
nested arrays under ``{"dims": [...], "data": [...]}`` where ``dims`` lists
the subsystem dimensions.  Writers build documents deterministically and
serialize with stable settings so every file round-trips through its reader
bit-identically.
"""

from __future__ import annotations

import json
from typing import Any, Sequence

import numpy as np

from .errors import ArgumentError, DataError
from .network import ChainSpec
from .qobjects import (
    DensityMatrix,
    InputEnsemble,
    Povm,
    PureState,
    chsh_input_ensemble,
    density_matrix,
    ghz_state,
    isotropic_state,
    pauli_ensemble,
    phi_plus_state,
    qc_input_ensemble,
    qutrit_case_ensemble,
    standard_complete_set,
)
from .tensor import LabeledOperator, SystemShape
from .telecert import TeleportationData

SCHEMA = "qcert/v1"


class SchemaError(DataError):
    """A document does not match its declared schema."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


def _require(doc: dict, key: str, where: str) -> Any:
    if key not in doc:
        raise SchemaError(f"{where}.{key}", "missing required field")
    return doc[key]


def _complex_pair(value: complex) -> list[float]:
    return [float(np.real(value)), float(np.imag(value))]


def _from_pair(pair: Sequence[float], where: str) -> complex:
    if not isinstance(pair, (list, tuple)) or len(pair) != 2:
        raise SchemaError(where, f"expected [re, im], got {pair!r}")
    return complex(float(pair[0]), float(pair[1]))


def encode_vector(vec: np.ndarray, dims: Sequence[int]) -> dict:
    return {"dims": [int(d) for d in dims], "data": [_complex_pair(v) for v in vec]}


def decode_vector(doc: dict, where: str = "vector") -> tuple[np.ndarray, tuple[int, ...]]:
    dims = tuple(int(d) for d in _require(doc, "dims", where))
    data = _require(doc, "data", where)
    vec = np.array([_from_pair(v, f"{where}.data") for v in data], dtype=np.complex128)
    if vec.size != int(np.prod(dims)):
        raise SchemaError(where, "data length does not match dims")
    return vec, dims


def encode_matrix(mat: np.ndarray, dims: Sequence[int]) -> dict:
    return {
        "dims": [int(d) for d in dims],
        "data": [[_complex_pair(v) for v in row] for row in np.asarray(mat)],
    }


def decode_matrix(doc: dict, where: str = "matrix") -> tuple[np.ndarray, tuple[int, ...]]:
    dims = tuple(int(d) for d in _require(doc, "dims", where))
    data = _require(doc, "data", where)
    mat = np.array(
        [[_from_pair(v, f"{where}.data") for v in row] for row in data], dtype=np.complex128
    )
    n = int(np.prod(dims))
    if mat.shape != (n, n):
        raise SchemaError(where, f"matrix shape {mat.shape} does not match dims {dims}")
    return mat, dims


def encode_ensemble(ensemble: InputEnsemble) -> dict:
    return {
        "labels": list(ensemble.labels),
        "states": [encode_vector(s.amplitudes, s.shape.dims) for s in ensemble.states],
    }


def decode_ensemble(doc: dict, where: str = "ensemble") -> InputEnsemble:
    labels = tuple(_require(doc, "labels", where))
    states = []
    for i, sdoc in enumerate(_require(doc, "states", where)):
        vec, dims = decode_vector(sdoc, f"{where}.states[{i}]")
        states.append(PureState(vec, SystemShape(dims)))
    return InputEnsemble(tuple(states), labels)


def encode_povm(povm) -> dict:
    return {
        "labels": list(povm.outcome_labels),
        "effects": [encode_matrix(e.matrix, povm.shape.dims) for e in povm.effects],
    }


def decode_povm(doc: dict, where: str = "povm") -> Povm:
    labels = tuple(_require(doc, "labels", where))
    effects = []
    dims: tuple[int, ...] | None = None
    for i, edoc in enumerate(_require(doc, "effects", where)):
        mat, mdims = decode_matrix(edoc, f"{where}.effects[{i}]")
        dims = dims or mdims
        effects.append(LabeledOperator(mat, SystemShape(mdims), hermitian=True))
    return Povm(tuple(effects), labels, SystemShape(dims))


NAMED_ENSEMBLES = ("standard", "pauli6", "case1", "case2", "qc", "chsh")


def resolve_ensemble(spec: Any, d: int, where: str = "ensemble") -> InputEnsemble:
    """Named ensemble string or an explicit ensemble document."""
    if isinstance(spec, dict):
        return decode_ensemble(spec, where)
    name = str(spec)
    if name == "standard":
        return standard_complete_set(d)
    if name == "pauli6":
        return pauli_ensemble()
    if name == "case1":
        return qutrit_case_ensemble(1)
    if name == "case2":
        return qutrit_case_ensemble(2)
    if name == "qc":
        return qc_input_ensemble()
    if name == "chsh":
        return chsh_input_ensemble()
    raise SchemaError(where, f"unknown ensemble {name!r}; named options: {NAMED_ENSEMBLES}")


def resolve_state(spec: dict, where: str = "state") -> DensityMatrix:
    """State document: named family or explicit matrix."""
    kind = str(_require(spec, "type", where))
    if kind == "isotropic":
        d = int(_require(spec, "d", where))
        p = float(_require(spec, "p", where))
        return isotropic_state(d, p)
    if kind == "phi_plus":
        d = int(spec.get("d", 2))
        s = phi_plus_state(d)
        return density_matrix(s.projector().matrix, s.shape.dims)
    if kind == "ghz":
        n = int(spec.get("n", 3))
        d = int(spec.get("d", 2))
        s = ghz_state(n, d)
        return density_matrix(s.projector().matrix, s.shape.dims)
    if kind == "matrix":
        mat, dims = decode_matrix(_require(spec, "matrix", where), f"{where}.matrix")
        return density_matrix(mat, dims)
    raise SchemaError(where, f"unknown state type {kind!r}")


def resolve_pure_state(spec: dict, where: str = "reference") -> PureState:
    kind = str(_require(spec, "type", where))
    if kind == "phi_plus":
        return phi_plus_state(int(spec.get("d", 2)))
    if kind == "ghz":
        return ghz_state(int(spec.get("n", 3)), int(spec.get("d", 2)))
    if kind == "vector":
        vec, dims = decode_vector(_require(spec, "vector", where), f"{where}.vector")
        return PureState(vec / np.linalg.norm(vec), SystemShape(dims))
    raise SchemaError(where, f"unknown pure-state type {kind!r}")


# ---------------------------------------------------------------------------
# Probability tables
# ---------------------------------------------------------------------------


def encode_prob_table(
    table: np.ndarray,
    scenario: str,
    alice_ensemble: InputEnsemble,
    bob_ensemble: InputEnsemble | None = None,
    n_bob_settings: int | None = None,
) -> dict:
    doc: dict[str, Any] = {"schema": SCHEMA, "kind": "prob_table", "scenario": scenario}
    doc["alice_ensemble"] = encode_ensemble(alice_ensemble)
    if scenario == "mdi":
        if bob_ensemble is None:
            raise ArgumentError("mdi tables need a bob ensemble")
        doc["bob_ensemble"] = encode_ensemble(bob_ensemble)
    elif scenario == "qc":
        doc["bob_settings"] = int(n_bob_settings or table.shape[3])
    else:
        raise ArgumentError(f"unsupported table scenario {scenario!r}")
    records = []
    na, nb, nx, ny = table.shape
    for a in range(na):
        for b in range(nb):
            for x in range(nx):
                for y in range(ny):
                    records.append(
                        {"a": a, "b": b, "x": x, "y": y, "p": float(table[a, b, x, y])}
                    )
    doc["records"] = records
    return doc


def decode_prob_table(doc: dict) -> tuple[np.ndarray, str, InputEnsemble, InputEnsemble | None]:
    if doc.get("schema") != SCHEMA:
        raise SchemaError("schema", f"expected {SCHEMA!r}, got {doc.get('schema')!r}")
    if doc.get("kind") != "prob_table":
        raise SchemaError("kind", f"expected 'prob_table', got {doc.get('kind')!r}")
    scenario = str(_require(doc, "scenario", "table"))
    alice = decode_ensemble(_require(doc, "alice_ensemble", "table"), "alice_ensemble")
    bob = None
    if scenario == "mdi":
        bob = decode_ensemble(_require(doc, "bob_ensemble", "table"), "bob_ensemble")
    records = _require(doc, "records", "table")
    if not records:
        raise SchemaError("records", "table has no records")
    na = 1 + max(int(r["a"]) for r in records)
    nb = 1 + max(int(r["b"]) for r in records)
    nx = 1 + max(int(r["x"]) for r in records)
    ny = 1 + max(int(r["y"]) for r in records)
    table = np.full((na, nb, nx, ny), np.nan)
    for i, r in enumerate(records):
        try:
            table[int(r["a"]), int(r["b"]), int(r["x"]), int(r["y"])] = float(r["p"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"records[{i}]", f"bad record: {exc}") from exc
    if np.any(np.isnan(table)):
        raise SchemaError("records", "table does not cover all outcome/input combinations")
    return table, scenario, alice, bob


# ---------------------------------------------------------------------------
# Teleportation data
# ---------------------------------------------------------------------------


def encode_teleport_data(data: TeleportationData) -> dict:
    states = []
    for a in range(data.n_outcomes):
        for x in range(len(data.ensemble)):
            states.append(
                {
                    "a": a,
                    "x": x,
                    "state": encode_matrix(data.states[(a, x)], (data.bob_dim,)),
                }
            )
    return {
        "schema": SCHEMA,
        "kind": "teleport_data",
        "d": data.d,
        "n_outcomes": data.n_outcomes,
        "ensemble": encode_ensemble(data.ensemble),
        "states": states,
    }


def decode_teleport_data(doc: dict) -> TeleportationData:
    if doc.get("schema") != SCHEMA:
        raise SchemaError("schema", f"expected {SCHEMA!r}, got {doc.get('schema')!r}")
    if doc.get("kind") != "teleport_data":
        raise SchemaError("kind", f"expected 'teleport_data', got {doc.get('kind')!r}")
    d = int(_require(doc, "d", "teleport_data"))
    n_outcomes = int(_require(doc, "n_outcomes", "teleport_data"))
    ensemble = decode_ensemble(_require(doc, "ensemble", "teleport_data"))
    states = {}
    for i, sdoc in enumerate(_require(doc, "states", "teleport_data")):
        mat, _ = decode_matrix(_require(sdoc, "state", f"states[{i}]"), f"states[{i}].state")
        states[(int(sdoc["a"]), int(sdoc["x"]))] = mat
    return TeleportationData(d, ensemble, states, n_outcomes)


# ---------------------------------------------------------------------------
# Chain specs
# ---------------------------------------------------------------------------


def decode_chain_spec(doc: dict) -> ChainSpec:
    if doc.get("schema") != SCHEMA:
        raise SchemaError("schema", f"expected {SCHEMA!r}, got {doc.get('schema')!r}")
    if doc.get("kind") != "chain_spec":
        raise SchemaError("kind", f"expected 'chain_spec', got {doc.get('kind')!r}")
    d = int(_require(doc, "d", "chain_spec"))
    sources = []
    for i, sdoc in enumerate(_require(doc, "sources", "chain_spec")):
        if isinstance(sdoc, dict):
            state = resolve_state(sdoc, f"sources[{i}]")
        else:
            raise SchemaError(f"sources[{i}]", "expected a state document")
        if state.shape.dims != (d, d):
            raise SchemaError(f"sources[{i}]", f"source dimensions {state.shape.dims} != ({d},{d})")
        sources.append(state)
    vis = [float(v) for v in doc.get("bsm_visibilities", [1.0] * (len(sources) - 1))]
    return ChainSpec(
        tuple(sources),
        tuple(vis),
        bool(doc.get("first_node_trusted_inputs", True)),
        bool(doc.get("last_node_trusted", True)),
    )


def encode_chain_plan(plan_obj) -> dict:
    return {
        "schema": SCHEMA,
        "kind": "chain_plan",
        "per_source": list(plan_obj.per_source),
        "end_to_end": plan_obj.end_to_end,
    }


# ---------------------------------------------------------------------------
# Reports and CSV
# ---------------------------------------------------------------------------


def encode_cert_report(report) -> dict:
    doc = {"schema": SCHEMA, "kind": "cert_report"}
    doc.update(report.to_dict())
    return doc


def encode_fidelity_bound(bound) -> dict:
    return {
        "schema": SCHEMA,
        "kind": "fidelity_bound",
        "value": bound.value,
        "status": bound.status,
        "gap": bound.gap,
        "clamped": bound.clamped,
        "residuals": dict(bound.residuals),
    }


def sweep_csv(rows) -> str:
    """CSV with header ``p,bound,status,gap``; numbers at 12 significant digits."""
    lines = ["p,bound,status,gap"]
    for row in rows:
        bound = "" if row.bound is None else format(row.bound, ".12g")
        lines.append(f"{format(row.p, '.12g')},{bound},{row.status},{format(row.gap, '.12g')}")
    return "\n".join(lines) + "\n"


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"


def loads(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("document", f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("document", "top level must be an object")
    return doc
