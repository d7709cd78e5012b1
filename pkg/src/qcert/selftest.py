"""Certification engines built on effective measurements.

Four scenarios are covered: two-sided quantum-input (joint Bell measurements
on both ends), quantum-classical hybrid (Bell-type score with algebraic
maximum 4), CHSH from quantum inputs (binary observables carved out of
four-outcome joint measurements), and the n-party generalization.  Each
engine returns a :class:`CertReport` holding the per-condition residuals,
the extraction fidelity estimate and diagnostics.

The extraction fidelity estimator of record is the effective-measurement
(``swap_output``) estimator; :func:`circuit_output` computes the same
quantity by explicitly contracting the extraction circuit and agrees with it
whenever the measurements are projective.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from . import tensor
from .effective import (
    EffectiveSet,
    effective_joint,
    effective_multipartite,
    effective_qc,
    qc_probability_table,
)
from .errors import ArgumentError
from .qobjects import (
    DensityMatrix,
    Povm,
    PureState,
    chsh_input_ensemble,
    correcting_unitary,
    density_matrix,
    naimark_dilate,
    phi_plus_vector,
    qc_input_ensemble,
)
from .tensor import LabeledOperator, SystemShape


@dataclass(frozen=True)
class CertReport:
    """Outcome of one certification run."""

    scenario: str
    fidelity_estimate: float | None
    residuals: dict[str, float]
    tolerance: float
    passed: bool
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.fidelity_estimate is not None and not -1e-9 <= self.fidelity_estimate <= 1 + 1e-9:
            raise ArgumentError(f"fidelity estimate {self.fidelity_estimate} outside [0, 1]")
        worst = max(self.residuals.values(), default=0.0)
        if self.passed != (worst <= self.tolerance):
            raise ArgumentError("pass flag inconsistent with residuals")

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "fidelity_estimate": self.fidelity_estimate,
            "residuals": dict(self.residuals),
            "tolerance": self.tolerance,
            "pass": self.passed,
            "diagnostics": dict(self.diagnostics),
        }


def _report(scenario, fidelity, residuals, tol, diagnostics) -> CertReport:
    worst = max(residuals.values(), default=0.0)
    return CertReport(scenario, fidelity, residuals, tol, worst <= tol, diagnostics)


# ---------------------------------------------------------------------------
# Two-sided quantum inputs
# ---------------------------------------------------------------------------


def _joint_dims(eff: EffectiveSet) -> tuple[int, int]:
    if eff.scenario != "joint":
        raise ArgumentError("expected a joint-scenario effective set")
    da, db = eff.primed_dims
    expected = {(a, b) for a in range(da * da) for b in range(db * db)}
    missing = expected - set(eff.keys())
    if missing:
        raise ArgumentError(f"effective set is missing outcome pairs, e.g. {sorted(missing)[:3]}")
    return da, db


def corrected_entry(eff: EffectiveSet, a: int, b: int) -> np.ndarray:
    """``(U_a (x) U_b) M_ab^T (U_a (x) U_b)^dag`` for one outcome pair."""
    da, db = _joint_dims(eff)
    u = np.kron(correcting_unitary(a, da), correcting_unitary(b, db))
    return u @ eff[(a, b)].matrix.T @ u.conj().T


def mdi_certify(eff: EffectiveSet, reference: PureState, tol: float = 1e-6) -> CertReport:
    """Check that every corrected, transposed effective measurement is the
    reference projector over d^2; pass certifies the shared state up to
    local isometry."""
    da, db = _joint_dims(eff)
    if reference.shape.dims != (da, db):
        raise ArgumentError("reference state dimensions do not match the effective set")
    target = np.outer(reference.amplitudes, reference.amplitudes.conj()) / (da * db)
    residuals = {}
    for a in range(da * da):
        for b in range(db * db):
            dev = tensor.max_abs(corrected_entry(eff, a, b) - target)
            residuals[f"corrected[{a},{b}]"] = dev
    out = swap_output(eff)
    fidelity = tensor.pure_fidelity(out.operator, reference.amplitudes)
    diagnostics = {"swap_fidelity": fidelity}
    return _report("mdi", fidelity, residuals, tol, diagnostics)


def swap_output(eff: EffectiveSet) -> DensityMatrix:
    """Average of the corrected transposed effective measurements.

    This is the reduced state left on the fresh registers by the extraction
    circuit, computable from observed statistics alone; it equals the shared
    state exactly when both parties apply ideal Bell measurements.
    """
    da, db = _joint_dims(eff)
    dim = da * db
    acc = np.zeros((dim, dim), dtype=np.complex128)
    for a in range(da * da):
        for b in range(db * db):
            acc += corrected_entry(eff, a, b)
    return density_matrix(acc / (da * db), (da, db))


def circuit_output(
    rho: DensityMatrix, povm_a: Povm, povm_b: Povm, nonprojective: str = "sqrt"
) -> DensityMatrix:
    """Contract the extraction circuit explicitly.

    Non-projective measurements are handled per ``nonprojective``: ``"sqrt"``
    uses the positive square roots of the effects as measurement operators
    (minimal-disturbance update), ``"naimark"`` first dilates both
    measurements to projective ones on extended registers.  For projective
    inputs both options coincide with :func:`swap_output` of the
    forward-simulated effective set.
    """
    dap, da = povm_a.shape.dims
    db, dbp = povm_b.shape.dims
    if rho.shape.dims != (da, db):
        raise ArgumentError("state dimensions do not match the measurements")
    if nonprojective not in ("sqrt", "naimark"):
        raise ArgumentError("nonprojective must be 'sqrt' or 'naimark'")

    if nonprojective == "sqrt":
        ka = [tensor.hermitian_sqrt(e.matrix) for e in povm_a.effects]
        kb = [tensor.hermitian_sqrt(e.matrix) for e in povm_b.effects]
    else:
        dil_a = naimark_dilate(povm_a)
        dil_b = naimark_dilate(povm_b)
        ka = [p.matrix @ dil_a.isometry for p in dil_a.projective.effects]
        kb = [p.matrix @ dil_b.isometry for p in dil_b.projective.effects]

    corr_a = [correcting_unitary(a, dap) for a in range(dap * dap)]
    corr_b = [correcting_unitary(b, dbp) for b in range(dbp * dbp)]
    if len(ka) != dap * dap or len(kb) != dbp * dbp:
        raise ArgumentError("the circuit expects d^2-outcome joint measurements")

    phia = phi_plus_vector(dap)
    phib = phi_plus_vector(dbp)
    evals, evecs = np.linalg.eigh(rho.matrix)
    out = np.zeros((dap * dbp, dap * dbp), dtype=np.complex128)
    for r in range(evals.shape[0]):
        lam = float(evals[r])
        if lam <= 1e-14:
            continue
        omega = np.kron(np.kron(phia, evecs[:, r]), phib)
        t = omega.reshape(dap, dap * da, db * dbp, dbp)
        for a, ea in enumerate(ka):
            ta = np.einsum("ai,bj,ijkl->abkl", corr_a[a], ea, t, optimize=True)
            for b, eb in enumerate(kb):
                chi = np.einsum("ck,dl,abkl->abcd", eb, corr_b[b], ta, optimize=True)
                chi3 = chi.reshape(dap, -1, dbp)
                out += lam * np.einsum("imk,jml->ikjl", chi3, chi3.conj(), optimize=True).reshape(
                    dap * dbp, dap * dbp
                )
    return density_matrix(out, (dap, dbp))


# ---------------------------------------------------------------------------
# Quantum-classical scenario
# ---------------------------------------------------------------------------

# Outcome grouping of the score: entry (a, b, x, y) appears iff listed here.
QC_SCORE_TERMS: tuple[tuple[int, int, int, int], ...] = (
    # quantum input |0>, classical input 0
    (0, 0, 0, 0), (1, 0, 0, 0), (2, 1, 0, 0), (3, 1, 0, 0),
    # quantum input |1>, classical input 0
    (0, 1, 1, 0), (1, 1, 1, 0), (2, 0, 1, 0), (3, 0, 1, 0),
    # quantum input |+>, classical input 1
    (0, 0, 2, 1), (2, 0, 2, 1), (1, 1, 2, 1), (3, 1, 2, 1),
    # quantum input |->, classical input 1
    (0, 1, 3, 1), (2, 1, 3, 1), (1, 0, 3, 1), (3, 0, 3, 1),
)


def qc_group_sums(table: Mapping[tuple[int, int, int, int], float]) -> list[float]:
    """The four 4-term sums of the quantum-classical score (each at most 1)."""
    missing = [key for key in QC_SCORE_TERMS if key not in table]
    if missing:
        raise ArgumentError(f"probability table is missing required entries: {missing}")
    return [
        sum(table[key] for key in QC_SCORE_TERMS[4 * g : 4 * g + 4]) for g in range(4)
    ]


def qc_bell_value(table: Mapping[tuple[int, int, int, int], float]) -> float:
    """Bell-type score of the quantum-classical scenario (algebraic maximum 4).

    Table keys are ``(a, b, x, y)`` with quantum inputs indexed
    ``0:|0>, 1:|1>, 2:|+>, 3:|->`` and classical inputs ``y in {0, 1}``.
    """
    return float(sum(qc_group_sums(table)))


def _qc_target_projector(a: int, b: int, y: int) -> np.ndarray:
    """Projector each effective operator must be proportional to at score 4."""
    z0 = np.array([[1, 0], [0, 0]], dtype=complex)
    z1 = np.array([[0, 0], [0, 1]], dtype=complex)
    xp = 0.5 * np.array([[1, 1], [1, 1]], dtype=complex)
    xm = 0.5 * np.array([[1, -1], [-1, 1]], dtype=complex)
    if y == 0:
        return z0 if (b == 0) == (a in (0, 1)) else z1
    return xp if (b == 0) == (a in (0, 2)) else xm


def table_from_array(table: np.ndarray) -> dict[tuple[int, int, int, int], float]:
    """Flatten a p[a, b, x, y] array into the mapping the score functions take."""
    out = {}
    for key in np.ndindex(*table.shape):
        out[key] = float(table[key])
    return out


def qc_certify(
    rho: DensityMatrix, povm_a: Povm, bob_settings: Sequence[Povm], tol: float = 1e-6
) -> CertReport:
    """Certify the maximally entangled qubit pair in the hybrid scenario.

    Checks the score, the projector form of the effective measurements, the
    uniform weights 1/4, the anticommutation witness of the second party's
    observables on its reduced state, and the extraction-circuit fidelity.
    """
    if povm_a.shape.dims[0] != 2:
        raise ArgumentError("the hybrid certification works with qubit quantum inputs")
    if povm_a.n_outcomes != 4 or any(s.n_outcomes != 2 for s in bob_settings) or len(bob_settings) != 2:
        raise ArgumentError("need a 4-outcome joint measurement and two binary settings")
    ensemble = qc_input_ensemble()
    eff = effective_qc(rho, povm_a, bob_settings)
    table_arr = qc_probability_table(rho, povm_a, bob_settings, ensemble)
    table = table_from_array(table_arr)
    groups = qc_group_sums(table)
    score = float(sum(groups))

    residuals: dict[str, float] = {}
    for g, s in enumerate(groups):
        residuals[f"group_sum[{g}]"] = abs(s - 1.0)

    # Effective operators must be the stated multiples of rank-one projectors.
    mus = [float(np.trace(eff[(a, 0, 0)].matrix).real) for a in range(4)]
    for a in range(4):
        residuals[f"weight[{a}]"] = abs(mus[a] - 0.25)
    for a, b, y in itertools.product(range(4), range(2), range(2)):
        target = _qc_target_projector(a, b, y)
        m = eff[(a, b, y)].matrix
        mu = float(np.trace(m).real)
        residuals[f"projector[{a},{b}|{y}]"] = tensor.max_abs(m - mu * target)

    # No-signalling across the classical input.
    ns = 0.0
    for a in range(4):
        s0 = sum(eff[(a, b, 0)].matrix for b in range(2))
        s1 = sum(eff[(a, b, 1)].matrix for b in range(2))
        ns = max(ns, tensor.max_abs(s0 - s1))
    residuals["no_signalling"] = ns

    # Anticommutation witness of the second party's observables.
    b0 = bob_settings[0].effects[0].matrix - bob_settings[0].effects[1].matrix
    b1 = bob_settings[1].effects[0].matrix - bob_settings[1].effects[1].matrix
    rho_b = tensor.partial_trace(rho.operator, keep=[1]).matrix
    residuals["anticommutator"] = tensor.max_abs((b0 @ b1 + b1 @ b0) @ rho_b)

    fidelity, trace_deficit = _qc_circuit_fidelity(rho, povm_a, b0, b1)
    residuals["circuit_fidelity_gap"] = abs(1.0 - fidelity)

    diagnostics = {
        "bell_value": score,
        "weights": mus,
        "circuit_fidelity": fidelity,
        "circuit_trace_deficit": trace_deficit,
        "group_sums": groups,
    }
    return _report("qc", min(1.0, max(0.0, fidelity)), residuals, tol, diagnostics)


def _qc_circuit_fidelity(
    rho: DensityMatrix, povm_a: Povm, b0: np.ndarray, b1: np.ndarray
) -> tuple[float, float]:
    """Fidelity of the hybrid extraction circuit output with ``|phi+>``.

    Registers: ancilla (2), first-stage input |0> (2), second-stage input |+>
    (2), the shared pair, and the second party's ancilla (2).  Controlled
    gates use the two observable combinations ``M0+M1-M2-M3`` (z-type) and
    ``M0-M1+M2-M3`` (x-type) of the joint measurement, and the second
    party's observables on its share.
    """
    da, db = rho.shape.dims
    dims = (2, 2, 2, da, db, 2)
    proj0 = np.array([[1, 0], [0, 0]], dtype=complex)
    proj_plus = 0.5 * np.array([[1, 1], [1, 1]], dtype=complex)
    hadamard = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)

    m = povm_a.matrices()
    mz = m[0] + m[1] - m[2] - m[3]
    mx = m[0] - m[1] + m[2] - m[3]

    state = tensor.kron_all(
        [
            tensor.operator(proj0, (2,), hermitian=True),
            tensor.operator(proj0, (2,), hermitian=True),
            tensor.operator(proj_plus, (2,), hermitian=True),
            rho.operator,
            tensor.operator(proj0, (2,), hermitian=True),
        ]
    )

    def embed(op: np.ndarray, legs: tuple[int, ...]) -> np.ndarray:
        lo = tensor.operator(op, tuple(dims[i] for i in legs))
        return tensor.embed_operator(lo, legs, dims).matrix

    def controlled(ctrl: int, op: np.ndarray, legs: tuple[int, ...]) -> np.ndarray:
        p0 = embed(proj0, (ctrl,))
        p1 = embed(np.array([[0, 0], [0, 1]], dtype=complex), (ctrl,))
        return p0 + p1 @ embed(op, legs)

    h_a = embed(hadamard, (0,))
    h_b = embed(hadamard, (5,))
    gates = [
        h_a @ h_b,
        controlled(0, mz, (1, 3)) @ controlled(5, b0, (4,)),
        h_a @ h_b,
        controlled(0, mx, (2, 3)) @ controlled(5, b1, (4,)),
    ]
    full = state.matrix
    for g in gates:
        full = g @ full @ g.conj().T
    reduced = tensor.partial_trace(
        tensor.LabeledOperator(full, SystemShape(dims)), keep=[0, 5]
    ).matrix
    reduced = 0.5 * (reduced + reduced.conj().T)
    tr = float(np.trace(reduced).real)
    if tr <= 1e-12:
        return 0.0, 1.0
    phi = phi_plus_vector(2)
    fidelity = float((phi.conj() @ reduced @ phi).real) / tr
    return fidelity, abs(1.0 - tr)


# ---------------------------------------------------------------------------
# CHSH from quantum inputs
# ---------------------------------------------------------------------------


class ChshObservables(NamedTuple):
    first: np.ndarray
    second: np.ndarray
    residuals: dict[str, float]


def chsh_observables(povm: Povm, inputs: Sequence[np.ndarray], label: str = "A") -> ChshObservables:
    """Binary observables induced by a 4-outcome joint measurement.

    ``inputs`` are the two pure quantum inputs (amplitude vectors) fed on the
    first tensor factor.  The first observable groups outcomes {0,1} against
    {2,3} under the first input; the second groups {0,2} against {1,3} under
    the second input.  Validity residuals (positivity of each part and
    completeness of each pair) are reported alongside.
    """
    if povm.n_outcomes != 4:
        raise ArgumentError("observable construction expects 4 outcomes")
    dp, d = povm.shape.dims
    mats = [e.matrix.reshape(dp, d, dp, d) for e in povm.effects]

    def steer(vec: np.ndarray, idx: tuple[int, int]) -> np.ndarray:
        proj = np.outer(vec, vec.conj())
        k = mats[idx[0]] + mats[idx[1]]
        return np.einsum("ji,imjn->mn", proj, k, optimize=True)

    groups = {
        "0+": (0, 1), "0-": (2, 3),
        "1+": (0, 2), "1-": (1, 3),
    }
    parts = {
        name: steer(inputs[0] if name[0] == "0" else inputs[1], idx)
        for name, idx in groups.items()
    }
    residuals = {}
    eye = np.eye(d)
    for j in "01":
        plus, minus = parts[f"{j}+"], parts[f"{j}-"]
        for sign in "+-":
            lo = float(np.linalg.eigvalsh(0.5 * (parts[f"{j}{sign}"] + parts[f"{j}{sign}"].conj().T))[0])
            residuals[f"{label}{j}{sign}_negativity"] = max(0.0, -lo)
        residuals[f"{label}{j}_completeness"] = tensor.max_abs(plus + minus - eye)
        obs = plus - minus
        residuals[f"{label}{j}_involution"] = tensor.max_abs(obs @ obs - eye)
    return ChshObservables(parts["0+"] - parts["0-"], parts["1+"] - parts["1-"], residuals)


def chsh_quantum_inputs(
    rho: DensityMatrix, povm_a: Povm, povm_b: Povm, tol: float = 1e-6
) -> CertReport:
    """CHSH value from quantum inputs ``|0>`` and ``|+>`` on both sides.

    Both measurements act on input (x) share.  Reaching ``2*sqrt(2)`` with
    valid observables certifies a maximally entangled qubit pair.
    """
    inputs = [s.amplitudes for s in chsh_input_ensemble().states]
    oa = chsh_observables(povm_a, inputs, label="A")
    ob = chsh_observables(povm_b, inputs, label="B")
    a_ops = {"0": oa.first, "1": oa.second}
    b_ops = {"0": ob.first, "1": ob.second}
    value = 0.0
    for (i, j, sign) in (("0", "0", 1), ("0", "1", 1), ("1", "0", 1), ("1", "1", -1)):
        value += sign * float(np.trace(np.kron(a_ops[i], b_ops[j]) @ rho.matrix).real)
    residuals = dict(oa.residuals)
    residuals.update(ob.residuals)
    residuals["chsh_gap"] = abs(2.0 * math.sqrt(2.0) - value)
    diagnostics = {"chsh_value": value}
    return _report("chsh", None, residuals, tol, diagnostics)


def chsh_relabeling_search(
    rho: DensityMatrix, povm_a: Povm, povm_b: Povm
) -> tuple[float, tuple[int, ...], tuple[int, ...]]:
    """Search outcome relabelings for the largest CHSH value.

    Returns the best value with the outcome permutations (new -> old) that
    achieve it; used to pin down labeling conventions.
    """
    best = (-math.inf, (0, 1, 2, 3), (0, 1, 2, 3))
    for perm_a in itertools.permutations(range(4)):
        pa = Povm(tuple(povm_a.effects[i] for i in perm_a), (0, 1, 2, 3), povm_a.shape)
        for perm_b in itertools.permutations(range(4)):
            pb = Povm(tuple(povm_b.effects[i] for i in perm_b), (0, 1, 2, 3), povm_b.shape)
            report = chsh_quantum_inputs(rho, pa, pb)
            val = report.diagnostics["chsh_value"]
            if val > best[0]:
                best = (val, perm_a, perm_b)
    return best


# ---------------------------------------------------------------------------
# Multipartite generalization
# ---------------------------------------------------------------------------


def multipartite_swap_output(eff: EffectiveSet) -> DensityMatrix:
    """``(1/d^n) sum (tensor of corrections) M^T (tensor of corrections)^dag``."""
    if eff.scenario != "multipartite":
        raise ArgumentError("expected a multipartite effective set")
    dims = eff.primed_dims
    total = math.prod(dims)
    acc = np.zeros((total, total), dtype=np.complex128)
    for key, op in eff.entries.items():
        u = correcting_unitary(key[0], dims[0])
        for i in range(1, len(dims)):
            u = np.kron(u, correcting_unitary(key[i], dims[i]))
        acc += u @ op.matrix.T @ u.conj().T
    return density_matrix(acc / total, dims)


def multipartite_certify(
    rho: DensityMatrix, povms: Sequence[Povm], reference: PureState, tol: float = 1e-6
) -> CertReport:
    """n-party version of :func:`mdi_certify` with per-party corrections."""
    n = len(povms)
    if n < 2:
        raise ArgumentError("need at least two parties")
    eff = effective_multipartite(rho, povms)
    dims = eff.primed_dims
    if reference.shape.dims != dims:
        raise ArgumentError("reference state dimensions do not match the scenario")
    total = math.prod(dims)
    target = np.outer(reference.amplitudes, reference.amplitudes.conj()) / total
    residuals = {}
    for key, op in eff.entries.items():
        u = correcting_unitary(key[0], dims[0])
        for i in range(1, n):
            u = np.kron(u, correcting_unitary(key[i], dims[i]))
        corrected = u @ op.matrix.T @ u.conj().T
        residuals[f"corrected[{','.join(map(str, key))}]"] = tensor.max_abs(corrected - target)
    out = multipartite_swap_output(eff)
    fidelity = tensor.pure_fidelity(out.operator, reference.amplitudes)
    return _report("multipartite", fidelity, residuals, tol, {"swap_fidelity": fidelity})
