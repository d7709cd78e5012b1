"""Teleportation as a certification primitive.

Generates teleportation data (the subnormalized second-party states left
after the first party's joint measurement), evaluates the average
teleportation fidelity and its linear relation to the maximally entangled
fraction, rebuilds the corrected extraction output, and casts the certified
fidelity lower bound as a semidefinite program:

    min  (1/d) sum_a <phi+| U_a Y_a U_a^dag |phi+>
    s.t. Tr_A'[ Y_a (psi_x^T (x) 1) ] = phi_{a|x}   for all a, x
         Y_a >= 0
         sum_a Y_a = 1 (x) sum_a phi_{a|x}          for every x

where ``Y_a`` is the partial transpose (on the trusted input factor, in the
computational basis) of the effective teleportation measurement.  Writing the
program in terms of ``Y_a`` keeps the cone constraint a plain PSD constraint;
the effective measurements themselves are Hermitian but generally not PSD.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import sdp, tensor
from .effective import EffectiveSet, reconstruct_teleport
from .errors import ArgumentError, DataError
from .qobjects import (
    DensityMatrix,
    InputEnsemble,
    Povm,
    correcting_unitary,
    density_matrix,
    isotropic_state,
    phi_plus_vector,
    teleport_correction,
)
_PSD_TOL = 1e-9
_TRACE_TOL = 1e-8
_NS_TOL = 1e-8


@dataclass(frozen=True)
class TeleportationData:
    """Input ensemble plus the subnormalized teleported states ``phi_{a|x}``."""

    d: int
    ensemble: InputEnsemble
    states: dict[tuple[int, int], np.ndarray]
    n_outcomes: int

    def __post_init__(self) -> None:
        if self.ensemble.d != self.d:
            raise ArgumentError("ensemble dimension does not match d")
        frozen: dict[tuple[int, int], np.ndarray] = {}
        bob_dim = None
        for key, m in self.states.items():
            arr = np.array(m, dtype=np.complex128, copy=True)
            if bob_dim is None:
                bob_dim = arr.shape[0]
            if arr.shape != (bob_dim, bob_dim):
                raise ArgumentError("all teleported states must share one dimension")
            if tensor.max_abs(arr - arr.conj().T) > 1e-9:
                raise ArgumentError(f"state {key} is not Hermitian")
            lo = float(np.linalg.eigvalsh(0.5 * (arr + arr.conj().T))[0])
            if lo < -_PSD_TOL:
                raise ArgumentError(f"state {key} is not PSD: min eigenvalue {lo:.3e}")
            arr.setflags(write=False)
            frozen[key] = arr
        object.__setattr__(self, "states", frozen)
        n_x = len(self.ensemble)
        expected = {(a, x) for a in range(self.n_outcomes) for x in range(n_x)}
        if set(frozen) != expected:
            raise ArgumentError("states must cover every (outcome, input) pair")
        sums = [sum(frozen[(a, x)] for a in range(self.n_outcomes)) for x in range(n_x)]
        for x, s in enumerate(sums):
            tr = float(np.trace(s).real)
            if abs(tr - 1.0) > _TRACE_TOL:
                raise DataError(f"outcome probabilities for input {x} sum to {tr}")
        for x in range(1, n_x):
            dev = tensor.max_abs(sums[x] - sums[0])
            if dev > _NS_TOL:
                raise DataError(
                    f"no-signalling violated: marginal for input {x} deviates by {dev:.3e}"
                )

    @property
    def bob_dim(self) -> int:
        return next(iter(self.states.values())).shape[0]

    def probability(self, a: int, x: int) -> float:
        return float(np.trace(self.states[(a, x)]).real)

    def bob_marginal(self) -> np.ndarray:
        n_x = len(self.ensemble)
        total = sum(
            sum(self.states[(a, x)] for a in range(self.n_outcomes)) for x in range(n_x)
        )
        return np.asarray(total) / n_x


def teleport(rho: DensityMatrix, povm_a: Povm, ensemble: InputEnsemble) -> TeleportationData:
    """Simulate a teleportation experiment exactly (no sampling)."""
    da, db = rho.shape.dims
    dap, da2 = povm_a.shape.dims
    if da2 != da:
        raise ArgumentError("measurement second factor must match the shared state")
    if ensemble.d != dap:
        raise ArgumentError("ensemble dimension must match the measurement input factor")
    r4 = rho.matrix.reshape(da, db, da, db)
    states: dict[tuple[int, int], np.ndarray] = {}
    for a, eff in enumerate(povm_a.effects):
        ma = eff.matrix.reshape(dap, da, dap, da)
        for x, ps in enumerate(ensemble.states):
            proj = ps.projector().matrix
            out = np.einsum("imju,ji,upmq->pq", ma, proj, r4, optimize=True)
            states[(a, x)] = 0.5 * (out + out.conj().T)
    return TeleportationData(dap, ensemble, states, povm_a.n_outcomes)


def average_fidelity(data: TeleportationData, corrections: Sequence[np.ndarray] | None = None) -> float:
    """Probability-weighted fidelity of the corrected teleported states.

    ``corrections`` defaults to the byproduct-undoing Weyl operators of the
    aligned outcome labeling (:func:`qcert.qobjects.teleport_correction`).
    Outcome/input pairs with probability below 1e-12 are skipped (a warning
    reports how many).
    """
    d = data.d
    if data.bob_dim != d:
        raise ArgumentError("average fidelity needs equal input and output dimensions")
    if corrections is None:
        corrections = [teleport_correction(a, d) for a in range(data.n_outcomes)]
    if len(corrections) != data.n_outcomes:
        raise ArgumentError("need one correction per outcome")
    total = 0.0
    skipped = 0
    used = 0
    for x, state in enumerate(data.ensemble.states):
        vec = state.amplitudes
        for a in range(data.n_outcomes):
            if data.probability(a, x) <= 1e-12:
                skipped += 1
                continue
            u = corrections[a]
            total += float((vec.conj() @ (u @ data.states[(a, x)] @ u.conj().T) @ vec).real)
            used += 1
    if used == 0:
        raise DataError("all teleportation branches have zero probability")
    if skipped:
        warnings.warn(f"skipped {skipped} zero-probability teleportation branches")
    return total / len(data.ensemble)


class BellFidelityEstimate(NamedTuple):
    value: float
    clamped: bool


def bell_fidelity_from_average(f_tel: float, d: int) -> BellFidelityEstimate:
    """Invert the linear average-fidelity relation ``(F d + 1) / (d + 1)``.

    Valid only for tomographically complete input sets and a shared state of
    dimension d x d; outside that regime it is not a bound.  The raw value
    ``(f_tel (d+1) - 1) / d`` is clamped to [0, 1] with the clamping flagged.
    """
    if not 0.0 <= f_tel <= 1.0:
        raise ArgumentError(f"average fidelity must lie in [0, 1], got {f_tel}")
    raw = (f_tel * (d + 1) - 1.0) / d
    clamped = not 0.0 <= raw <= 1.0
    return BellFidelityEstimate(min(1.0, max(0.0, raw)), clamped)


def _check_teleport_set(eff: EffectiveSet) -> tuple[int, int]:
    if eff.scenario != "teleport":
        raise ArgumentError("expected a teleport-scenario effective set")
    d = eff.primed_dims[0]
    keys = set(eff.keys())
    if keys != {(a,) for a in range(d * d)}:
        raise ArgumentError(f"need the complete set of {d * d} effective measurements")
    some = next(iter(eff.entries.values()))
    return d, some.shape.dims[1]


def teleport_output(eff: EffectiveSet) -> DensityMatrix:
    """Corrected extraction output ``(1/d) sum_a U_a M_a^{T_input} U_a^dag``.

    For exact Bell measurements this equals the shared state itself, so its
    overlap with ``|phi+>`` is tight; for any other physical measurement it
    can only be smaller.
    """
    d, db = _check_teleport_set(eff)
    acc = np.zeros((d * db, d * db), dtype=np.complex128)
    for a in range(d * d):
        u = np.kron(correcting_unitary(a, d), np.eye(db))
        pt = tensor.partial_transpose(eff[(a,)], 0).matrix
        acc += u @ pt @ u.conj().T
    acc /= d
    return density_matrix(acc, (d, db))


# ---------------------------------------------------------------------------
# SDP construction
# ---------------------------------------------------------------------------


@dataclass
class FidelityBound:
    value: float | None
    status: str
    gap: float
    residuals: dict[str, float] = field(default_factory=dict)
    clamped: bool = False


def _marginal(data: TeleportationData) -> np.ndarray:
    n_x = len(data.ensemble)
    sums = [
        sum(data.states[(a, x)] for a in range(data.n_outcomes)) for x in range(n_x)
    ]
    for x in range(1, n_x):
        if tensor.max_abs(sums[x] - sums[0]) > 1e-6:
            raise DataError("summed teleported states differ across inputs beyond 1e-6")
    return sum(sums) / n_x


def hermitian_fidelity_program(data: TeleportationData) -> sdp.HermitianProgram:
    """Complex-Hermitian form of the fidelity lower-bound program."""
    d = data.d
    db = data.bob_dim
    if db != d:
        raise ArgumentError(
            f"bound against the maximally entangled state needs matching dimensions, "
            f"got input {d} and output {db}"
        )
    if data.n_outcomes != d * d:
        raise ArgumentError("the correction family expects d^2 measurement outcomes")
    dim = d * db
    phi = phi_plus_vector(d)
    rho_r = _marginal(data)

    objective = []
    for a in range(data.n_outcomes):
        u = np.kron(correcting_unitary(a, d), np.eye(db))
        target = u.conj().T @ np.outer(phi, phi.conj()) @ u
        objective.append(target / d)

    constraints: list[dict[int, np.ndarray]] = []
    rhs: list[float] = []
    bob_basis = tensor.hermitian_basis(db)
    projs = data.ensemble.projectors()
    for a in range(data.n_outcomes):
        for x, proj in enumerate(projs):
            phi_ax = data.states[(a, x)]
            for g in bob_basis:
                constraints.append({a: np.kron(proj.T, g)})
                rhs.append(float(np.trace(g @ phi_ax).real))
    full_basis = tensor.hermitian_basis(dim)
    target = np.kron(np.eye(d), rho_r)
    for h in full_basis:
        constraints.append({a: h for a in range(data.n_outcomes)})
        rhs.append(float(np.trace(h @ target).real))

    return sdp.HermitianProgram(
        [dim] * data.n_outcomes,
        objective,
        constraints,
        np.asarray(rhs),
        {"kind": "teleport-fidelity", "d": d},
    )


def build_sdp(data: TeleportationData) -> sdp.SDPProblem:
    """Realified fidelity lower-bound program ready for :func:`qcert.sdp.solve`."""
    return sdp.realify(hermitian_fidelity_program(data))


def fidelity_lower_bound(data: TeleportationData, tol: float = 1e-8, max_iter: int = 200) -> FidelityBound:
    """Solve the teleportation SDP; a sound lower bound on the extractable
    overlap with the maximally entangled state."""
    problem = build_sdp(data)
    solution = sdp.solve(problem, tol=tol, max_iter=max_iter)
    residuals = {
        "max_equality_residual": solution.max_equality_residual,
        "min_block_eigenvalue": solution.min_block_eigenvalue,
        "gap": solution.gap,
    }
    if solution.status != "optimal":
        return FidelityBound(None, solution.status, solution.gap, residuals)
    raw = float(solution.primal_value)
    clamped = not 0.0 <= raw <= 1.0
    return FidelityBound(min(1.0, max(0.0, raw)), "optimal", solution.gap, residuals, clamped)


class SweepRow(NamedTuple):
    p: float
    bound: float | None
    status: str
    gap: float


def sweep_isotropic_bounds(
    d: int,
    ensemble: InputEnsemble,
    p_values: Sequence[float],
    povm_a: Povm,
    tol: float = 1e-8,
) -> list[SweepRow]:
    """Fidelity bounds for a grid of isotropic states through one measurement."""
    rows = []
    for p in p_values:
        data = teleport(isotropic_state(d, p), povm_a, ensemble)
        bound = fidelity_lower_bound(data, tol=tol)
        rows.append(SweepRow(float(p), bound.value, bound.status, bound.gap))
    return rows


def reconstructed_effective_set(data: TeleportationData) -> tuple[EffectiveSet, object]:
    """Linear-inversion recovery of the effective teleportation measurements."""
    return reconstruct_teleport(data.states, data.ensemble, data.bob_dim, data.n_outcomes)
