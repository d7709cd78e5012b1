"""Effective measurements on the trusted input spaces.

An effective measurement is what remains of the Born rule once the shared
state and the untrusted joint measurements are traced out: an outcome-indexed
family of operators on the trusted (primed) registers that fully determines
every observable probability.  This module computes them by forward
simulation, reconstructs them from probability tables by linear inversion,
and generates exact probability tables for the supported scenarios.

Scenario tags and entry keys:

* ``joint``        -- keys ``(a, b)``, operators on A' (x) B'
* ``qc``           -- keys ``(a, b, y)``, operators on A'
* ``teleport``     -- keys ``(a,)``, operators on A' (x) B (second party keeps
  its share, nothing primed there)
* ``multipartite`` -- keys ``(a_1, ..., a_n)``, operators on A_1' (x) ... (x) A_n'
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from . import tensor
from .errors import ArgumentError
from .qobjects import DensityMatrix, InputEnsemble, Povm, is_tomographically_complete
from .tensor import LabeledOperator, SystemShape

SCENARIOS = ("joint", "qc", "teleport", "multipartite")

_HERM_ATOL = 1e-9


@dataclass(frozen=True)
class EffectiveSet:
    """Outcome-indexed effective operators on the trusted spaces."""

    entries: dict[tuple, LabeledOperator]
    scenario: str
    primed_dims: tuple[int, ...]
    reconstructed: bool = field(default=False)

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ArgumentError(f"unknown scenario {self.scenario!r}")
        if not self.entries:
            raise ArgumentError("effective set must not be empty")
        for key, op in self.entries.items():
            dev = tensor.max_abs(op.matrix - op.matrix.conj().T)
            if dev > _HERM_ATOL:
                raise ArgumentError(f"entry {key} is not Hermitian: deviation {dev:.3e}")
            if not self.reconstructed:
                # Teleport-scenario entries are generally not PSD; their
                # defining cone property is positivity of the partial
                # transpose on the trusted input factor.
                checked = (
                    tensor.partial_transpose(op, 0) if self.scenario == "teleport" else op
                )
                lo = float(np.linalg.eigvalsh(0.5 * (checked.matrix + checked.matrix.conj().T))[0])
                if lo < -1e-9:
                    raise ArgumentError(
                        f"forward-simulated entry {key} violates its positivity "
                        f"requirement: min eigenvalue {lo:.3e}"
                    )

    def __getitem__(self, key: tuple) -> LabeledOperator:
        return self.entries[key]

    def keys(self):
        return self.entries.keys()

    def total(self) -> np.ndarray:
        return sum(op.matrix for op in self.entries.values())

    def completeness_residual(self) -> float:
        """Max-norm deviation from the scenario's completeness sum rule."""
        if self.scenario == "qc":
            ys = sorted({key[2] for key in self.entries})
            dim = math.prod(self.primed_dims)
            dev = 0.0
            for y in ys:
                s = sum(op.matrix for key, op in self.entries.items() if key[2] == y)
                dev = max(dev, tensor.max_abs(s - np.eye(dim)))
            return dev
        total = self.total()
        if self.scenario == "teleport":
            # Sum rule 1 (x) rho_B: compare against the best operator of that form.
            op = LabeledOperator(total, next(iter(self.entries.values())).shape)
            d = op.shape.dims[0]
            marginal = tensor.partial_trace(op, keep=[1]).matrix / d
            return tensor.max_abs(total - np.kron(np.eye(d), marginal))
        return tensor.max_abs(total - np.eye(total.shape[0]))


def _reshaped(povm_effect: np.ndarray, dims: tuple[int, int]) -> np.ndarray:
    d0, d1 = dims
    return povm_effect.reshape(d0, d1, d0, d1)


def _hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


# ---------------------------------------------------------------------------
# Forward simulation
# ---------------------------------------------------------------------------


def effective_joint(rho: DensityMatrix, povm_a: Povm, povm_b: Povm) -> EffectiveSet:
    """Trace the shared state out of a two-party joint-measurement scenario.

    ``povm_a`` acts on A' (x) A (input first), ``povm_b`` on B (x) B'
    (input last); ``rho`` lives on A (x) B.
    """
    da, db = rho.shape.dims
    dap, da2 = povm_a.shape.dims
    db2, dbp = povm_b.shape.dims
    if (da2, db2) != (da, db):
        raise ArgumentError(
            f"shape mismatch: state on {rho.shape.dims}, measurements on "
            f"{povm_a.shape.dims} and {povm_b.shape.dims}"
        )
    r4 = rho.matrix.reshape(da, db, da, db)
    shape = SystemShape((dap, dbp))
    entries: dict[tuple, LabeledOperator] = {}
    for a, ea in enumerate(povm_a.effects):
        ma = _reshaped(ea.matrix, (dap, da))
        for b, eb in enumerate(povm_b.effects):
            mb = _reshaped(eb.matrix, (db, dbp))
            out = np.einsum("imju,npvq,uvmn->ipjq", ma, mb, r4, optimize=True)
            entries[(a, b)] = LabeledOperator(
                _hermitize(out.reshape(dap * dbp, dap * dbp)), shape, hermitian=True
            )
    return EffectiveSet(entries, "joint", (dap, dbp))


def effective_qc(rho: DensityMatrix, povm_a: Povm, bob_settings: Sequence[Povm]) -> EffectiveSet:
    """Effective measurements of the quantum-classical scenario, keyed (a, b, y)."""
    da, db = rho.shape.dims
    dap, da2 = povm_a.shape.dims
    if da2 != da:
        raise ArgumentError("povm_a second factor must match the state's first factor")
    for setting in bob_settings:
        if setting.shape.dims != (db,):
            raise ArgumentError("each classical-input measurement must act on B alone")
    r4 = rho.matrix.reshape(da, db, da, db)
    shape = SystemShape((dap,))
    entries: dict[tuple, LabeledOperator] = {}
    for a, ea in enumerate(povm_a.effects):
        ma = _reshaped(ea.matrix, (dap, da))
        for y, setting in enumerate(bob_settings):
            for b, eb in enumerate(setting.effects):
                out = np.einsum("imju,nv,uvmn->ij", ma, eb.matrix, r4, optimize=True)
                entries[(a, b, y)] = LabeledOperator(_hermitize(out), shape, hermitian=True)
    return EffectiveSet(entries, "qc", (dap,))


def effective_teleport(rho: DensityMatrix, povm_a: Povm) -> EffectiveSet:
    """Effective teleportation measurements on A' (x) B, keyed (a,)."""
    da, db = rho.shape.dims
    dap, da2 = povm_a.shape.dims
    if da2 != da:
        raise ArgumentError("povm_a second factor must match the state's first factor")
    r4 = rho.matrix.reshape(da, db, da, db)
    shape = SystemShape((dap, db))
    entries: dict[tuple, LabeledOperator] = {}
    for a, ea in enumerate(povm_a.effects):
        ma = _reshaped(ea.matrix, (dap, da))
        out = np.einsum("imju,upmq->ipjq", ma, r4, optimize=True)
        entries[(a,)] = LabeledOperator(
            _hermitize(out.reshape(dap * db, dap * db)), shape, hermitian=True
        )
    return EffectiveSet(entries, "teleport", (dap,))


def effective_multipartite(rho: DensityMatrix, povms: Sequence[Povm]) -> EffectiveSet:
    """Effective measurements for n parties, each measuring input (x) share."""
    n = len(povms)
    dims = rho.shape.dims
    if len(dims) != n:
        raise ArgumentError(f"state has {len(dims)} parties but {n} measurements given")
    primed = []
    for i, povm in enumerate(povms):
        dp, dshare = povm.shape.dims
        if dshare != dims[i]:
            raise ArgumentError(f"party {i} measurement does not match its share dimension")
        primed.append(dp)

    # Extended state 1' (x) rho on interleaved registers (A_1', A_1, ..., A_n', A_n).
    ext = tensor.kron(
        tensor.operator(np.eye(math.prod(primed)), tuple(primed), hermitian=True),
        rho.operator,
    )
    perm = []
    for i in range(n):
        perm.extend([i, n + i])
    ext = tensor.permute_subsystems(ext, perm)

    shape = SystemShape(tuple(primed))
    keep = [2 * i for i in range(n)]
    entries: dict[tuple, LabeledOperator] = {}

    def build(prefix: tuple[int, ...], acc: LabeledOperator | None) -> None:
        i = len(prefix)
        if i == n:
            prod = LabeledOperator(acc.matrix @ ext.matrix, acc.shape)
            red = tensor.partial_trace(prod, keep)
            entries[prefix] = LabeledOperator(_hermitize(red.matrix), shape, hermitian=True)
            return
        for a, eff in enumerate(povms[i].effects):
            nxt = eff if acc is None else tensor.kron(acc, eff)
            build(prefix + (a,), nxt)

    build((), None)
    return EffectiveSet(entries, "multipartite", tuple(primed))


# ---------------------------------------------------------------------------
# Probability tables (exact Born-rule forward simulation)
# ---------------------------------------------------------------------------


def joint_probability_table(
    rho: DensityMatrix,
    povm_a: Povm,
    povm_b: Povm,
    alice_inputs: InputEnsemble,
    bob_inputs: InputEnsemble,
) -> np.ndarray:
    """Exact table ``p[a, b, x, y]`` for the two-quantum-input scenario."""
    eff = effective_joint(rho, povm_a, povm_b)
    pa = alice_inputs.projectors()
    pb = bob_inputs.projectors()
    table = np.zeros((povm_a.n_outcomes, povm_b.n_outcomes, len(pa), len(pb)))
    for (a, b), op in eff.entries.items():
        for x, px in enumerate(pa):
            for y, qy in enumerate(pb):
                table[a, b, x, y] = np.trace(op.matrix @ np.kron(px, qy)).real
    return table


def qc_probability_table(
    rho: DensityMatrix,
    povm_a: Povm,
    bob_settings: Sequence[Povm],
    alice_inputs: InputEnsemble,
) -> np.ndarray:
    """Exact table ``p[a, b, x, y]`` for the quantum-classical scenario."""
    eff = effective_qc(rho, povm_a, bob_settings)
    pa = alice_inputs.projectors()
    n_b = max(s.n_outcomes for s in bob_settings)
    table = np.zeros((povm_a.n_outcomes, n_b, len(pa), len(bob_settings)))
    for (a, b, y), op in eff.entries.items():
        for x, px in enumerate(pa):
            table[a, b, x, y] = np.trace(op.matrix @ px).real
    return table


def multipartite_probability_table(
    rho: DensityMatrix, povms: Sequence[Povm], ensembles: Sequence[InputEnsemble]
) -> np.ndarray:
    """Exact table ``p[a_1, ..., a_n, x_1, ..., x_n]``."""
    eff = effective_multipartite(rho, povms)
    n = len(povms)
    out_dims = tuple(p.n_outcomes for p in povms)
    in_dims = tuple(len(e) for e in ensembles)
    projs = [e.projectors() for e in ensembles]
    table = np.zeros(out_dims + in_dims)
    for key, op in eff.entries.items():
        for xs in np.ndindex(*in_dims):
            full = projs[0][xs[0]]
            for i in range(1, n):
                full = np.kron(full, projs[i][xs[i]])
            table[key + xs] = np.trace(op.matrix @ full).real
    return table


# ---------------------------------------------------------------------------
# Reconstruction by linear inversion
# ---------------------------------------------------------------------------


class ReconstructionReport(NamedTuple):
    condition_number: float
    max_residual: float
    design_rank: int


def _require_complete(ensemble: InputEnsemble, who: str) -> None:
    report = is_tomographically_complete(ensemble)
    if not report.complete:
        raise ArgumentError(
            f"{who} ensemble is not tomographically complete: rank {report.rank} "
            f"< {report.rank + report.deficit} (deficit {report.deficit})"
        )


def _design_matrix(projector_sets: Sequence[Sequence[np.ndarray]]) -> tuple[np.ndarray, list[np.ndarray]]:
    """Real design matrix over the Hermitian basis of the product space."""
    dims = [p[0].shape[0] for p in projector_sets]
    dim = math.prod(dims)
    basis = tensor.hermitian_basis(dim)
    rows = []
    for combo in np.ndindex(*[len(p) for p in projector_sets]):
        full = projector_sets[0][combo[0]]
        for i in range(1, len(projector_sets)):
            full = np.kron(full, projector_sets[i][combo[i]])
        rows.append([np.trace(g @ full).real for g in basis])
    return np.asarray(rows, dtype=float), basis


def _invert(design: np.ndarray, data_rows: np.ndarray) -> tuple[np.ndarray, float, float, int]:
    sv = np.linalg.svd(design, compute_uv=False)
    cutoff = 1e-10 * sv[0]
    rank = int(np.sum(sv > cutoff))
    smallest = sv[sv > cutoff][-1]
    cond = float(sv[0] / smallest)
    pinv = np.linalg.pinv(design, rcond=1e-10)
    coeffs = data_rows @ pinv.T
    residual = float(np.max(np.linalg.norm(coeffs @ design.T - data_rows, axis=1)))
    return coeffs, cond, residual, rank


def reconstruct_joint(
    table: np.ndarray, alice_inputs: InputEnsemble, bob_inputs: InputEnsemble
) -> tuple[EffectiveSet, ReconstructionReport]:
    """Linear inversion of ``p[a, b, x, y]`` into the joint effective set."""
    _require_complete(alice_inputs, "alice")
    _require_complete(bob_inputs, "bob")
    na, nb, nx, ny = table.shape
    design, basis = _design_matrix([alice_inputs.projectors(), bob_inputs.projectors()])
    data_rows = table.reshape(na * nb, nx * ny)
    coeffs, cond, residual, rank = _invert(design, data_rows)
    d = alice_inputs.d * bob_inputs.d
    shape = SystemShape((alice_inputs.d, bob_inputs.d))
    entries = {}
    for idx in range(na * nb):
        m = np.zeros((d, d), dtype=np.complex128)
        for c, g in zip(coeffs[idx], basis):
            m += c * g
        a, b = divmod(idx, nb)
        entries[(a, b)] = LabeledOperator(_hermitize(m), shape)
    eff = EffectiveSet(entries, "joint", shape.dims, reconstructed=True)
    return eff, ReconstructionReport(cond, residual, rank)


def reconstruct_qc(
    table: np.ndarray, alice_inputs: InputEnsemble
) -> tuple[EffectiveSet, ReconstructionReport]:
    """Linear inversion of ``p[a, b, x, y]`` (classical y) into per-y effective sets."""
    _require_complete(alice_inputs, "alice")
    na, nb, nx, ny = table.shape
    design, basis = _design_matrix([alice_inputs.projectors()])
    data_rows = table.transpose(0, 1, 3, 2).reshape(na * nb * ny, nx)
    coeffs, cond, residual, rank = _invert(design, data_rows)
    d = alice_inputs.d
    shape = SystemShape((d,))
    entries = {}
    for idx in range(na * nb * ny):
        m = np.zeros((d, d), dtype=np.complex128)
        for c, g in zip(coeffs[idx], basis):
            m += c * g
        a, rem = divmod(idx, nb * ny)
        b, y = divmod(rem, ny)
        entries[(a, b, y)] = LabeledOperator(_hermitize(m), shape)
    eff = EffectiveSet(entries, "qc", (d,), reconstructed=True)
    return eff, ReconstructionReport(cond, residual, rank)


def reconstruct_teleport(
    states: Mapping[tuple[int, int], np.ndarray],
    ensemble: InputEnsemble,
    bob_dim: int,
    n_outcomes: int,
) -> tuple[EffectiveSet, ReconstructionReport]:
    """Recover the effective teleportation measurements from teleported states.

    ``states[(a, x)]`` are the subnormalized second-party operators.  Requires
    a tomographically complete input ensemble.
    """
    _require_complete(ensemble, "teleportation input")
    d = ensemble.d
    dim = d * bob_dim
    basis = tensor.hermitian_basis(dim)
    projs = ensemble.projectors()
    bob_basis = tensor.hermitian_basis(bob_dim)
    # Row (x, r): Tr[ G_r  Tr_A'[ K (psi_x (x) 1) ] ] = Tr[ K (psi_x (x) G_r) ].
    design = np.zeros((len(projs) * len(bob_basis), len(basis)))
    for x, px in enumerate(projs):
        for r, g in enumerate(bob_basis):
            probe = np.kron(px, g)
            design[x * len(bob_basis) + r] = [np.trace(h @ probe).real for h in basis]
    data_rows = np.zeros((n_outcomes, design.shape[0]))
    for a in range(n_outcomes):
        for x in range(len(projs)):
            phi = states[(a, x)]
            for r, g in enumerate(bob_basis):
                data_rows[a, x * len(bob_basis) + r] = np.trace(g @ phi).real
    coeffs, cond, residual, rank = _invert(design, data_rows)
    shape = SystemShape((d, bob_dim))
    entries = {}
    for a in range(n_outcomes):
        m = np.zeros((dim, dim), dtype=np.complex128)
        for c, g in zip(coeffs[a], basis):
            m += c * g
        entries[(a,)] = LabeledOperator(_hermitize(m), shape)
    eff = EffectiveSet(entries, "teleport", (d,), reconstructed=True)
    return eff, ReconstructionReport(cond, residual, rank)


def reconstruct(
    table: np.ndarray,
    ensembles: Sequence[InputEnsemble],
    scenario: str,
) -> tuple[EffectiveSet, ReconstructionReport]:
    """Dispatch reconstruction by scenario tag (see module docstring)."""
    if scenario == "joint":
        (alice, bob) = ensembles
        return reconstruct_joint(table, alice, bob)
    if scenario == "qc":
        (alice,) = ensembles
        return reconstruct_qc(table, alice)
    raise ArgumentError(f"reconstruction for scenario {scenario!r} is not table-based")
