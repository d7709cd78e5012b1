"""Dense complex linear algebra over multipartite systems.

Operators are plain ``complex128`` numpy matrices tagged with an ordered
list of subsystem dimensions.  The basis vector ``|j_1 ... j_n>`` sits at
the row-major (mixed-radix) index, so numpy ``reshape`` exposes one tensor
leg per subsystem.  All Hermitian eigenproblems go through ``numpy.linalg.eigh``
(never the general-purpose solver) so PSD checks are deterministic.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .errors import ArgumentError, CapacityError, NumericalConsistencyError

DEFAULT_DIM_CAP = 4096

HERMITIAN_ATOL = 1e-10


def dimension_cap() -> int:
    """Total-dimension cap for composite operators (env ``QCERT_DIM_CAP`` overrides)."""
    raw = os.environ.get("QCERT_DIM_CAP")
    if raw is None:
        return DEFAULT_DIM_CAP
    try:
        cap = int(raw)
    except ValueError as exc:
        raise ArgumentError(f"QCERT_DIM_CAP must be an integer, got {raw!r}") from exc
    if cap < 2:
        raise ArgumentError("QCERT_DIM_CAP must be at least 2")
    return cap


def max_abs(a: np.ndarray) -> float:
    """Entrywise max-norm."""
    return 0.0 if a.size == 0 else float(np.max(np.abs(a)))


@dataclass(frozen=True)
class SystemShape:
    """Ordered subsystem dimensions, optionally with unique register labels."""

    dims: tuple[int, ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if any(d < 2 for d in dims):
            raise ArgumentError(f"subsystem dimensions must be >= 2, got {dims}")
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            object.__setattr__(self, "labels", labels)
            if len(labels) != len(dims):
                raise ArgumentError("labels must match dims in length")
            if len(set(labels)) != len(labels):
                raise ArgumentError(f"duplicate subsystem labels in {labels}")

    @property
    def total_dim(self) -> int:
        return math.prod(self.dims) if self.dims else 1

    @property
    def n_subsystems(self) -> int:
        return len(self.dims)

    def concat(self, other: "SystemShape") -> "SystemShape":
        if self.labels is not None and other.labels is not None:
            return SystemShape(self.dims + other.dims, self.labels + other.labels)
        return SystemShape(self.dims + other.dims)

    def select(self, indices: Iterable[int]) -> "SystemShape":
        idx = tuple(indices)
        labels = None if self.labels is None else tuple(self.labels[i] for i in idx)
        return SystemShape(tuple(self.dims[i] for i in idx), labels)


@dataclass(frozen=True)
class LabeledOperator:
    """Square complex matrix carrying a subsystem shape.

    Values are immutable after construction (the backing array is marked
    read-only); every operation below returns a fresh operator, so instances
    are safe to share across threads.
    """

    matrix: np.ndarray
    shape: SystemShape
    hermitian: bool = field(default=False)

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=np.complex128, copy=True)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ArgumentError(f"operator matrix must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m.view(np.float64))):
            raise ArgumentError("operator entries must be finite (no NaN/Inf)")
        if m.shape[0] != self.shape.total_dim:
            raise ArgumentError(
                f"matrix dimension {m.shape[0]} does not match shape {self.shape.dims}"
            )
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def verify_hermitian(self, atol: float = HERMITIAN_ATOL) -> None:
        """Raise unless the matrix is Hermitian within ``atol`` (max-norm)."""
        dev = max_abs(self.matrix - self.matrix.conj().T)
        if dev > atol:
            raise ArgumentError(f"operator is not Hermitian: max deviation {dev:.3e}")

    def as_tensor(self) -> np.ndarray:
        """Reshape to one row leg and one column leg per subsystem."""
        dims = self.shape.dims
        return self.matrix.reshape(dims + dims)


def identity(shape: SystemShape) -> LabeledOperator:
    return LabeledOperator(np.eye(shape.total_dim), shape, hermitian=True)


def operator(matrix: np.ndarray, dims: Iterable[int], hermitian: bool = False) -> LabeledOperator:
    """Shorthand constructor from a matrix and a dims tuple."""
    return LabeledOperator(np.asarray(matrix), SystemShape(tuple(dims)), hermitian=hermitian)


def kron(a: LabeledOperator, b: LabeledOperator) -> LabeledOperator:
    """Tensor product; shape is the concatenation of the factor shapes."""
    total = a.dim * b.dim
    cap = dimension_cap()
    if total > cap:
        raise CapacityError(f"kron would produce dimension {total} > cap {cap}")
    return LabeledOperator(
        np.kron(a.matrix, b.matrix), a.shape.concat(b.shape), hermitian=a.hermitian and b.hermitian
    )


def kron_all(ops: Iterable[LabeledOperator]) -> LabeledOperator:
    ops = list(ops)
    if not ops:
        raise ArgumentError("kron_all needs at least one operator")
    out = ops[0]
    for op in ops[1:]:
        out = kron(out, op)
    return out


def _check_indices(shape: SystemShape, indices: Iterable[int]) -> tuple[int, ...]:
    idx = tuple(int(i) for i in indices)
    n = shape.n_subsystems
    if len(set(idx)) != len(idx):
        raise ArgumentError(f"repeated subsystem index in {idx}")
    for i in idx:
        if not 0 <= i < n:
            raise ArgumentError(f"subsystem index {i} out of range for {n} subsystems")
    return idx


def partial_trace(op: LabeledOperator, keep: Iterable[int]) -> LabeledOperator:
    """Trace out every subsystem not listed in ``keep`` (kept order preserved).

    An empty ``keep`` returns a 1x1 matrix holding the full trace.
    """
    keep_idx = sorted(_check_indices(op.shape, keep))
    dims = op.shape.dims
    n = len(dims)
    if not keep_idx:
        # Scalar result: represent as a 1x1 matrix on a single 2-dim-free shape.
        tr = np.array([[np.trace(op.matrix)]])
        return LabeledOperator(tr, SystemShape(()), hermitian=op.hermitian)
    if len(keep_idx) == n:
        return op
    t = op.as_tensor()
    traced = [i for i in range(n) if i not in keep_idx]
    # Contract each traced row leg with its column partner, innermost first so
    # axis numbers for the remaining pairs stay valid.
    for i in sorted(traced, reverse=True):
        t = np.trace(t, axis1=i, axis2=i + (t.ndim // 2))
    kept_dim = math.prod(dims[i] for i in keep_idx)
    return LabeledOperator(
        t.reshape(kept_dim, kept_dim), op.shape.select(keep_idx), hermitian=op.hermitian
    )


def partial_transpose(op: LabeledOperator, subsystem: int) -> LabeledOperator:
    """Transpose a single subsystem in the computational product basis."""
    (i,) = _check_indices(op.shape, [subsystem])
    n = op.shape.n_subsystems
    t = op.as_tensor()
    axes = list(range(2 * n))
    axes[i], axes[n + i] = axes[n + i], axes[i]
    out = t.transpose(axes).reshape(op.dim, op.dim)
    return LabeledOperator(out, op.shape, hermitian=False)


def permute_subsystems(op: LabeledOperator, perm: Iterable[int]) -> LabeledOperator:
    """Reorder subsystems; ``perm[i]`` is the old position of new subsystem ``i``."""
    perm_idx = _check_indices(op.shape, perm)
    n = op.shape.n_subsystems
    if len(perm_idx) != n:
        raise ArgumentError("perm must list every subsystem exactly once")
    t = op.as_tensor()
    axes = list(perm_idx) + [n + i for i in perm_idx]
    out = t.transpose(axes).reshape(op.dim, op.dim)
    return LabeledOperator(out, op.shape.select(perm_idx), hermitian=op.hermitian)


def embed_operator(
    op: LabeledOperator, positions: Iterable[int], full_dims: Iterable[int]
) -> LabeledOperator:
    """Extend ``op`` by identities onto a larger register list.

    ``positions[i]`` is the slot in ``full_dims`` carrying subsystem ``i`` of
    ``op``; remaining slots get identity factors.
    """
    pos = tuple(int(i) for i in positions)
    dims = tuple(int(d) for d in full_dims)
    if len(pos) != op.shape.n_subsystems:
        raise ArgumentError("positions must match the operator's subsystem count")
    if len(set(pos)) != len(pos) or any(not 0 <= i < len(dims) for i in pos):
        raise ArgumentError(f"invalid embedding positions {pos}")
    for i, p in enumerate(pos):
        if dims[p] != op.shape.dims[i]:
            raise ArgumentError(f"slot {p} has dimension {dims[p]}, operator leg needs {op.shape.dims[i]}")
    rest = [i for i in range(len(dims)) if i not in pos]
    combined = op
    if rest:
        eye_dim = math.prod(dims[i] for i in rest)
        combined = kron(op, LabeledOperator(np.eye(eye_dim), SystemShape(tuple(dims[i] for i in rest)), hermitian=True))
    # combined currently carries legs (pos..., rest...); permute into slot order.
    order = list(pos) + rest
    perm = [order.index(i) for i in range(len(dims))]
    return permute_subsystems(combined, perm)


def pure_fidelity(rho: LabeledOperator, psi: np.ndarray) -> float:
    """Overlap ``<psi| rho |psi>`` of a state with a pure reference.

    ``rho`` must be Hermitian with unit trace (1e-8); ``psi`` must be a
    normalized amplitude vector (1e-10) of matching dimension.
    """
    vec = np.asarray(psi, dtype=np.complex128).reshape(-1)
    if vec.shape[0] != rho.dim:
        raise ArgumentError(f"state dimension {vec.shape[0]} does not match operator {rho.dim}")
    rho.verify_hermitian()
    tr = np.trace(rho.matrix)
    if abs(tr - 1.0) > 1e-8:
        raise ArgumentError(f"density operator trace {tr} deviates from 1 beyond 1e-8")
    norm = np.linalg.norm(vec)
    if abs(norm - 1.0) > 1e-10:
        raise ArgumentError(f"reference state norm {norm} deviates from 1 beyond 1e-10")
    val = complex(vec.conj() @ rho.matrix @ vec)
    if abs(val.imag) > 1e-10:
        raise NumericalConsistencyError(f"fidelity has imaginary part {val.imag:.3e}")
    return float(val.real)


class PsdReport(NamedTuple):
    ok: bool
    min_eigenvalue: float


def psd_check(op: LabeledOperator, tol: float = 1e-9) -> PsdReport:
    """True iff the smallest eigenvalue is >= -tol.  Input must be Hermitian."""
    op.verify_hermitian()
    evals = np.linalg.eigvalsh(op.matrix)
    lo = float(evals[0])
    return PsdReport(lo >= -tol, lo)


def hermitian_sqrt(matrix: np.ndarray) -> np.ndarray:
    """Positive square root of a PSD Hermitian matrix (tiny negatives clipped)."""
    evals, vecs = np.linalg.eigh(matrix)
    if evals[0] < -1e-9:
        raise ArgumentError(f"matrix is not PSD: min eigenvalue {evals[0]:.3e}")
    root = np.sqrt(np.clip(evals, 0.0, None))
    return (vecs * root) @ vecs.conj().T


def hermitian_basis(n: int) -> list[np.ndarray]:
    """Orthonormal (Frobenius) basis of n x n Hermitian matrices.

    Diagonal units first, then symmetric and antisymmetric off-diagonal pairs.
    """
    basis: list[np.ndarray] = []
    for i in range(n):
        e = np.zeros((n, n), dtype=np.complex128)
        e[i, i] = 1.0
        basis.append(e)
    s = 1.0 / np.sqrt(2.0)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n), dtype=np.complex128)
            e[i, j] = s
            e[j, i] = s
            basis.append(e)
            f = np.zeros((n, n), dtype=np.complex128)
            f[i, j] = 1j * s
            f[j, i] = -1j * s
            basis.append(f)
    return basis
