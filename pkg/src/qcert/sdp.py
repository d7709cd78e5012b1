"""Self-contained dense semidefinite programming for small block problems.

Solves the standard primal pair

    (P)  min  sum_k <C_k, X_k>   s.t.  sum_k <A_ik, X_k> = b_i,  X_k >= 0
    (D)  max  b.y                s.t.  C_k - sum_i y_i A_ik = S_k >= 0

with a primal-dual path-following interior-point method using
Nesterov-Todd scaling, a Mehrotra-style adaptive centering parameter, and a
fixed fraction-to-boundary factor of 0.98.  The implementation is fully
deterministic: identity-multiple starting points sized by the problem norms,
no randomness, dense Cholesky throughout.

Complex Hermitian programs are accepted through :class:`HermitianProgram`
and turned into real symmetric ones by :func:`realify`, which maps each
``n``-dimensional Hermitian block to the ``2n``-dimensional real block
``[[Re, -Im], [Im, Re]]``.  Coefficients carry a factor 1/2 so the real and
complex optimal values coincide (averaging any real feasible point with its
symplectic conjugate produces an embedded-Hermitian point with the same
objective, so no optimum is lost).

The SDPA sparse text format is supported for external cross-checks; see
:func:`export_sdpa` for the sign convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg

from .errors import ArgumentError

_SYM_ATOL = 1e-9
_STEP_FRACTION = 0.98


# ---------------------------------------------------------------------------
# Problem containers
# ---------------------------------------------------------------------------


def _check_blocks(block_dims: Sequence[int], mats: dict[int, np.ndarray], what: str) -> None:
    for k, m in mats.items():
        if not 0 <= k < len(block_dims):
            raise ArgumentError(f"{what}: block index {k} out of range")
        n = block_dims[k]
        if m.shape != (n, n):
            raise ArgumentError(f"{what}: block {k} matrix has shape {m.shape}, expected {(n, n)}")


@dataclass
class HermitianProgram:
    """Complex-Hermitian block SDP in primal standard form."""

    block_dims: list[int]
    objective: list[np.ndarray]
    constraints: list[dict[int, np.ndarray]]
    rhs: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.objective) != len(self.block_dims):
            raise ArgumentError("objective must provide one matrix per block")
        self.rhs = np.asarray(self.rhs, dtype=float)
        if self.rhs.shape != (len(self.constraints),):
            raise ArgumentError("rhs length must match the number of constraints")
        for k, c in enumerate(self.objective):
            if np.max(np.abs(c - c.conj().T)) > _SYM_ATOL:
                raise ArgumentError(f"objective block {k} is not Hermitian")
        for i, row in enumerate(self.constraints):
            _check_blocks(self.block_dims, row, f"constraint {i}")
            for m in row.values():
                if np.max(np.abs(m - m.conj().T)) > _SYM_ATOL:
                    raise ArgumentError(f"constraint {i} has a non-Hermitian block")


@dataclass
class SDPProblem:
    """Real symmetric block SDP in primal standard form."""

    block_dims: list[int]
    objective: list[np.ndarray]
    constraints: list[dict[int, np.ndarray]]
    rhs: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.objective) != len(self.block_dims):
            raise ArgumentError("objective must provide one matrix per block")
        self.rhs = np.asarray(self.rhs, dtype=float)
        if self.rhs.shape != (len(self.constraints),):
            raise ArgumentError("rhs length must match the number of constraints")
        for k, c in enumerate(self.objective):
            if np.max(np.abs(c - c.T)) > _SYM_ATOL:
                raise ArgumentError(f"objective block {k} is not symmetric")
        for i, row in enumerate(self.constraints):
            _check_blocks(self.block_dims, row, f"constraint {i}")
            for m in row.values():
                if np.max(np.abs(m - m.T)) > _SYM_ATOL:
                    raise ArgumentError(f"constraint {i} has a non-symmetric block")

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)


def _embed(h: np.ndarray) -> np.ndarray:
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


def realify(program: HermitianProgram) -> SDPProblem:
    """Real symmetric embedding with matching (not doubled) optimal value."""
    block_dims = [2 * n for n in program.block_dims]
    objective = [0.5 * _embed(c) for c in program.objective]
    constraints = [
        {k: 0.5 * _embed(m) for k, m in row.items()} for row in program.constraints
    ]
    meta = dict(program.metadata)
    meta["realified"] = True
    meta["complex_block_dims"] = list(program.block_dims)
    return SDPProblem(block_dims, objective, constraints, np.array(program.rhs), meta)


def extract_hermitian(block: np.ndarray) -> np.ndarray:
    """Recover the Hermitian matrix represented by a realified block."""
    n2 = block.shape[0]
    if n2 % 2:
        raise ArgumentError("realified block dimension must be even")
    n = n2 // 2
    re = 0.5 * (block[:n, :n] + block[n:, n:])
    im = 0.5 * (block[n:, :n] - block[:n, n:])
    return re + 1j * im


# ---------------------------------------------------------------------------
# Presolve
# ---------------------------------------------------------------------------


class PresolveReport(NamedTuple):
    kept_rows: tuple[int, ...]
    dropped_rows: tuple[int, ...]
    inconsistent: bool


def _constraint_vectors(problem: SDPProblem) -> np.ndarray:
    total = sum(n * n for n in problem.block_dims)
    out = np.zeros((problem.n_constraints, total))
    offsets = np.cumsum([0] + [n * n for n in problem.block_dims])
    for i, row in enumerate(problem.constraints):
        for k, m in row.items():
            out[i, offsets[k] : offsets[k + 1]] = m.reshape(-1)
    return out


def presolve(problem: SDPProblem, threshold: float = 1e-10) -> tuple[SDPProblem, PresolveReport]:
    """Drop linearly dependent equality rows via rank-revealing QR.

    Dropped rows are checked for consistency against the kept ones; an
    inconsistent dependent row marks the problem primal-infeasible.
    """
    vecs = _constraint_vectors(problem)
    m = vecs.shape[0]
    if m == 0:
        return problem, PresolveReport((), (), False)
    _, r, piv = scipy.linalg.qr(vecs.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    scale = diag[0] if diag.size and diag[0] > 0 else 1.0
    rank = int(np.sum(diag > threshold * scale))
    kept = tuple(sorted(piv[:rank]))
    dropped = tuple(sorted(piv[rank:]))
    if not dropped:
        return problem, PresolveReport(kept, (), False)
    coeff, *_ = np.linalg.lstsq(vecs[list(kept)].T, vecs[list(dropped)].T, rcond=None)
    implied = coeff.T @ problem.rhs[list(kept)]
    gap = np.abs(implied - problem.rhs[list(dropped)])
    inconsistent = bool(np.any(gap > 1e-8 * (1.0 + np.abs(problem.rhs[list(dropped)]))))
    reduced = SDPProblem(
        list(problem.block_dims),
        [c.copy() for c in problem.objective],
        [problem.constraints[i] for i in kept],
        problem.rhs[list(kept)],
        dict(problem.metadata),
    )
    return reduced, PresolveReport(kept, dropped, inconsistent)


# ---------------------------------------------------------------------------
# Interior-point solver
# ---------------------------------------------------------------------------


@dataclass
class SDPSolution:
    status: str  # optimal | infeasible | max_iter | numerical_failure
    primal_value: float | None
    dual_value: float | None
    blocks: list[np.ndarray]
    y: np.ndarray
    max_equality_residual: float
    min_block_eigenvalue: float
    gap: float
    iterations: int
    metadata: dict = field(default_factory=dict)


class _BlockData:
    """Per-block stacked constraint coefficients for fast Schur assembly."""

    def __init__(self, problem: SDPProblem, k: int):
        self.n = problem.block_dims[k]
        idx = [i for i, row in enumerate(problem.constraints) if k in row]
        self.idx = np.asarray(idx, dtype=int)
        if idx:
            self.mats = np.stack([problem.constraints[i][k] for i in idx])
        else:
            self.mats = np.zeros((0, self.n, self.n))
        self.flat = self.mats.reshape(len(idx), -1)


def _sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def _psd_sqrt_and_inv_sqrt(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    evals, vecs = np.linalg.eigh(m)
    evals = np.clip(evals, 1e-300, None)
    root = np.sqrt(evals)
    return (vecs * root) @ vecs.T, (vecs / root) @ vecs.T


def _nt_scaling(x: np.ndarray, s: np.ndarray) -> np.ndarray:
    xh, _ = _psd_sqrt_and_inv_sqrt(x)
    t = _sym(xh @ s @ xh)
    _, tinvh = _psd_sqrt_and_inv_sqrt(t)
    return _sym(xh @ tinvh @ xh)


def _max_step(x: np.ndarray, dx: np.ndarray) -> float:
    """Largest alpha with x + alpha dx psd (inf if dx pushes inward only)."""
    try:
        l = np.linalg.cholesky(x)
    except np.linalg.LinAlgError:
        l = np.linalg.cholesky(x + 1e-12 * np.trace(x) * np.eye(x.shape[0]))
    linv = scipy.linalg.solve_triangular(l, np.eye(x.shape[0]), lower=True)
    w = _sym(linv @ dx @ linv.T)
    lam = np.linalg.eigvalsh(w)[0]
    if lam >= 0:
        return np.inf
    return -1.0 / lam


def solve(problem: SDPProblem, tol: float = 1e-8, max_iter: int = 200) -> SDPSolution:
    """Solve a block SDP; see the module docstring for the algorithm."""
    if sum(problem.block_dims) > 1000:
        raise ArgumentError(
            f"total variable dimension {sum(problem.block_dims)} exceeds the "
            f"desk-scale limit 1000"
        )
    reduced, report = presolve(problem)
    if report.inconsistent:
        return SDPSolution(
            "infeasible", None, None, [], np.zeros(0), math.inf, 0.0, math.inf, 0,
            {"presolve": report},
        )
    prob = reduced
    dims = prob.block_dims
    nk = len(dims)
    ntot = sum(dims)
    m = prob.n_constraints
    b = prob.rhs
    blocks = [_BlockData(prob, k) for k in range(nk)]
    cmats = [np.asarray(c, dtype=float) for c in prob.objective]

    norm_b = float(np.linalg.norm(b)) if m else 0.0
    norm_c = math.sqrt(sum(float(np.sum(c * c)) for c in cmats))
    norm_a = max((float(np.linalg.norm(bd.flat)) for bd in blocks if bd.flat.size), default=1.0)

    # Identity-multiple start sized by problem norms (deterministic).
    xi = max(10.0, math.sqrt(ntot), norm_b / max(1.0, norm_a))
    eta = max(10.0, math.sqrt(ntot), norm_c)
    xs = [xi * np.eye(n) for n in dims]
    ss = [eta * np.eye(n) for n in dims]
    y = np.zeros(m)

    def apply_a(mats: list[np.ndarray]) -> np.ndarray:
        out = np.zeros(m)
        for k, bd in enumerate(blocks):
            if bd.idx.size:
                out[bd.idx] += bd.flat @ mats[k].reshape(-1)
        return out

    def apply_at(vec: np.ndarray) -> list[np.ndarray]:
        out = []
        for bd in blocks:
            if bd.idx.size:
                out.append(np.tensordot(vec[bd.idx], bd.mats, axes=(0, 0)))
            else:
                out.append(np.zeros((bd.n, bd.n)))
        return out

    status = "max_iter"
    it = 0
    pinf = dinf = relgap = math.inf
    for it in range(1, max_iter + 1):
        at_y = apply_at(y)
        rp = b - apply_a(xs)
        rd = [cmats[k] - ss[k] - at_y[k] for k in range(nk)]
        pobj = sum(float(np.sum(cmats[k] * xs[k])) for k in range(nk))
        dobj = float(b @ y)
        mu = sum(float(np.sum(xs[k] * ss[k])) for k in range(nk)) / ntot
        pinf = float(np.linalg.norm(rp)) / (1.0 + norm_b)
        dinf = math.sqrt(sum(float(np.sum(r * r)) for r in rd)) / (1.0 + norm_c)
        relgap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))

        if pinf <= tol and dinf <= tol and relgap <= tol:
            status = "optimal"
            break

        # Primal infeasibility certificate: (y, S) is an approximate dual ray.
        if dobj > 1e6 * (1.0 + norm_c):
            ray_res = math.sqrt(
                sum(float(np.sum((cmats[k] - rd[k]) ** 2)) for k in range(nk))
            )
            if ray_res <= 1e-6 * dobj:
                status = "infeasible"
                break

        try:
            ws = [_nt_scaling(xs[k], ss[k]) for k in range(nk)]
            sinvs = [np.linalg.inv(ss[k]) for k in range(nk)]

            schur = np.zeros((m, m))
            for k, bd in enumerate(blocks):
                if not bd.idx.size:
                    continue
                waw = np.einsum("ab,ibc,cd->iad", ws[k], bd.mats, ws[k], optimize=True)
                schur[np.ix_(bd.idx, bd.idx)] += bd.flat @ waw.reshape(bd.idx.size, -1).T
            schur_factor = scipy.linalg.cho_factor(
                schur + 1e-13 * np.trace(schur) / max(1, m) * np.eye(m), lower=True
            )

            def newton(rc: list[np.ndarray]):
                rhs = rp - apply_a(rc)
                rhs += apply_a([_sym(ws[k] @ rd[k] @ ws[k]) for k in range(nk)])
                dy = scipy.linalg.cho_solve(schur_factor, rhs)
                at_dy = apply_at(dy)
                ds = [rd[k] - at_dy[k] for k in range(nk)]
                dx = [_sym(rc[k] - ws[k] @ ds[k] @ ws[k]) for k in range(nk)]
                return dy, dx, ds

            # Predictor (affine direction) fixes the centering parameter.
            rc_aff = [-xs[k] for k in range(nk)]
            _, dx_aff, ds_aff = newton(rc_aff)
            ap = min((_max_step(xs[k], dx_aff[k]) for k in range(nk)), default=np.inf)
            ad = min((_max_step(ss[k], ds_aff[k]) for k in range(nk)), default=np.inf)
            ap = min(1.0, _STEP_FRACTION * ap)
            ad = min(1.0, _STEP_FRACTION * ad)
            mu_aff = sum(
                float(np.sum((xs[k] + ap * dx_aff[k]) * (ss[k] + ad * ds_aff[k])))
                for k in range(nk)
            ) / ntot
            sigma = float(np.clip((max(mu_aff, 0.0) / mu) ** 3, 1e-8, 1.0))

            rc = [sigma * mu * sinvs[k] - xs[k] for k in range(nk)]
            dy, dx, ds = newton(rc)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            status = "numerical_failure"
            break

        ap = min((_max_step(xs[k], dx[k]) for k in range(nk)), default=np.inf)
        ad = min((_max_step(ss[k], ds[k]) for k in range(nk)), default=np.inf)
        ap = min(1.0, _STEP_FRACTION * ap)
        ad = min(1.0, _STEP_FRACTION * ad)
        for k in range(nk):
            xs[k] = _sym(xs[k] + ap * dx[k])
            ss[k] = _sym(ss[k] + ad * ds[k])
        y = y + ad * dy

    rp = b - apply_a(xs)
    pobj = sum(float(np.sum(cmats[k] * xs[k])) for k in range(nk))
    dobj = float(b @ y)
    max_res = float(np.max(np.abs(rp))) if m else 0.0
    min_eig = min(
        (float(np.linalg.eigvalsh(xs[k])[0]) for k in range(nk)), default=0.0
    )
    gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
    ok = status == "optimal"
    return SDPSolution(
        status,
        pobj if ok else None,
        dobj if ok else None,
        xs,
        y,
        max_res,
        min_eig,
        gap,
        it,
        {"presolve": report, "pinf": pinf, "dinf": dinf},
    )


# ---------------------------------------------------------------------------
# SDPA sparse format
# ---------------------------------------------------------------------------


def export_sdpa(problem: SDPProblem) -> str:
    """Serialize to the SDPA sparse text format.

    The file encodes the format's standard pair with ``F_i = A_i``,
    ``F_0 = -C`` and cost vector ``b``, so the format's *dual* problem is
    ``max -<C, Y>`` over our feasible set: an external solver's reported
    optimum equals the negative of our primal optimum.  Round-trips through
    :func:`import_sdpa` byte-identically.
    """
    lines = [str(problem.n_constraints), str(len(problem.block_dims))]
    lines.append(" ".join(str(n) for n in problem.block_dims))
    lines.append(" ".join(repr(float(v)) for v in problem.rhs))

    def emit(matno: int, row: dict[int, np.ndarray], negate: bool) -> None:
        for k in sorted(row):
            mat = row[k]
            n = mat.shape[0]
            for i in range(n):
                for j in range(i, n):
                    v = float(mat[i, j])
                    if negate:
                        v = -v
                    if v != 0.0:
                        lines.append(f"{matno} {k + 1} {i + 1} {j + 1} {repr(v)}")

    emit(0, {k: c for k, c in enumerate(problem.objective)}, negate=True)
    for i, row in enumerate(problem.constraints):
        emit(i + 1, row, negate=False)
    return "\n".join(lines) + "\n"


def import_sdpa(text: str) -> SDPProblem:
    """Parse the SDPA sparse format written by :func:`export_sdpa`."""
    rows: list[str] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("*") or line.startswith('"'):
            continue
        rows.append(line.replace(",", " ").replace("{", " ").replace("}", " ").replace("(", " ").replace(")", " "))
    if len(rows) < 4:
        raise ArgumentError("truncated SDPA input")
    m = int(rows[0].split()[0])
    nblocks = int(rows[1].split()[0])
    sizes = [int(v) for v in rows[2].split()]
    if len(sizes) != nblocks:
        raise ArgumentError("block size line does not match block count")
    if any(n < 0 for n in sizes):
        raise ArgumentError("diagonal blocks are not supported")
    rhs = np.array([float(v) for v in rows[3].split()])
    if rhs.shape != (m,):
        raise ArgumentError("cost vector length does not match constraint count")
    objective = [np.zeros((n, n)) for n in sizes]
    constraints: list[dict[int, np.ndarray]] = [dict() for _ in range(m)]
    for line in rows[4:]:
        parts = line.split()
        if len(parts) != 5:
            raise ArgumentError(f"malformed entry line: {line!r}")
        matno, blk, i, j = (int(v) for v in parts[:4])
        val = float(parts[4])
        if not 0 <= matno <= m:
            raise ArgumentError(f"matrix number {matno} out of range")
        if not 1 <= blk <= nblocks:
            raise ArgumentError(f"block number {blk} out of range")
        if matno == 0:
            tgt = objective[blk - 1]
            val = -val
        else:
            tgt = constraints[matno - 1].setdefault(blk - 1, np.zeros((sizes[blk - 1], sizes[blk - 1])))
        tgt[i - 1, j - 1] = val
        tgt[j - 1, i - 1] = val
    return SDPProblem(sizes, objective, constraints, rhs, {"source": "sdpa"})
