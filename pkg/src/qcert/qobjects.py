"""Concrete quantum objects: Weyl operators, Bell bases, joint Bell measurements,
input ensembles, isotropic states, purification and measurement dilation.

Conventions used throughout the package:

* ``|phi+> = (1/sqrt(d)) sum_j |jj>`` (normalized).
* Generalized Weyl operators ``Z = sum_j w^j |j><j|`` and
  ``X = sum_j |j+1 mod d><j|`` with ``w = exp(2*pi*i/d)``.
* Bell basis ``|psi_m> = (X^k Z^l (x) 1)|phi+>`` flattened as ``m = k*d + l``.
  For ``d = 2`` this is the familiar ordering ``phi+, phi-, psi+, psi-``.
* ``correcting_unitary(m, d) = X^k Z^l`` is the operator appearing in every
  certification condition and in the extraction-circuit outputs.
* Joint measurements consumed by the certification scenarios are produced by
  :func:`aligned_bsm`, which places the conjugate Weyl family
  ``X^{-k} Z^{l}`` on the trusted-input tensor factor.  With that outcome
  labeling the plain corrections ``X^k Z^l`` undo the byproducts exactly for
  every ``d`` (for qubits the labeling coincides with :func:`bsm`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import tensor
from .errors import ArgumentError
from .tensor import LabeledOperator, SystemShape

POVM_SUM_ATOL = 1e-9
POVM_PSD_TOL = 1e-9


# ---------------------------------------------------------------------------
# Basic value types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PureState:
    """Normalized amplitude vector over a multipartite shape."""

    amplitudes: np.ndarray
    shape: SystemShape

    def __post_init__(self) -> None:
        vec = np.array(self.amplitudes, dtype=np.complex128, copy=True).reshape(-1)
        if vec.shape[0] != self.shape.total_dim:
            raise ArgumentError(
                f"amplitude length {vec.shape[0]} does not match shape {self.shape.dims}"
            )
        norm = np.linalg.norm(vec)
        if abs(norm - 1.0) > 1e-10:
            raise ArgumentError(f"state norm {norm} deviates from 1 beyond 1e-10")
        vec.setflags(write=False)
        object.__setattr__(self, "amplitudes", vec)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def projector(self) -> LabeledOperator:
        return LabeledOperator(np.outer(self.amplitudes, self.amplitudes.conj()), self.shape, hermitian=True)


@dataclass(frozen=True)
class Povm:
    """Finite measurement: PSD effects summing to the identity, with unique labels."""

    effects: tuple[LabeledOperator, ...]
    outcome_labels: tuple[object, ...]
    shape: SystemShape

    def __post_init__(self) -> None:
        effects = tuple(self.effects)
        labels = tuple(self.outcome_labels)
        object.__setattr__(self, "effects", effects)
        object.__setattr__(self, "outcome_labels", labels)
        if not effects:
            raise ArgumentError("a POVM needs at least one effect")
        if len(labels) != len(effects):
            raise ArgumentError("outcome_labels must match effects in length")
        if len(set(labels)) != len(labels):
            raise ArgumentError("outcome labels must be unique")
        total = np.zeros((self.shape.total_dim, self.shape.total_dim), dtype=np.complex128)
        for eff in effects:
            if eff.shape.dims != self.shape.dims:
                raise ArgumentError("all effects must carry the POVM shape")
            report = tensor.psd_check(eff, tol=POVM_PSD_TOL)
            if not report.ok:
                raise ArgumentError(
                    f"effect is not PSD: min eigenvalue {report.min_eigenvalue:.3e}"
                )
            total = total + eff.matrix
        dev = tensor.max_abs(total - np.eye(self.shape.total_dim))
        if dev > POVM_SUM_ATOL:
            raise ArgumentError(f"effects do not sum to identity: deviation {dev:.3e}")

    @property
    def n_outcomes(self) -> int:
        return len(self.effects)

    @property
    def dim(self) -> int:
        return self.shape.total_dim

    def matrices(self) -> list[np.ndarray]:
        return [eff.matrix for eff in self.effects]

    def is_projective(self, atol: float = 1e-9) -> bool:
        return all(
            tensor.max_abs(eff.matrix @ eff.matrix - eff.matrix) <= atol for eff in self.effects
        )


@dataclass(frozen=True)
class InputEnsemble:
    """Labeled list of trusted single-system input states of a common dimension."""

    states: tuple[PureState, ...]
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        states = tuple(self.states)
        labels = tuple(str(x) for x in self.labels)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "labels", labels)
        if not states:
            raise ArgumentError("ensemble must not be empty")
        if len(labels) != len(states):
            raise ArgumentError("labels must match states in length")
        d = states[0].dim
        if any(s.dim != d for s in states):
            raise ArgumentError("all ensemble states must share one dimension")

    @property
    def d(self) -> int:
        return self.states[0].dim

    def __len__(self) -> int:
        return len(self.states)

    def projectors(self) -> list[np.ndarray]:
        return [s.projector().matrix for s in self.states]


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, PSD, unit-trace operator."""

    operator: LabeledOperator

    def __post_init__(self) -> None:
        self.operator.verify_hermitian(atol=1e-9)
        report = tensor.psd_check(self.operator, tol=1e-9)
        if not report.ok:
            raise ArgumentError(
                f"density matrix is not PSD: min eigenvalue {report.min_eigenvalue:.3e}"
            )
        tr = np.trace(self.operator.matrix).real
        if abs(tr - 1.0) > 1e-9:
            raise ArgumentError(f"density matrix trace {tr} deviates from 1 beyond 1e-9")

    @property
    def matrix(self) -> np.ndarray:
        return self.operator.matrix

    @property
    def shape(self) -> SystemShape:
        return self.operator.shape

    @property
    def dim(self) -> int:
        return self.operator.dim


def density_matrix(matrix: np.ndarray, dims: Iterable[int]) -> DensityMatrix:
    m = np.asarray(matrix, dtype=np.complex128)
    m = 0.5 * (m + m.conj().T)
    return DensityMatrix(LabeledOperator(m, SystemShape(tuple(dims)), hermitian=True))


# ---------------------------------------------------------------------------
# Weyl operators and Bell structures
# ---------------------------------------------------------------------------


def weyl_operators(d: int) -> tuple[np.ndarray, np.ndarray, complex]:
    """Generalized shift/clock pair ``(X, Z, w)`` with ``ZX = w XZ``."""
    if d < 2:
        raise ArgumentError(f"dimension must be >= 2, got {d}")
    omega = np.exp(2j * np.pi / d)
    z = np.diag(omega ** np.arange(d))
    x = np.zeros((d, d), dtype=np.complex128)
    for j in range(d):
        x[(j + 1) % d, j] = 1.0
    return x, z, complex(omega)


def weyl_power(d: int, k: int, l: int) -> np.ndarray:
    """The product ``X^k Z^l`` for one d-dimensional system."""
    x, z, _ = weyl_operators(d)
    return np.linalg.matrix_power(x, k % d) @ np.linalg.matrix_power(z, l % d)


def phi_plus_vector(d: int) -> np.ndarray:
    if d < 2:
        raise ArgumentError(f"dimension must be >= 2, got {d}")
    vec = np.zeros(d * d, dtype=np.complex128)
    for j in range(d):
        vec[j * d + j] = 1.0
    return vec / math.sqrt(d)


def phi_plus_state(d: int) -> PureState:
    return PureState(phi_plus_vector(d), SystemShape((d, d)))


def phi_plus_projector(d: int) -> LabeledOperator:
    v = phi_plus_vector(d)
    return LabeledOperator(np.outer(v, v.conj()), SystemShape((d, d)), hermitian=True)


def correcting_unitary(m: int, d: int) -> np.ndarray:
    """Weyl operator ``X^k Z^l`` attached to outcome ``m = k*d + l``."""
    if not 0 <= m < d * d:
        raise ArgumentError(f"outcome index {m} out of range for d={d}")
    k, l = divmod(m, d)
    return weyl_power(d, k, l)


def teleport_correction(m: int, d: int) -> np.ndarray:
    """Unitary undoing the teleportation byproduct of outcome ``m``.

    Matches the :func:`aligned_bsm` labeling; for qubits it coincides with
    :func:`correcting_unitary`.
    """
    if not 0 <= m < d * d:
        raise ArgumentError(f"outcome index {m} out of range for d={d}")
    k, l = divmod(m, d)
    return weyl_power(d, (d - k) % d, l)


def bell_basis(d: int) -> list[PureState]:
    """Orthonormal maximally entangled basis ``(X^k Z^l (x) 1)|phi+>``."""
    phi = phi_plus_vector(d)
    shape = SystemShape((d, d))
    out = []
    for m in range(d * d):
        u = correcting_unitary(m, d)
        out.append(PureState(np.kron(u, np.eye(d)) @ phi, shape))
    return out


def _projective_povm(vectors: Sequence[np.ndarray], shape: SystemShape) -> Povm:
    effects = tuple(
        LabeledOperator(np.outer(v, v.conj()), shape, hermitian=True) for v in vectors
    )
    return Povm(effects, tuple(range(len(vectors))), shape)


def bsm(d: int) -> Povm:
    """Rank-one projective measurement onto :func:`bell_basis`, ordered by m."""
    shape = SystemShape((d, d))
    return _projective_povm([s.amplitudes for s in bell_basis(d)], shape)


def _depolarize(povm: Povm, eta: float) -> Povm:
    if not 0.0 <= eta <= 1.0:
        raise ArgumentError(f"visibility must lie in [0, 1], got {eta}")
    if eta == 1.0:
        return povm
    n = povm.n_outcomes
    dim = povm.dim
    mix = (1.0 - eta) * np.eye(dim) / n
    effects = tuple(
        LabeledOperator(eta * eff.matrix + mix, povm.shape, hermitian=True)
        for eff in povm.effects
    )
    return Povm(effects, povm.outcome_labels, povm.shape)


def noisy_bsm(d: int, eta: float) -> Povm:
    """Visibility-``eta`` mixture of the ideal Bell projectors with ``1/d^2``."""
    return _depolarize(bsm(d), eta)


def aligned_bsm(d: int, input_axis: int = 0, eta: float = 1.0) -> Povm:
    """Bell measurement labeled for byproduct correction by ``X^k Z^l``.

    ``input_axis`` names the tensor factor holding the trusted input (0 for a
    measurement on input (x) share, 1 for share (x) input).  Outcome
    ``m = k*d + l`` projects onto the Bell vector carrying ``X^{-k} Z^{l}``
    on that factor, which is what makes every correction condition in the
    certification modules hold exactly in the ideal setup for all ``d``.
    """
    if input_axis not in (0, 1):
        raise ArgumentError("input_axis must be 0 or 1")
    phi = phi_plus_vector(d)
    shape = SystemShape((d, d))
    vectors = []
    for m in range(d * d):
        w = teleport_correction(m, d)
        full = np.kron(w, np.eye(d)) if input_axis == 0 else np.kron(np.eye(d), w)
        vectors.append(full @ phi)
    return _depolarize(_projective_povm(vectors, shape), eta)


# ---------------------------------------------------------------------------
# Input ensembles
# ---------------------------------------------------------------------------


def _state(vec: Sequence[complex], d: int) -> PureState:
    v = np.asarray(vec, dtype=np.complex128)
    return PureState(v / np.linalg.norm(v), SystemShape((d,)))


def standard_complete_set(d: int) -> InputEnsemble:
    """The d^2 states ``{|j>} + {(|j>+|k>)/sqrt2} + {(|j>+i|k>)/sqrt2}``."""
    if d < 2:
        raise ArgumentError(f"dimension must be >= 2, got {d}")
    states: list[PureState] = []
    labels: list[str] = []
    eye = np.eye(d)
    for j in range(d):
        states.append(_state(eye[j], d))
        labels.append(f"e{j}")
    for j in range(d):
        for k in range(j + 1, d):
            states.append(_state(eye[j] + eye[k], d))
            labels.append(f"p{j}{k}")
    for j in range(d):
        for k in range(j + 1, d):
            states.append(_state(eye[j] + 1j * eye[k], d))
            labels.append(f"q{j}{k}")
    return InputEnsemble(tuple(states), tuple(labels))


def pauli_ensemble() -> InputEnsemble:
    """The six qubit Pauli eigenstates."""
    s = math.sqrt(0.5)
    data = {
        "z+": [1, 0],
        "z-": [0, 1],
        "x+": [s, s],
        "x-": [s, -s],
        "y+": [s, 1j * s],
        "y-": [s, -1j * s],
    }
    return InputEnsemble(tuple(_state(v, 2) for v in data.values()), tuple(data.keys()))


def qc_input_ensemble() -> InputEnsemble:
    """Inputs for the quantum-classical scenario: ``|0>, |1>, |+>, |->``."""
    s = math.sqrt(0.5)
    states = [[1, 0], [0, 1], [s, s], [s, -s]]
    return InputEnsemble(
        tuple(_state(v, 2) for v in states), ("psi0", "psi0bar", "psi1", "psi1bar")
    )


def chsh_input_ensemble() -> InputEnsemble:
    """Inputs for the CHSH-with-quantum-inputs scenario: ``|0>, |+>``."""
    s = math.sqrt(0.5)
    return InputEnsemble((_state([1, 0], 2), _state([s, s], 2)), ("psi0", "psi1"))


def qutrit_case_ensemble(case: int) -> InputEnsemble:
    """The two qutrit teleportation input sets used in the bound sweeps.

    Case 1 holds four states, case 2 adds two more; neither set is
    tomographically complete.
    """
    w = np.exp(2j * np.pi / 3)
    base = [
        ([1, 0, 0], "e0"),
        ([0, 1, 0], "e1"),
        ([1, 1, 1], "u"),
        ([1, w, w.conjugate()], "v"),
    ]
    extra = [
        ([1, 1, w], "s"),
        ([w, 1, 1], "t"),
    ]
    if case == 1:
        chosen = base
    elif case == 2:
        chosen = base + extra
    else:
        raise ArgumentError("case must be 1 or 2")
    return InputEnsemble(
        tuple(_state(v, 3) for v, _ in chosen), tuple(lbl for _, lbl in chosen)
    )


class CompletenessReport(NamedTuple):
    complete: bool
    rank: int
    deficit: int


def is_tomographically_complete(ensemble: InputEnsemble, tol: float = 1e-10) -> CompletenessReport:
    """Check whether the state projectors span the full operator space.

    The stacked vectorized projectors must have rank ``d^2``.
    """
    d = ensemble.d
    rows = np.stack([p.reshape(-1) for p in ensemble.projectors()])
    sv = np.linalg.svd(rows, compute_uv=False)
    rank = int(np.sum(sv > tol * sv[0]))
    return CompletenessReport(rank == d * d, rank, d * d - rank)


# ---------------------------------------------------------------------------
# Named states
# ---------------------------------------------------------------------------


def isotropic_state(d: int, p: float) -> DensityMatrix:
    """``p |phi+><phi+| + (1-p) 1/d^2``; its maximally entangled fraction is
    ``p + (1-p)/d^2``."""
    if not 0.0 <= p <= 1.0:
        raise ArgumentError(f"mixing parameter must lie in [0, 1], got {p}")
    m = p * phi_plus_projector(d).matrix + (1.0 - p) * np.eye(d * d) / (d * d)
    return density_matrix(m, (d, d))


def ghz_state(n: int, d: int = 2) -> PureState:
    if n < 2:
        raise ArgumentError("GHZ state needs at least 2 parties")
    vec = np.zeros(d**n, dtype=np.complex128)
    for j in range(d):
        vec[sum(j * d**a for a in range(n))] = 1.0
    return PureState(vec / math.sqrt(d), SystemShape(tuple([d] * n)))


def chsh_reference_state() -> PureState:
    """Maximally entangled two-qubit state reaching the CHSH value ``2*sqrt2``
    with the plain outcome grouping of :func:`qcert.selftest.chsh_observables`.

    Equals ``cos(pi/8)|psi_01> + sin(pi/8)|psi_10>`` in the Bell basis,
    i.e. a ``pi/8`` rotation applied to one half of ``|phi+>``.
    """
    basis = bell_basis(2)
    vec = math.cos(math.pi / 8) * basis[1].amplitudes + math.sin(math.pi / 8) * basis[2].amplitudes
    return PureState(vec, SystemShape((2, 2)))


# ---------------------------------------------------------------------------
# Purification-based pure-state equivalent
# ---------------------------------------------------------------------------


def pure_equivalent(rho: DensityMatrix, bob_povm: Povm) -> tuple[PureState, Povm]:
    """Replace a mixed shared state by a pure one preserving all statistics.

    The purifying register is absorbed into the second party: the returned
    pure state lives on ``A (x) B`` with the original local dimensions, and
    the returned measurement replaces ``bob_povm`` (acting on ``B (x) B'``)
    so that every joint probability with any first-party measurement and any
    trusted inputs is unchanged.  Requires ``d_A <= d_B``; swap the roles of
    the parties otherwise.
    """
    da, db = rho.shape.dims
    if len(rho.shape.dims) != 2:
        raise ArgumentError("shared state must be bipartite")
    if bob_povm.shape.dims[0] != db:
        raise ArgumentError("bob_povm must act on B (x) B' with matching d_B")
    if da > db:
        raise ArgumentError("construction assumes d_A <= d_B; swap the party roles")
    dbp = bob_povm.shape.dims[1]

    evals, evecs = np.linalg.eigh(rho.matrix)
    keep = evals > 1e-15
    evals = evals[keep]
    evecs = evecs[:, keep]
    dp = evals.shape[0]
    # Purification |phi~> on A (x) B (x) P with P spanned by the eigenvectors.
    amp = np.zeros((da * db, dp), dtype=np.complex128)
    for i in range(dp):
        amp[:, i] = math.sqrt(evals[i]) * evecs[:, i]
    psi = amp.reshape(da, db * dp)

    # Schmidt split across A | (B P); rows of vh beyond the rank give an
    # orthonormal completion, which extends the partial isometry to a full
    # co-isometry V: H_B (x) H_P -> H_B with V V^dag = 1.
    _, _, vh = np.linalg.svd(psi, full_matrices=True)
    # Rows of V are the conjugated Schmidt vectors <b_i| (plus an orthonormal
    # completion), so V maps |b_i> to |i> on the second party.
    v = vh[:db, :].conj()

    out_vec = (psi @ v.T).reshape(-1)
    out_vec = out_vec / np.linalg.norm(out_vec)
    pure = PureState(out_vec, SystemShape((da, db)))

    # Conjugate each effect (on B (x) B') by V, carrying the purifier along:
    # legs (B, B', P) -> (B, P, B') so V acts on the combined (B, P) factor.
    vb = np.kron(v, np.eye(dbp))
    effects = []
    for eff in bob_povm.effects:
        if dp >= 2:
            ext = tensor.kron(eff, tensor.operator(np.eye(dp), (dp,), hermitian=True))
            mat = tensor.permute_subsystems(ext, (0, 2, 1)).matrix
        else:
            # One-dimensional purifier: nothing to carry along.
            mat = eff.matrix
        effects.append(
            LabeledOperator(vb @ mat @ vb.conj().T, bob_povm.shape, hermitian=True)
        )
    new_povm = Povm(tuple(effects), bob_povm.outcome_labels, bob_povm.shape)
    return pure, new_povm


# ---------------------------------------------------------------------------
# Naimark dilation
# ---------------------------------------------------------------------------


class NaimarkDilation(NamedTuple):
    projective: Povm
    isometry: np.ndarray  # maps the original space into the extended space


def naimark_dilate(povm: Povm) -> NaimarkDilation:
    """Projective measurement on an extended space reproducing the POVM.

    Projective inputs are returned unchanged with an identity embedding.
    Rank-one POVMs get the minimal construction (extended dimension = number
    of outcomes, rank-one projectors); everything else uses the square-root
    construction with an ancilla of one dimension per outcome.
    """
    dim = povm.dim
    if povm.is_projective():
        return NaimarkDilation(povm, np.eye(dim))

    n = povm.n_outcomes
    ranks = []
    vectors = []
    for eff in povm.effects:
        evals, evecs = np.linalg.eigh(eff.matrix)
        big = np.nonzero(evals > 1e-12)[0]
        ranks.append(len(big))
        if len(big) == 1:
            idx = int(big[0])
            vectors.append(math.sqrt(evals[idx]) * evecs[:, idx])

    if all(r == 1 for r in ranks):
        # Rows <v_k| stack into an n x d matrix with orthonormal columns.
        w = np.stack([v.conj() for v in vectors])
        shape = SystemShape((n,))
        effects = tuple(
            LabeledOperator(np.outer(np.eye(n)[k], np.eye(n)[k]), shape, hermitian=True)
            for k in range(n)
        )
        return NaimarkDilation(Povm(effects, povm.outcome_labels, shape), w)

    # Square-root construction on system (x) ancilla.
    w = np.zeros((dim * n, dim), dtype=np.complex128)
    for k, eff in enumerate(povm.effects):
        root = tensor.hermitian_sqrt(eff.matrix)
        # Block rows with ancilla index k: extended index (i, k) = i*n + k.
        w[k::n, :] = root
    shape = SystemShape((dim, n))
    eye_d = np.eye(dim)
    effects = []
    for k in range(n):
        anc = np.zeros((n, n))
        anc[k, k] = 1.0
        effects.append(LabeledOperator(np.kron(eye_d, anc), shape, hermitian=True))
    return NaimarkDilation(Povm(tuple(effects), povm.outcome_labels, shape), w)
