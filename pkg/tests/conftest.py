"""Shared fixtures and random-object helpers for the test suite."""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qcert import tensor
from qcert.qobjects import DensityMatrix, InputEnsemble, Povm, PureState, density_matrix
from qcert.tensor import LabeledOperator, SystemShape


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)


def random_hermitian(rng: np.random.Generator, n: int) -> np.ndarray:
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (g + g.conj().T)


def random_density(rng: np.random.Generator, dims: tuple[int, ...]) -> DensityMatrix:
    n = int(np.prod(dims))
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    m = g @ g.conj().T
    return density_matrix(m / np.trace(m).real, dims)


def random_pure(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_projective_povm(rng: np.random.Generator, dims: tuple[int, ...]) -> Povm:
    """Rank-one projective measurement in a Haar-random basis."""
    n = int(np.prod(dims))
    u = random_unitary(rng, n)
    shape = SystemShape(dims)
    effects = tuple(
        LabeledOperator(np.outer(u[:, k], u[:, k].conj()), shape, hermitian=True)
        for k in range(n)
    )
    return Povm(effects, tuple(range(n)), shape)


def random_povm(rng: np.random.Generator, dims: tuple[int, ...], n_outcomes: int) -> Povm:
    """General (typically full-rank) random measurement."""
    n = int(np.prod(dims))
    raw = []
    for _ in range(n_outcomes):
        g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        raw.append(g @ g.conj().T)
    total = sum(raw)
    evals, vecs = np.linalg.eigh(total)
    inv_root = (vecs / np.sqrt(evals)) @ vecs.conj().T
    shape = SystemShape(dims)
    effects = tuple(
        LabeledOperator(inv_root @ r @ inv_root, shape, hermitian=True) for r in raw
    )
    return Povm(effects, tuple(range(n_outcomes)), shape)


def random_complete_ensemble(rng: np.random.Generator, d: int, extra: int = 2) -> InputEnsemble:
    from qcert.qobjects import is_tomographically_complete

    while True:
        states = tuple(
            PureState(random_pure(rng, d), SystemShape((d,))) for _ in range(d * d + extra)
        )
        ens = InputEnsemble(states, tuple(f"s{i}" for i in range(len(states))))
        if is_tomographically_complete(ens).complete:
            return ens


def maxdev(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
