"""Linear repeater chains: entanglement swapping, end-to-end states, and the
per-link certification plan.

Swapping is deterministic: every middle-measurement outcome is kept and the
byproduct is undone on the last register, so the end-to-end state is the
outcome average of the corrected branches (no post-selection, no sampling).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .qobjects import (
    DensityMatrix,
    InputEnsemble,
    Povm,
    aligned_bsm,
    correcting_unitary,
    density_matrix,
    noisy_bsm,
)
from .telecert import FidelityBound, fidelity_lower_bound, teleport

METHOD_QC = "quantum-classical"
METHOD_STEERING = "steering"
METHOD_DI = "standard-DI"
METHOD_MDI = "MDI"
METHOD_TELEPORT_SDP = "teleportation-sdp"


@dataclass(frozen=True)
class ChainSpec:
    """A linear chain of bipartite sources joined by middle-node measurements."""

    sources: tuple[DensityMatrix, ...]
    bsm_visibilities: tuple[float, ...]
    first_node_trusted_inputs: bool = True
    last_node_trusted: bool = True

    def __post_init__(self) -> None:
        sources = tuple(self.sources)
        vis = tuple(float(v) for v in self.bsm_visibilities)
        object.__setattr__(self, "sources", sources)
        object.__setattr__(self, "bsm_visibilities", vis)
        if not sources:
            raise ArgumentError("a chain needs at least one source")
        d = sources[0].shape.dims[0]
        for s in sources:
            if s.shape.dims != (d, d):
                raise ArgumentError("all sources must emit pairs of one local dimension")
        if len(vis) != len(sources) - 1:
            raise ArgumentError("need one measurement visibility per intermediate node")
        if any(not 0.0 <= v <= 1.0 for v in vis):
            raise ArgumentError("visibilities must lie in [0, 1]")

    @property
    def n_sources(self) -> int:
        return len(self.sources)

    @property
    def d(self) -> int:
        return self.sources[0].shape.dims[0]


@dataclass(frozen=True)
class CertificationPlan:
    per_source: tuple[str, ...]
    end_to_end: str | None


def swap_once(rho_ab: DensityMatrix, rho_cd: DensityMatrix, bsm_povm: Povm) -> DensityMatrix:
    """Swap entanglement through a joint measurement on the two middle registers.

    Each outcome's post-measurement state is corrected by the matching Weyl
    operator on the last register and the branches are averaged.
    """
    da, db = rho_ab.shape.dims
    dc, dd = rho_cd.shape.dims
    if bsm_povm.shape.dims != (db, dc):
        raise ArgumentError("measurement must act on the two middle registers")
    d = db
    if bsm_povm.n_outcomes != d * d:
        raise ArgumentError("swapping expects a d^2-outcome middle measurement")
    r1 = rho_ab.matrix.reshape(da, db, da, db)
    r2 = rho_cd.matrix.reshape(dc, dd, dc, dd)
    out = np.zeros((da * dd, da * dd), dtype=np.complex128)
    for m_idx, eff in enumerate(bsm_povm.effects):
        em = eff.matrix.reshape(db, dc, db, dc)
        # rows (a, e), cols (x, y) of the post-measurement end-to-end operator
        sigma = np.einsum("bcuv,auxb,vecy->aexy", em, r1, r2, optimize=True)
        sig = sigma.reshape(da * dd, da * dd)
        u = np.kron(np.eye(da), correcting_unitary(m_idx, d))
        out += u @ sig @ u.conj().T
    out = 0.5 * (out + out.conj().T)
    return density_matrix(out, (da, dd))


def chain_state(spec: ChainSpec) -> DensityMatrix:
    """Left fold of :func:`swap_once` across the chain's sources."""
    state = spec.sources[0]
    for i in range(1, spec.n_sources):
        povm = noisy_bsm(spec.d, spec.bsm_visibilities[i - 1])
        state = swap_once(state, spec.sources[i], povm)
    return state


def plan(spec: ChainSpec) -> CertificationPlan:
    """Assign a certification method to every source and to the whole chain.

    The first source can be checked with quantum-classical inputs, the last
    with a steering-based protocol, everything in between with standard
    device-independent self-tests; steering and standard-DI are plan labels
    only and are never executed here.  With trusted ends on both sides the
    whole chain gets the teleportation SDP bound; a single-source chain with
    both ends trusted is the plain two-sided quantum-input scenario.
    """
    both_ends = spec.first_node_trusted_inputs and spec.last_node_trusted
    if spec.n_sources == 1:
        labels = (METHOD_MDI,) if both_ends else (METHOD_QC,)
    else:
        labels = (
            (METHOD_QC,)
            + tuple(METHOD_DI for _ in range(spec.n_sources - 2))
            + (METHOD_STEERING,)
        )
    end_to_end = METHOD_TELEPORT_SDP if both_ends else None
    return CertificationPlan(labels, end_to_end)


def certify_chain(
    spec: ChainSpec, ensemble: InputEnsemble, tol: float = 1e-8
) -> FidelityBound:
    """End-to-end fidelity bound: teleport through the chain state and solve
    the resulting SDP."""
    state = chain_state(spec)
    data = teleport(state, aligned_bsm(spec.d, input_axis=0), ensemble)
    return fidelity_lower_bound(data, tol=tol)
