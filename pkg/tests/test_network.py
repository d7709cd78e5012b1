"""Repeater chains: swapping, folding, planning, end-to-end bounds."""

from __future__ import annotations

import numpy as np
import pytest

from conftest import maxdev, random_density

from qcert import tensor
from qcert.errors import ArgumentError
from qcert.network import (
    METHOD_DI,
    METHOD_MDI,
    METHOD_QC,
    METHOD_STEERING,
    METHOD_TELEPORT_SDP,
    CertificationPlan,
    ChainSpec,
    certify_chain,
    chain_state,
    plan,
    swap_once,
)
from qcert.qobjects import (
    bsm,
    density_matrix,
    isotropic_state,
    noisy_bsm,
    pauli_ensemble,
    phi_plus_projector,
    phi_plus_state,
    phi_plus_vector,
    standard_complete_set,
)


def phi_dm(d=2):
    return density_matrix(phi_plus_projector(d).matrix, (d, d))


def make_chain(states, visibilities=None, first=True, last=True):
    vis = visibilities if visibilities is not None else [1.0] * (len(states) - 1)
    return ChainSpec(tuple(states), tuple(vis), first, last)


# ---------------------------------------------------------------------------
# One swap
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("d", [2, 3])
def test_swap_ideal_links(d):
    out = swap_once(phi_dm(d), phi_dm(d), bsm(d))
    assert maxdev(out.matrix, phi_plus_projector(d).matrix) <= 1e-10


@pytest.mark.parametrize("p,q", [(0.8, 0.8), (0.8, 0.9), (0.9, 0.9)])
def test_swap_isotropic_composition(p, q):
    out = swap_once(isotropic_state(2, p), isotropic_state(2, q), bsm(2))
    fid = tensor.pure_fidelity(out.operator, phi_plus_vector(2))
    want = p * q + (1 - p * q) / 4
    assert abs(fid - want) < 1e-10
    assert maxdev(out.matrix, isotropic_state(2, p * q).matrix) < 1e-10


def test_swap_full_noise_absorbs(rng):
    rho = random_density(rng, (2, 2))
    mixed = density_matrix(np.eye(4) / 4, (2, 2))
    out = swap_once(rho, mixed, bsm(2))
    assert maxdev(out.matrix, np.kron(tensor.partial_trace(rho.operator, [0]).matrix, np.eye(2) / 2)) < 1e-10


def test_swap_preserves_trace_and_positivity(rng):
    for _ in range(5):
        r1 = random_density(rng, (2, 2))
        r2 = random_density(rng, (2, 2))
        out = swap_once(r1, r2, noisy_bsm(2, 0.8))
        assert abs(np.trace(out.matrix).real - 1.0) < 1e-9
        assert np.linalg.eigvalsh(out.matrix)[0] > -1e-9


def test_swap_shape_validation():
    with pytest.raises(ArgumentError):
        swap_once(phi_dm(2), phi_dm(3), bsm(2))


# ---------------------------------------------------------------------------
# Chain state
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("n_links", [1, 2, 3, 4])
@pytest.mark.parametrize("d", [2, 3])
def test_chain_all_ideal(n_links, d):
    spec = make_chain([phi_dm(d)] * n_links)
    out = chain_state(spec)
    assert maxdev(out.matrix, phi_plus_projector(d).matrix) <= 1e-10


def test_chain_matches_single_swap():
    spec = make_chain([isotropic_state(2, 0.9)] * 2)
    out = chain_state(spec)
    want = swap_once(isotropic_state(2, 0.9), isotropic_state(2, 0.9), bsm(2))
    assert maxdev(out.matrix, want.matrix) < 1e-12


def test_chain_fidelity_non_increasing_with_length():
    fids = []
    for n in range(1, 5):
        spec = make_chain([isotropic_state(2, 0.9)] * n)
        out = chain_state(spec)
        fids.append(tensor.pure_fidelity(out.operator, phi_plus_vector(2)))
    for f1, f2 in zip(fids, fids[1:]):
        assert f2 <= f1 + 1e-12


def test_chain_spec_validation():
    with pytest.raises(ArgumentError):
        ChainSpec((), ())
    with pytest.raises(ArgumentError):
        make_chain([phi_dm(2), phi_dm(3)])
    with pytest.raises(ArgumentError):
        ChainSpec((phi_dm(2), phi_dm(2)), (1.5,))


# ---------------------------------------------------------------------------
# Plan
# ---------------------------------------------------------------------------


def test_plan_three_sources():
    spec = make_chain([phi_dm(2)] * 3)
    got = plan(spec)
    assert got == CertificationPlan(
        (METHOD_QC, METHOD_DI, METHOD_STEERING), METHOD_TELEPORT_SDP
    )


def test_plan_two_sources():
    got = plan(make_chain([phi_dm(2)] * 2))
    assert got.per_source == (METHOD_QC, METHOD_STEERING)


def test_plan_single_source_both_trusted():
    got = plan(make_chain([phi_dm(2)]))
    assert got.per_source == (METHOD_MDI,)
    assert got.end_to_end == METHOD_TELEPORT_SDP


def test_plan_untrusted_far_end():
    got = plan(make_chain([phi_dm(2)] * 2, last=False))
    assert got.per_source == (METHOD_QC, METHOD_STEERING)
    assert got.end_to_end is None
    single = plan(make_chain([phi_dm(2)], last=False))
    assert single.per_source == (METHOD_QC,)


# ---------------------------------------------------------------------------
# End-to-end bound
# ---------------------------------------------------------------------------


def test_certify_chain_all_ideal():
    spec = make_chain([phi_dm(2)] * 2)
    bound = certify_chain(spec, pauli_ensemble())
    assert bound.status == "optimal"
    assert abs(bound.value - 1.0) < 1e-4


def test_certify_chain_one_lossy_link():
    spec = make_chain([isotropic_state(2, 0.8), phi_dm(2)])
    bound = certify_chain(spec, pauli_ensemble())
    assert abs(bound.value - 0.85) < 1e-4


def test_certify_chain_monotone_in_visibility():
    values = []
    for eta in (1.0, 0.95, 0.9, 0.85, 0.8):
        spec = make_chain([phi_dm(2)] * 2, visibilities=[eta])
        bound = certify_chain(spec, pauli_ensemble())
        values.append(bound.value)
    for v1, v2 in zip(values, values[1:]):
        assert v2 <= v1 + 1e-6


def test_certify_chain_soundness():
    spec = make_chain([isotropic_state(2, 0.9), isotropic_state(2, 0.85)], visibilities=[0.97])
    state = chain_state(spec)
    bound = certify_chain(spec, standard_complete_set(2))
    true_fid = tensor.pure_fidelity(state.operator, phi_plus_vector(2))
    assert bound.value <= true_fid + 1e-4
