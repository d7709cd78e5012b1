"""Certification of quantum states from trusted quantum inputs.

Simulation, reconstruction and certification in scenarios where parties feed
characterised quantum inputs into untrusted joint measurements: two-sided
quantum inputs, quantum-classical hybrids, CHSH from quantum inputs,
teleportation-based fidelity lower bounds via semidefinite programming, and
repeater-chain certification planning.
"""

from .effective import (
    EffectiveSet,
    effective_joint,
    effective_multipartite,
    effective_qc,
    effective_teleport,
    joint_probability_table,
    multipartite_probability_table,
    qc_probability_table,
    reconstruct,
    reconstruct_joint,
    reconstruct_qc,
    reconstruct_teleport,
)
from .errors import (
    ArgumentError,
    CapacityError,
    DataError,
    NumericalConsistencyError,
    QcertError,
    SolverFailureError,
)
from .network import CertificationPlan, ChainSpec, certify_chain, chain_state, plan, swap_once
from .qobjects import (
    DensityMatrix,
    InputEnsemble,
    Povm,
    PureState,
    aligned_bsm,
    bell_basis,
    bsm,
    chsh_input_ensemble,
    chsh_reference_state,
    correcting_unitary,
    density_matrix,
    ghz_state,
    is_tomographically_complete,
    isotropic_state,
    naimark_dilate,
    noisy_bsm,
    pauli_ensemble,
    phi_plus_state,
    phi_plus_vector,
    pure_equivalent,
    qc_input_ensemble,
    qutrit_case_ensemble,
    standard_complete_set,
    teleport_correction,
    weyl_operators,
)
from .sdp import (
    HermitianProgram,
    SDPProblem,
    SDPSolution,
    export_sdpa,
    import_sdpa,
    presolve,
    realify,
    solve,
)
from .selftest import (
    CertReport,
    chsh_observables,
    chsh_quantum_inputs,
    chsh_relabeling_search,
    circuit_output,
    mdi_certify,
    multipartite_certify,
    qc_bell_value,
    qc_certify,
    qc_group_sums,
    swap_output,
)
from .telecert import (
    FidelityBound,
    TeleportationData,
    average_fidelity,
    bell_fidelity_from_average,
    build_sdp,
    fidelity_lower_bound,
    hermitian_fidelity_program,
    sweep_isotropic_bounds,
    teleport,
    teleport_output,
)
from .tensor import (
    LabeledOperator,
    SystemShape,
    kron,
    partial_trace,
    partial_transpose,
    psd_check,
    pure_fidelity,
)

__version__ = "0.1.0"
