"""Exact small-system quantum dynamics for OTOC and MQC checks."""
from .models import (
    FloquetSpec,
    HamiltonianSpec,
    StateVector,
    dipolar_couplings,
    evolve,
    make_evolver,
    random_states,
)
from .otoc import (
    Estimate,
    OTOCDecomposition,
    PhaseProtocolResult,
    app_d_diagnostic,
    decompose_otoc,
    global_otoc,
    global_otoc_series,
    heisenberg_operator,
    heisenberg_series,
    local_otoc,
    local_otoc_profile,
    mixed_phase_reference,
    mqc_commutator_moment,
    mqc_exact,
    offdiag_otoc,
    phase_protocol_pure,
    write_global_otoc_csv,
    write_local_otoc_csv,
)
from .pauli import OperatorSpec, operator_matrix, pauli_sum, spin_signs, total_z

__all__ = [name for name in dir() if not name.startswith("_")]
