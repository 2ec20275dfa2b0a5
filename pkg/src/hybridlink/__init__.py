"""Hybrid DV/CV entanglement swapping: closed forms and a truncated Fock-space oracle."""

from .channels import ChannelSpec, DetectorSpec, homodyne_kernel, homodyne_project, onoff_povm, pure_loss, thermal_loss
from .errors import HybridLinkError, TruncationWarning
from .fock import (
    DensityOperator,
    FockRegister,
    ModeSplit,
    StateVector,
    beamsplitter_unitary,
    coherent_ket,
    displacement_op,
    fock_ket,
    log_negativity,
    overlap,
    partial_trace,
    apply_povm_element,
    tensor,
    tensor_rho,
)
from .keyrate import (
    KeyRateBreakdown,
    NoiseFidelityPoint,
    channel_fidelity,
    channel_fidelity_oracle,
    holevo_bound,
    key_rate,
    max_distance,
    mutual_information,
    optimize_alpha,
)
from .links import distance_to_transmittance, transmittance_to_distance
from .states import (
    GenerationResult,
    HEStateSpec,
    LossyHEState,
    generate_he_pipeline,
    lossy_he_analytic,
    lossy_he_logneg,
    make_he_state,
)
from .swap import (
    AnalyticSwapResult,
    ProtocolParams,
    analytic_final_state,
    effective_logneg,
    oracle_final_state,
    shared_logneg,
    sweep_entanglement,
)

__all__ = [name for name in dir() if not name.startswith("_")]
