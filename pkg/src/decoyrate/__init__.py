"""Certified asymptotic key-rate bounds for decoy-state BB84 with
intensity-correlated phase-randomized weak-coherent-pulse sources."""

from .channel import CanonicalReferences, Observables, canonical_references, fock_detection, observables
from .cs_band import CsBand, DomainError, TangentPair, band, band_derivatives, g_minus, g_plus, tangent_relaxation
from .model import (
    BasisConfig,
    ChannelParams,
    CoarseGrained,
    GaussianWindow,
    HistoryPattern,
    IntensitySet,
    IntensitySetting,
    ModelConfig,
    ProtocolParams,
    TruncatedGaussian,
    ValidationResult,
    enumerate_histories,
    validate,
)
from .photon_stats import (
    BoundsRow,
    IntegrationNotConverged,
    PhotonBounds,
    TauTable,
    coarse_bounds,
    coarse_photon_bounds,
    coarse_tau,
    coarse_tau_table,
    general_tau,
    trunc_gauss_photon_bounds,
    trunc_gauss_pn,
    trunc_gauss_tau_table,
)
from .pipeline import (
    KeyRatePoint,
    SweepConfig,
    binary_entropy,
    coarse_scenario,
    evaluate_distance,
    key_rate,
    run_sweep,
    standard_key_rate,
)
from .programs import (
    ConfigMismatch,
    CsConstraint,
    EstimationProgram,
    LinearConstraint,
    MissingHistory,
    Problem,
    VariableIndex,
    VarKind,
    build_coarse,
    build_fine,
    build_standard_lp,
)
from .solver import (
    CandidateSolution,
    CertificationError,
    CertifiedBound,
    LpSolution,
    NoFeasibleCandidate,
    SlpOptions,
    TooManyVariables,
    certify,
    cs_residual,
    dump_program,
    grid_oracle,
    restore_feasibility,
    slp_candidate,
    solve_lp,
)

__version__ = "0.1.0"
