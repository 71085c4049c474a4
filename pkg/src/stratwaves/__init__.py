"""Spectral Galerkin solver for strongly stratified Boussinesq flow.

The flow is represented by complex amplitudes along the Craya-Herring
wave-vortex frame on a truncated sum-closed frequency lattice.  Triad
interactions are split exactly into resonant and oscillatory parts by
integer arithmetic, which makes the fast-oscillation limit (a
quasi-geostrophic vortex sector plus linear wave equations) directly
computable and testable.
"""

__version__ = "0.1.0"

from .basis import (
    CrayaHerringFrame,
    DivergenceError,
    FrameSet,
    WaveAmplitudes,
    decompose,
    extended_leray,
    frame,
    helmholtz_decompose,
    reconstruct,
    wave_matrix,
)
from .dynamics import (
    ConvergenceResult,
    NumericsError,
    PlanarField,
    ScalarField,
    SimulationConfig,
    System,
    Trajectory,
    anisotropy_ratio,
    build_context,
    convergence_study,
    diagnostics,
    ell_alpha_p,
    initial_state_from_physical,
    integrate,
    oscillation_dt_bound,
    qg_equiv_check,
    reconstruct_physical,
    theta_from_vortex_state,
    theta_from_w,
    vortex_state_from_theta,
    w_from_theta,
)
from .exact import QuadExt, sqrt_ratio_sum_is_zero
from .experiments import (
    ConfigError,
    ExperimentSpec,
    parse_config,
    random_initial_state,
    random_theta,
    run,
)
from .interaction import (
    AmplitudeState,
    TriadEntry,
    TriadTable,
    apply_bbar,
    apply_bscript,
    apply_btilde,
    build_triad_table,
    rhs_full,
    rhs_limit,
    rhs_remainder,
)
from .lattice import (
    DilationFactors,
    FrequencySet,
    LatticeKind,
    ModeGeometrySquares,
    build_truncated_set,
    dilated_geometry,
    triad_arrays,
    triads,
)
from .resonance import (
    AdmissibilityReport,
    CensusResult,
    ResonanceVerdict,
    SigmaTriple,
    gamma_scan,
    is_resonant_exact,
    omega_sigma,
    resonance_discriminant,
    resonant_fiber_count,
    restricted_convolution_census,
)
