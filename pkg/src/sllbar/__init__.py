"""Spectral Galerkin simulator for the stochastic Landau-Lifshitz-Baryakhtar
equation with Stratonovich transport noise on Neumann boxes."""

__version__ = "0.1.0"

from .grid import (
    Basis,
    Grid,
    GridMismatchError,
    PhysField,
    SpectralField,
    apply_laplacian,
    constant_field,
    eigenmode_field,
    embed,
    l2_inner,
    lp_norm,
    neumann_eigenpairs,
    project,
    random_field,
    sobolev_norm,
    spectral_gradient,
    to_physical,
    to_spectral,
    transform,
    zero_field,
)
from .model import (
    ModelParams,
    TruncationConfig,
    cubic_field,
    drift_terms,
    ito_drift,
    nonlocal_cubic,
    precession,
    stratonovich_drift,
    theta_R,
)
from .noise import (
    NoiseModel,
    NoiseTailWarning,
    WienerIncrement,
    build_noise_modes,
    check_noise_condition,
    coefficient_from_physical,
    coupled_increments,
    diffusion_apply,
    ito_correction,
    sample_increments,
)
from .integrator import (
    ConfigurationError,
    SolverConfig,
    SolverState,
    TrajectoryRecord,
    heun_strat_step,
    imex_em_step,
    linear_factor,
    run_trajectory,
)
from .diagnostics import (
    ResidualSeries,
    energy_balance_l2,
    identity_cross,
    identity_cubic_gradient,
    identity_cubic_ibp,
    refinement_gap,
    states_from_trajectory,
    stopping_time,
    weak_form_residual,
)
from .ensemble import (
    EnsembleStats,
    Observable,
    h2_time_average,
    invariant_average,
    moment_estimates,
    run_ensemble,
    tightness_statistic,
)
from .config import ConfigError, ExperimentConfig, RunConfig, build_initial, parse_config
