"""Time stepping for the Galerkin system.

Two schemes are provided:

* ``imex_em_ito`` (default): Euler-Maruyama on the Ito form with the
  diagonal linear part ``b1 Lap - b2 Lap^2`` treated implicitly. The stiff
  biharmonic symbol is damped unconditionally; all nonlinear terms, the Ito
  correction and the noise are explicit at the beginning-of-step state.
* ``heun_strat``: explicit Stratonovich Heun (predictor-corrector on drift
  and diffusion, no Ito correction), intended as a cross-check on mildly
  stiff grids.

A trajectory stops at ``t_end``, on the first step whose H^1 norm exceeds
``blowup_K`` (the discrete stopping time), or on a nonfinite state.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import lru_cache

import numpy as np

from .grid import (
    Grid,
    SpectralField,
    analyze,
    cross3,
    eigenvalue_array,
    lp_norm,
    sobolev_norm,
    synthesize,
)
from .model import ModelParams, TruncationConfig, theta_R
from .noise import (
    NoiseModel,
    WienerIncrement,
    _correction_coeffs,
    _diffusion_coeffs,
    coupled_increments,
)


class ConfigurationError(ValueError):
    """A solver configuration cannot be run as requested."""


DENOMINATOR_FLOOR = 1e-8

STOP_COMPLETED = "completed"
STOP_BLOWUP = "blowup_K"
STOP_NONFINITE = "nonfinite"
STOP_DENOMINATOR = "denominator"  # schema value; surfaced pre-run as an error


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    t_end: float
    scheme: str = "imex_em_ito"
    blowup_K: float = np.inf
    record_every: int = 1
    seed: int = 0
    truncation: TruncationConfig = TruncationConfig.off()
    substeps: int = 1
    snapshot_every: int | None = None

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigurationError("dt must be positive")
        if self.t_end <= 0 or self.dt >= self.t_end:
            raise ConfigurationError("t_end must exceed dt")
        if self.scheme not in ("imex_em_ito", "heun_strat"):
            raise ConfigurationError(f"unknown scheme {self.scheme!r}")
        if self.blowup_K <= 0:
            raise ConfigurationError("blowup_K must be positive")
        if self.record_every < 1:
            raise ConfigurationError("record_every must be >= 1")
        if self.substeps < 1:
            raise ConfigurationError("substeps must be >= 1")
        if self.snapshot_every is not None and self.snapshot_every < 1:
            raise ConfigurationError("snapshot_every must be >= 1")


@dataclass
class SolverState:
    t: float
    u: SpectralField
    step: int


NORM_KEYS = ("l2", "l4", "h1", "h2", "h3", "grad_l2", "theta_arg")


@dataclass
class TrajectoryRecord:
    """Sampled norms, stop event and optional coefficient snapshots."""

    grid: Grid
    times: np.ndarray
    norms: dict[str, np.ndarray]
    stop_reason: str
    stop_time: float
    final: SpectralField
    config: SolverConfig
    path: int
    J: int
    obs: dict[str, np.ndarray] = dc_field(default_factory=dict)
    snapshot_steps: np.ndarray | None = None
    snapshots: np.ndarray | None = None

    @property
    def t_final(self) -> float:
        return float(self.times[-1])


def linear_factor(lam: float, dt: float, params: ModelParams) -> float:
    """Implicit per-mode divisor ``1 + dt (b1 lam + b2 lam^2)``."""
    if dt <= 0:
        raise ConfigurationError("dt must be positive")
    factor = 1.0 + dt * (params.beta1 * lam + params.beta2 * lam * lam)
    if factor <= DENOMINATOR_FLOOR:
        raise ConfigurationError(
            f"denominator: implicit factor {factor:.3e} at lambda={lam:.6g} "
            f"(reduce dt or adjust beta1)"
        )
    return factor


@lru_cache(maxsize=None)
def _divisor_array(grid: Grid, dt: float, params: ModelParams) -> np.ndarray:
    lam = eigenvalue_array(grid)
    div = 1.0 + dt * (params.beta1 * lam + params.beta2 * lam * lam)
    if div.min() <= DENOMINATOR_FLOOR:
        bad = float(lam.ravel()[int(np.argmin(div))])
        raise ConfigurationError(
            f"denominator: implicit factor {div.min():.3e} at lambda={bad:.6g}"
        )
    div.setflags(write=False)
    return div


def _explicit_parts(coeffs: np.ndarray, grid: Grid, params: ModelParams,
                    noise: NoiseModel, trunc: TruncationConfig,
                    include_correction: bool):
    """Explicitly treated drift and the diffusion fields, sharing transforms.

    Returns ``(drift_coeffs, [G_j coeffs])`` where the drift holds the
    penalty, precession and nonlocal terms plus (optionally) the Ito
    correction; the linear part is not included.
    """
    lam = eigenvalue_array(grid)
    vals = synthesize(grid, coeffs)
    mag2 = (vals * vals).sum(axis=0)
    cubic = analyze(grid, vals * mag2)
    lap_vals = synthesize(grid, -lam * coeffs)
    prec = analyze(grid, cross3(vals, lap_vals))

    scale5 = params.beta5
    if trunc.mode == "on":
        grad = float(np.sqrt((lam * (coeffs * coeffs).sum(axis=0)).sum()))
        scale5 = params.beta5 * theta_R(grad, trunc.radius)

    drift = (
        params.beta3 * (coeffs - cubic)
        - params.beta4 * prec
        + scale5 * (-lam) * cubic
    )
    Gs = [_diffusion_coeffs(grid, vals, noise, j) for j in range(noise.J)]
    if include_correction and noise.J > 0:
        drift = drift + _correction_coeffs(grid, vals, noise)
    return drift, Gs


def imex_em_step(state: SolverState, params: ModelParams, noise: NoiseModel,
                 trunc: TruncationConfig, increments: WienerIncrement,
                 dt: float) -> SolverState:
    """One semi-implicit Euler-Maruyama step on the Ito form."""
    grid = state.u.grid
    div = _divisor_array(grid, dt, params)
    drift, Gs = _explicit_parts(state.u.coeffs, grid, params, noise, trunc,
                                include_correction=True)
    acc = state.u.coeffs + dt * drift
    for j, G in enumerate(Gs):
        acc = acc + G * increments.values[j]
    return SolverState(state.t + dt, SpectralField(grid, acc / div), state.step + 1)


def _strat_rhs(coeffs: np.ndarray, grid: Grid, params: ModelParams,
               noise: NoiseModel, trunc: TruncationConfig):
    lam = eigenvalue_array(grid)
    drift, Gs = _explicit_parts(coeffs, grid, params, noise, trunc,
                                include_correction=False)
    drift = drift + (-params.beta1 * lam - params.beta2 * lam * lam) * coeffs
    return drift, Gs


def heun_strat_step(state: SolverState, params: ModelParams, noise: NoiseModel,
                    trunc: TruncationConfig, increments: WienerIncrement,
                    dt: float) -> SolverState:
    """One explicit Stratonovich Heun step (predictor-corrector)."""
    grid = state.u.grid
    c0 = state.u.coeffs
    a0, G0 = _strat_rhs(c0, grid, params, noise, trunc)
    pred = c0 + dt * a0
    for j, G in enumerate(G0):
        pred = pred + G * increments.values[j]
    a1, G1 = _strat_rhs(pred, grid, params, noise, trunc)
    out = c0 + 0.5 * dt * (a0 + a1)
    for j in range(noise.J):
        out = out + 0.5 * (G0[j] + G1[j]) * increments.values[j]
    return SolverState(state.t + dt, SpectralField(grid, out), state.step + 1)


def _sample_norms(u: SpectralField) -> tuple[float, ...]:
    grad = sobolev_norm(u, 1, seminorm=True)
    return (
        sobolev_norm(u, 0),
        lp_norm(u, 4),
        sobolev_norm(u, 1),
        sobolev_norm(u, 2),
        sobolev_norm(u, 3),
        grad,
        grad,  # theta argument: same quantity the truncation reads
    )


def run_trajectory(u0: SpectralField, params: ModelParams, noise: NoiseModel,
                   config: SolverConfig, path: int = 0,
                   observables=()) -> TrajectoryRecord:
    """Step from u0 to t_end (or an earlier stop), recording sampled norms.

    Blow-up is monitored every step against the H^1 norm; the recorded stop
    time is the first step time at which the threshold is exceeded.
    Configuration problems (implicit denominator too small) surface before
    any stepping. Identical inputs give bitwise-identical records.
    """
    grid = u0.grid
    if noise.grid != grid:
        raise ConfigurationError("noise model grid does not match initial data")
    if config.scheme == "imex_em_ito":
        _divisor_array(grid, config.dt, params)  # denominator guard, pre-run
        stepper = imex_em_step
    else:
        stepper = heun_strat_step

    n_steps = int(round(config.t_end / config.dt))
    dt = config.dt

    times: list[float] = []
    norm_rows: list[tuple[float, ...]] = []
    obs_rows: list[list[float]] = []
    snap_steps: list[int] = []
    snaps: list[np.ndarray] = []

    state = SolverState(0.0, u0.copy(), 0)
    stop_reason = STOP_COMPLETED
    stop_time = n_steps * dt

    def record(st: SolverState):
        times.append(st.t)
        norm_rows.append(_sample_norms(st.u))
        if observables:
            obs_rows.append([float(psi(st.u)) for psi in observables])

    def snapshot(st: SolverState):
        if config.snapshot_every is not None and st.step % config.snapshot_every == 0:
            snap_steps.append(st.step)
            snaps.append(st.u.coeffs.copy())

    record(state)
    snapshot(state)

    if sobolev_norm(state.u, 1) > config.blowup_K:
        stop_reason = STOP_BLOWUP
        stop_time = 0.0
        n_steps = 0

    m = 0
    while m < n_steps:
        inc = coupled_increments(config.seed, path, m, noise.J, dt, config.substeps)
        state = stepper(state, params, noise, config.truncation, inc, dt)
        m += 1
        state.t = m * dt  # avoid accumulated rounding in recorded times

        if not np.isfinite(state.u.coeffs).all():
            stop_reason = STOP_NONFINITE
            stop_time = state.t
            record(state)
            snapshot(state)
            break

        recorded = False
        if m % config.record_every == 0 or m == n_steps:
            record(state)
            recorded = True
        snapshot(state)

        if sobolev_norm(state.u, 1) > config.blowup_K:
            stop_reason = STOP_BLOWUP
            stop_time = state.t
            if not recorded:
                record(state)
            break

    norms_arr = np.asarray(norm_rows)
    norms = {key: norms_arr[:, i].copy() for i, key in enumerate(NORM_KEYS)}
    obs = {}
    if observables:
        obs_arr = np.asarray(obs_rows)
        obs = {psi.name: obs_arr[:, i].copy() for i, psi in enumerate(observables)}
    return TrajectoryRecord(
        grid=grid,
        times=np.asarray(times),
        norms=norms,
        stop_reason=stop_reason,
        stop_time=float(stop_time),
        final=state.u,
        config=config,
        path=path,
        J=noise.J,
        obs=obs,
        snapshot_steps=np.asarray(snap_steps) if snaps else None,
        snapshots=np.asarray(snaps) if snaps else None,
    )
