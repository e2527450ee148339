"""Monte Carlo driver and invariant-measure diagnostics.

Paths are driven by path-keyed counter-based increments, so ensembles are
embarrassingly parallel and bitwise reproducible at any worker count.
Aggregation always runs in fixed path order.

The observable catalog is restricted to bounded functionals that are
sequentially weakly continuous in the state: pointwise functions of finitely
many coefficients or of low-order norms. Arbitrary user callables are
excluded to keep runs reproducible.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from .grid import SpectralField, sobolev_norm
from .integrator import (
    STOP_COMPLETED,
    ConfigurationError,
    SolverConfig,
    TrajectoryRecord,
    run_trajectory,
)
from .model import ModelParams
from .noise import NoiseModel

OBSERVABLE_KINDS = ("tanh_mode", "exp_neg_l2", "clip_norm")


@dataclass(frozen=True)
class Observable:
    """Bounded continuous functional of the state.

    * ``tanh_mode``: tanh(c_k[component] / scale) for one retained mode k;
      bounded by 1, reads a single coefficient.
    * ``exp_neg_l2``: exp(-(|u|_L2 / scale)^2); bounded by 1.
    * ``clip_norm``: min(|u|_space, cap) for space in {L2, H1}; bounded by cap.
    """

    kind: str
    mode_index: tuple[int, ...] = ()
    component: int = 0
    scale: float = 1.0
    space: str = "L2"
    cap: float = 1.0

    def __post_init__(self):
        if self.kind not in OBSERVABLE_KINDS:
            raise ValueError(f"unknown observable kind {self.kind!r}")
        if self.kind == "tanh_mode":
            if self.component not in (0, 1, 2):
                raise ValueError("component must be 0, 1 or 2")
            if self.scale <= 0:
                raise ValueError("scale must be positive")
        if self.kind == "exp_neg_l2" and self.scale <= 0:
            raise ValueError("scale must be positive")
        if self.kind == "clip_norm":
            if self.space not in ("L2", "H1"):
                raise ValueError("space must be 'L2' or 'H1'")
            if self.cap <= 0:
                raise ValueError("cap must be positive")
        object.__setattr__(self, "mode_index", tuple(int(i) for i in self.mode_index))

    @property
    def name(self) -> str:
        if self.kind == "tanh_mode":
            idx = ",".join(str(i) for i in self.mode_index)
            return f"tanh_mode[{idx};c{self.component};s={self.scale:g}]"
        if self.kind == "exp_neg_l2":
            return f"exp_neg_l2[s={self.scale:g}]"
        return f"clip_norm[{self.space};cap={self.cap:g}]"

    def __call__(self, u: SpectralField) -> float:
        if self.kind == "tanh_mode":
            if len(self.mode_index) != u.grid.dim:
                raise ValueError("mode_index does not match grid dimension")
            c = float(u.coeffs[(self.component,) + self.mode_index])
            return math.tanh(c / self.scale)
        if self.kind == "exp_neg_l2":
            n = sobolev_norm(u, 0)
            return math.exp(-((n / self.scale) ** 2))
        n = sobolev_norm(u, 0) if self.space == "L2" else sobolev_norm(u, 1)
        return min(n, self.cap)


@dataclass
class EnsembleStats:
    """Per-path recorded series plus cross-path summaries."""

    times: np.ndarray
    norms: dict[str, np.ndarray]          # name -> (M, S)
    obs: dict[str, np.ndarray]            # name -> (M, S)
    stop_reasons: list[str]
    stop_times: list[float]
    M: int
    seed: int
    mean_norms: dict[str, np.ndarray] = dc_field(default_factory=dict)
    var_norms: dict[str, np.ndarray] = dc_field(default_factory=dict)

    def __post_init__(self):
        if not self.mean_norms:
            ddof = 1 if self.M > 1 else 0
            for k, v in self.norms.items():
                self.mean_norms[k] = v.mean(axis=0)
                var = v.var(axis=0, ddof=ddof)
                # identical paths (noise-off determinism) get an exact zero,
                # not the rounding artifact of the two-pass variance
                var[np.all(v == v[0], axis=0)] = 0.0
                self.var_norms[k] = var

    @property
    def spacing(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def blowup_count(self) -> int:
        return sum(1 for r in self.stop_reasons if r != STOP_COMPLETED)


def _run_one(args) -> TrajectoryRecord:
    u0, params, noise, config, path, observables = args
    try:
        return run_trajectory(u0, params, noise, config, path=path,
                              observables=observables)
    except ConfigurationError as exc:
        raise ConfigurationError(f"path {path}: {exc}") from exc


def run_ensemble(u0: SpectralField, params: ModelParams, noise: NoiseModel,
                 config: SolverConfig, M: int, observables=(),
                 workers: int = 1) -> EnsembleStats:
    """M independent trajectories with path-keyed increments.

    Any worker count yields the same statistics bitwise; records are
    aggregated in path order. Early-stopped paths are kept and reported
    through ``stop_reasons`` / ``blowup_count``; their recorded series must
    share the common sample grid, so a path that stops early raises unless
    every path stops at the same time.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    observables = tuple(observables)
    jobs = [(u0, params, noise, config, p, observables) for p in range(M)]
    if workers <= 1:
        records = [_run_one(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_one, jobs))

    lengths = {len(r.times) for r in records}
    if len(lengths) != 1:
        bad = [p for p, r in enumerate(records) if r.stop_reason != STOP_COMPLETED]
        raise RuntimeError(
            f"paths stopped on different sample grids (early stops at paths {bad})"
        )
    times = records[0].times
    norms = {
        key: np.stack([r.norms[key] for r in records])
        for key in records[0].norms
    }
    obs = {
        name: np.stack([r.obs[name] for r in records])
        for name in (records[0].obs if records else {})
    }
    return EnsembleStats(
        times=times,
        norms=norms,
        obs=obs,
        stop_reasons=[r.stop_reason for r in records],
        stop_times=[r.stop_time for r in records],
        M=M,
        seed=config.seed,
    )


def _mc_mean_se(samples: np.ndarray) -> tuple[float, float]:
    mean = float(samples.mean())
    if samples.size > 1 and not np.all(samples == samples.flat[0]):
        se = float(samples.std(ddof=1) / math.sqrt(samples.size))
    else:
        se = 0.0
    return mean, se


def moment_estimates(stats: EnsembleStats, p: float) -> dict[str, tuple[float, float]]:
    """Monte Carlo moments mirroring the a priori bounds.

    Estimates, each with its standard error:
      * ``sup_l2_2p``  : E sup_t |u|_L2^(2p)
      * ``sup_h1_2p``  : E sup_t |u|_H1^(2p)
      * ``int_h2_p``   : E (int |u|_H2^2 dt)^p
      * ``int_h3_p``   : E (int |u|_H3^2 dt)^p
      * ``int_l4_p``   : E (int |u|_L4^4 dt)^p
    Time integrals are left-endpoint sums over the recorded samples.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if len(stats.times) < 2:
        raise ValueError("moments need at least two recorded samples")
    dt = stats.spacing
    out = {}
    out["sup_l2_2p"] = _mc_mean_se(stats.norms["l2"].max(axis=1) ** (2 * p))
    out["sup_h1_2p"] = _mc_mean_se(stats.norms["h1"].max(axis=1) ** (2 * p))
    for key, norm, power in (("int_h2_p", "h2", 2), ("int_h3_p", "h3", 2),
                             ("int_l4_p", "l4", 4)):
        integrals = (stats.norms[norm][:, :-1] ** power).sum(axis=1) * dt
        out[key] = _mc_mean_se(integrals**p)
    return out


@dataclass
class GrowthReport:
    times: np.ndarray
    series: np.ndarray
    a: float
    b: float
    c: float
    curvature_ratio: float


def h2_time_average(stats: EnsembleStats) -> GrowthReport:
    """Cumulative ``int_0^t E |u|_H2^2 ds`` and its quadratic fit.

    Fits ``a + b t + c t^2`` over [T/5, T] by least squares and reports
    ``|c| T / b``; values near zero are evidence of at-most-linear growth of
    the time-averaged H^2 moment.
    """
    if len(stats.times) < 20:
        raise ValueError("need at least 20 recorded samples")
    dt = stats.spacing
    mean_h2_sq = (stats.norms["h2"] ** 2).mean(axis=0)
    series = np.concatenate([[0.0], np.cumsum(mean_h2_sq[:-1]) * dt])
    T = stats.horizon
    mask = stats.times >= T / 5.0
    coeffs = np.polyfit(stats.times[mask], series[mask], deg=2)
    c, b, a = (float(x) for x in coeffs)
    ratio = abs(c) * T / b if b != 0 else math.inf
    return GrowthReport(stats.times, series, a, b, c, ratio)


def tightness_statistic(stats: EnsembleStats, R: float, space: str = "H1") -> float:
    """Mean fraction of time the chosen norm exceeds R, averaged over paths.

    The Chebyshev-style statistic behind invariant-measure existence: small
    values for some R mean time averages stay bounded in probability.
    """
    if R < 0:
        raise ValueError("R must be >= 0")
    if space not in ("H1", "L2"):
        raise ValueError("space must be 'H1' or 'L2'")
    series = stats.norms["h1" if space == "H1" else "l2"]
    if series.shape[1] < 2:
        raise ValueError("need at least two recorded samples")
    exceed = series[:, :-1] > R  # left-endpoint fraction
    return float(exceed.mean())


@dataclass
class WindowReport:
    observable: str
    transition_times: np.ndarray
    transition_mean: np.ndarray
    transition_se: np.ndarray
    windows: list[tuple[float, float]]
    window_means: list[float]
    window_ses: list[float]


def invariant_average(stats: EnsembleStats, observable: str | int,
                      burn_in: float,
                      windows: list[tuple[float, float]] | None = None,
                      ) -> WindowReport:
    """Transition estimates and windowed ergodic averages of one observable.

    Returns (i) the cross-path mean of psi(u(t)) at every recorded time and
    (ii) time averages over consecutive windows after burn-in (default:
    dyadic windows [T/4, T/2] and [T/2, T]), each with standard errors.
    """
    if not stats.obs:
        raise ValueError("ensemble was run without observables")
    if isinstance(observable, int):
        observable = list(stats.obs)[observable]
    if observable not in stats.obs:
        raise KeyError(f"observable {observable!r} not recorded")
    T = stats.horizon
    if T < 2 * burn_in:
        raise ValueError("horizon must be at least twice the burn-in")
    if windows is None:
        windows = [(T / 4.0, T / 2.0), (T / 2.0, T)]
    series = stats.obs[observable]  # (M, S)

    trans_mean = series.mean(axis=0)
    if stats.M > 1:
        trans_se = series.std(axis=0, ddof=1) / math.sqrt(stats.M)
    else:
        trans_se = np.zeros_like(trans_mean)

    means, ses = [], []
    for t0, t1 in windows:
        if t0 < burn_in:
            raise ValueError(f"window start {t0} precedes burn-in {burn_in}")
        if t1 > T + 1e-12:
            raise ValueError(f"window end {t1} exceeds horizon {T}")
        mask = (stats.times >= t0) & (stats.times < t1)
        if mask.sum() == 0:
            raise ValueError(f"window ({t0}, {t1}) contains no samples")
        per_path = series[:, mask].mean(axis=1)
        m, se = _mc_mean_se(per_path)
        means.append(m)
        ses.append(se)
    return WindowReport(
        observable=observable,
        transition_times=stats.times,
        transition_mean=trans_mean,
        transition_se=trans_se,
        windows=list(windows),
        window_means=means,
        window_ses=ses,
    )
