"""Executable identities, residuals and refinement checks.

These turn the structural facts the scheme relies on into numbers:

* the precession term is L^2-orthogonal to the state,
* the cubic term satisfies exact gradient / integration-by-parts identities,
* noise-off trajectories balance the L^2 energy identity to O(dt),
* trajectories satisfy the weak and very-weak integral formulations against
  basis test functions up to an O(dt) quadrature defect,
* Galerkin refinement with frozen noise keys shrinks the solution gap.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .grid import (
    Grid,
    SpectralField,
    analyze,
    apply_laplacian,
    cross3,
    eigenvalue_array,
    embed,
    gradient_values,
    l2_inner,
    lp_norm,
    quad_weight,
    sobolev_norm,
    synthesize,
)
from .integrator import (
    STOP_COMPLETED,
    SolverConfig,
    SolverState,
    TrajectoryRecord,
    run_trajectory,
)
from .model import (
    ModelParams,
    TruncationConfig,
    cubic_field,
    precession,
    truncation_scale,
)
from .noise import NoiseModel, coupled_increments, ito_correction, _diffusion_coeffs


@dataclass
class ResidualSeries:
    times: np.ndarray
    values: np.ndarray
    normalization: float

    def __post_init__(self):
        if len(self.times) != len(self.values):
            raise ValueError("times and values must have equal length")


def identity_cross(u: SpectralField) -> float:
    """Normalized ``(Pi(u x Lap u), u)``; vanishes identically."""
    num = l2_inner(precession(u), u)
    denom = sobolev_norm(u, 1) * sobolev_norm(u, 2)
    if denom == 0.0:
        return 0.0
    return num / denom


def _gradient_quadratics(u: SpectralField):
    """Quadrature values of |u.grad u|^2 and |u|^2 |grad u|^2."""
    grid = u.grid
    vals = synthesize(grid, u.coeffs)
    grads = gradient_values(grid, u.coeffs)
    w = quad_weight(grid)
    mag2 = (vals * vals).sum(axis=0)
    u_dot_grad_sq = np.zeros(grid.padded)
    grad_sq = np.zeros(grid.padded)
    for g in grads:
        u_dot_grad_sq += ((vals * g).sum(axis=0)) ** 2
        grad_sq += (g * g).sum(axis=0)
    return float(u_dot_grad_sq.sum() * w), float((mag2 * grad_sq).sum() * w)


def identity_cubic_gradient(u: SpectralField) -> tuple[float, float, float]:
    """``(grad(|u|^2 u), grad u) = 2 |u.grad u|^2 + | |u| |grad u| |^2``.

    The left side pairs the spectrally differentiated projected cubic with
    grad u by quadrature; modes dropped by the projection are orthogonal to
    the retained gradient modes, so the pairing equals the unprojected one.
    """
    grid = u.grid
    gw = gradient_values(grid, cubic_field(u).coeffs)
    gu = gradient_values(grid, u.coeffs)
    w = quad_weight(grid)
    lhs = float(sum((a * b).sum() for a, b in zip(gw, gu)) * w)
    cross_sq, mixed_sq = _gradient_quadratics(u)
    rhs = 2.0 * cross_sq + mixed_sq
    residual = (lhs - rhs) / max(1.0, abs(lhs))
    return lhs, rhs, residual


def identity_cubic_ibp(u: SpectralField) -> tuple[float, float, float]:
    """``(Lap(|u|^2 u), u) = -2 |u.grad u|^2 - | |u| |grad u| |^2``."""
    grid = u.grid
    lap_cubic = synthesize(grid, apply_laplacian(cubic_field(u)).coeffs)
    u_vals = synthesize(grid, u.coeffs)
    lhs = float((lap_cubic * u_vals).sum() * quad_weight(grid))
    cross_sq, mixed_sq = _gradient_quadratics(u)
    rhs = -2.0 * cross_sq - mixed_sq
    residual = (lhs - rhs) / max(1.0, abs(lhs))
    return lhs, rhs, residual


def energy_balance_l2(states: Sequence[SolverState], params: ModelParams,
                      dt: float,
                      trunc: TruncationConfig = TruncationConfig.off(),
                      ) -> ResidualSeries:
    """Per-step defect of the deterministic L^2 energy identity.

    For a noise-off trajectory the forward difference of ``|u|^2 / 2``
    balances the dissipation terms; the b5 contribution is evaluated through
    the integration-by-parts identity. The defect is O(dt) for the
    semi-implicit scheme. States must be equally spaced in time.
    """
    if len(states) < 2:
        raise ValueError("need at least two states")
    ts = np.asarray([s.t for s in states])
    gaps = np.diff(ts)
    if not np.allclose(gaps, gaps[0], rtol=1e-9, atol=1e-12):
        raise ValueError("states are not equally spaced")
    spacing = float(gaps[0])

    residuals = np.zeros(len(states) - 1)
    half_l2_sq = [0.5 * sobolev_norm(s.u, 0) ** 2 for s in states]
    sup_l2 = max(sobolev_norm(s.u, 0) for s in states)
    for m in range(len(states) - 1):
        u = states[m].u
        cross_sq, mixed_sq = _gradient_quadratics(u)
        theta = truncation_scale(u, trunc)
        ddt = (half_l2_sq[m + 1] - half_l2_sq[m]) / spacing
        residuals[m] = (
            ddt
            + params.beta1 * sobolev_norm(u, 1, seminorm=True) ** 2
            + params.beta2 * sobolev_norm(u, 2, seminorm=True) ** 2
            + params.beta3 * lp_norm(u, 4) ** 4
            - params.beta3 * sobolev_norm(u, 0) ** 2
            + params.beta5 * theta * (2.0 * cross_sq + mixed_sq)
        )
    normalization = max(1.0, sup_l2**2)
    return ResidualSeries(ts[:-1], residuals / normalization, normalization)


def states_from_trajectory(traj: TrajectoryRecord) -> list[SolverState]:
    """Rebuild SolverStates from a trajectory's coefficient snapshots."""
    if traj.snapshots is None:
        raise ValueError("trajectory was run without snapshots")
    dt = traj.config.dt
    return [
        SolverState(step * dt, SpectralField(traj.grid, coeffs.copy()), int(step))
        for step, coeffs in zip(traj.snapshot_steps, traj.snapshots)
    ]


def _phi_reads(grid: Grid, phi_index: tuple[int, ...], component: int):
    """Coefficient pick plus eigenvalue for the basis test function."""
    lam = float(eigenvalue_array(grid)[phi_index])
    pick = (component,) + tuple(phi_index)
    return pick, lam


def weak_form_residual(traj: TrajectoryRecord, params: ModelParams,
                       noise: NoiseModel, phi_index: tuple[int, ...],
                       component: int = 0, form: str = "weak") -> float:
    """Defect of the integral solution identity against one basis mode.

    ``form="weak"`` pairs the biharmonic and nonlocal terms as
    ``(grad Lap u, grad phi)`` / ``(grad(|u|^2 u), grad phi)`` (H^1 test
    functions); ``form="very_weak"`` pairs them as ``(Lap u, Lap phi)`` /
    ``(|u|^2 u, Lap phi)`` (H^2 test functions). Time integrals use
    left-endpoint sums and the Stratonovich integral is evaluated in Ito
    form plus the correction drift. Increments are regenerated from the keys
    stored on the record, so it must have snapshots at every step.

    Returns ``|lhs - rhs|`` normalized by ``sup_t |u|_L2 |phi|_L2``.
    """
    if form not in ("weak", "very_weak"):
        raise ValueError("form must be 'weak' or 'very_weak'")
    if traj.snapshots is None:
        raise ValueError("trajectory was run without snapshots")
    steps = np.asarray(traj.snapshot_steps)
    if not np.array_equal(steps, np.arange(len(steps))):
        raise ValueError("weak-form residual needs snapshots at every step")

    grid = traj.grid
    dt = traj.config.dt
    cfg = traj.config
    phi_index = tuple(int(i) for i in phi_index)
    pick, lam_phi = _phi_reads(grid, phi_index, component)

    # gradient of the test mode on the padded grid, for the quadrature pairings
    phi_coeffs = np.zeros((3, *grid.modes))
    phi_coeffs[pick] = 1.0
    grad_phi = gradient_values(grid, phi_coeffs)
    w = quad_weight(grid)

    total = 0.0
    sup_l2 = 0.0
    n_steps = len(steps) - 1
    for m in range(n_steps):
        u = SpectralField(grid, traj.snapshots[m])
        sup_l2 = max(sup_l2, sobolev_norm(u, 0))
        vals = synthesize(grid, u.coeffs)
        mag2 = (vals * vals).sum(axis=0)
        cubic_vals = vals * mag2
        theta = truncation_scale(u, cfg.truncation)

        # common pairings
        pair = -params.beta1 * lam_phi * u.coeffs[pick]
        pair += params.beta3 * float(u.coeffs[pick])
        # (u x grad u, grad phi) by quadrature
        gu = gradient_values(grid, u.coeffs)
        cross_pair = 0.0
        for g, gphi in zip(gu, grad_phi):
            cross_pair += float((cross3(vals, g) * gphi).sum() * w)
        pair += params.beta4 * cross_pair

        cubic_coeffs = analyze(grid, cubic_vals)
        pair += -params.beta3 * float(cubic_coeffs[pick])
        if form == "weak":
            # +b2 (grad Lap u, grad phi) and -b5 theta (grad(|u|^2 u), grad phi)
            pair += params.beta2 * (-(lam_phi**2)) * u.coeffs[pick]
            gw = gradient_values(grid, cubic_coeffs)
            grad_pair = 0.0
            for g, gphi in zip(gw, grad_phi):
                grad_pair += float((g * gphi).sum() * w)
            pair += -params.beta5 * theta * grad_pair
        else:
            # -b2 (Lap u, Lap phi) and +b5 theta (|u|^2 u, Lap phi)
            pair += -params.beta2 * (lam_phi**2) * u.coeffs[pick]
            pair += params.beta5 * theta * (-lam_phi) * float(cubic_coeffs[pick])

        if noise.J > 0:
            pair += float(ito_correction(u, noise).coeffs[pick])
            inc = coupled_increments(cfg.seed, traj.path, m, noise.J, dt,
                                     cfg.substeps)
            for j in range(noise.J):
                Gj = _diffusion_coeffs(grid, vals, noise, j)
                total += float(Gj[pick]) * inc.values[j]

        total += dt * float(pair)

    u_last = SpectralField(grid, traj.snapshots[n_steps])
    sup_l2 = max(sup_l2, sobolev_norm(u_last, 0))
    lhs = float(u_last.coeffs[pick])
    rhs = float(traj.snapshots[0][pick]) + total
    return abs(lhs - rhs) / max(sup_l2, 1e-300)


def strong_convergence_gaps(u0: SpectralField, params: ModelParams,
                            noise: NoiseModel, config: SolverConfig,
                            halvings: int = 3, paths: int = 8) -> list[float]:
    """Mean L^2 gap at t_end between successive dt-halved runs.

    All levels share one Brownian path per Monte Carlo path via base-step
    increment coupling; the returned list has one entry per halving and
    decreases for a convergent scheme (strong order >= 1/2 here).
    """
    gaps = np.zeros(halvings)
    for path in range(paths):
        finals = []
        for k in range(halvings + 1):
            cfg = replace(config, dt=config.dt / 2**k,
                          substeps=config.substeps * 2 ** (halvings - k),
                          record_every=10**9, snapshot_every=None)
            rec = run_trajectory(u0, params, noise, cfg, path=path)
            if rec.stop_reason != STOP_COMPLETED:
                raise RuntimeError(
                    f"path {path} at dt={cfg.dt:g} stopped early: {rec.stop_reason}"
                )
            finals.append(rec.final)
        for k in range(halvings):
            gaps[k] += float(
                np.sqrt(((finals[k].coeffs - finals[k + 1].coeffs) ** 2).sum())
            )
    return list(gaps / paths)


def stopping_time(traj: TrajectoryRecord, K: float) -> float | None:
    """First recorded time with ``|u|_H1 > K`` (no interpolation)."""
    exceed = np.nonzero(traj.norms["h1"] > K)[0]
    if exceed.size == 0:
        return None
    return float(traj.times[exceed[0]])


def refinement_gap(u0_builder: Callable[[Grid], SpectralField],
                   params: ModelParams,
                   noise_builder: Callable[[Grid], NoiseModel],
                   config: SolverConfig, box: Grid,
                   n_coarse: int, n_fine: int, path: int = 0) -> float:
    """Sup over sampled times of the L^2 gap between two resolutions.

    Both runs consume identical increment keys; the coarse solution is
    embedded into the fine mode set for the comparison. The noise family
    must be representable on the coarse grid (the builder raises otherwise).
    """
    if n_coarse >= n_fine:
        raise ValueError("n_coarse must be smaller than n_fine")
    gaps = []
    records = []
    for n in (n_coarse, n_fine):
        grid = box.with_modes((n,) * box.dim)
        cfg = SolverConfig(
            dt=config.dt, t_end=config.t_end, scheme=config.scheme,
            blowup_K=config.blowup_K, record_every=config.record_every,
            seed=config.seed, truncation=config.truncation,
            substeps=config.substeps,
            snapshot_every=config.record_every,
        )
        records.append(
            run_trajectory(u0_builder(grid), params, noise_builder(grid), cfg,
                           path=path)
        )
    coarse, fine = records
    if len(coarse.snapshot_steps) != len(fine.snapshot_steps):
        raise ValueError("runs stopped at different times; cannot compare")
    fine_grid = fine.grid
    for cs, fs in zip(coarse.snapshots, fine.snapshots):
        cf = embed(SpectralField(coarse.grid, cs), fine_grid)
        gaps.append(float(np.sqrt(((cf.coeffs - fs) ** 2).sum())))
    return max(gaps)
