"""Galerkin drift terms of the stochastic Landau-Lifshitz-Baryakhtar model.

The evolved equation for the magnetization u(t, x) in R^3 is

    du = [ b1 Lap u - b2 Lap^2 u + b3 (1 - |u|^2) u - b4 u x Lap u
           + b5 Lap(|u|^2 u) ] dt  +  sum_j G_j(u) o dW_j

with transport diffusion G_j(u) = -u x h_j + h_j - Lap h_j. This module
assembles the projected drift nonlinearities; the Stratonovich-to-Ito
correction lives in :mod:`sllbar.noise`.

All pointwise products are evaluated on the padded collocation grid and
projected back to the retained modes, so every nonlinear term is the exact
Galerkin image of its continuous counterpart (pad_factor 2 dealiases cubics).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import (
    PhysField,
    SpectralField,
    apply_laplacian,
    cross3,
    eigenvalue_array,
    sobolev_norm,
    synthesize,
    to_physical,
    to_spectral,
)


@dataclass(frozen=True)
class ModelParams:
    """Coefficients b1..b5; b1 may take either sign, b2..b5 must be positive."""

    beta1: float
    beta2: float
    beta3: float
    beta4: float
    beta5: float

    def __post_init__(self):
        for name in ("beta2", "beta3", "beta4", "beta5"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class TruncationConfig:
    """Smooth cutoff of the nonlocal cubic term by the gradient norm.

    ``mode="off"`` evolves the plain Galerkin system; ``mode="on"`` scales
    the nonlocal cubic term by ``theta_R(|grad u|_L2)``.
    """

    mode: str = "off"
    radius: float | None = None

    def __post_init__(self):
        if self.mode not in ("off", "on"):
            raise ValueError("truncation mode must be 'off' or 'on'")
        if self.mode == "on":
            if self.radius is None or self.radius <= 0:
                raise ValueError("truncation mode 'on' requires radius > 0")

    @classmethod
    def off(cls) -> "TruncationConfig":
        return cls("off", None)

    @classmethod
    def on(cls, radius: float) -> "TruncationConfig":
        return cls("on", radius)


def _bump(t: float) -> float:
    return math.exp(-1.0 / t) if t > 0.0 else 0.0


def theta_R(x: float, R: float) -> float:
    """C^infinity nonincreasing cutoff: exactly 1 on [0, R], 0 on [2R, inf).

    Realized as the standard two-bump partition
    ``phi(2 - x/R) / (phi(2 - x/R) + phi(x/R - 1))`` with
    ``phi(t) = exp(-1/t)`` for t > 0 and 0 otherwise.
    """
    if R <= 0:
        raise ValueError("R must be positive")
    if x < 0:
        raise ValueError("x must be >= 0")
    lo = _bump(x / R - 1.0)
    if lo == 0.0:
        return 1.0
    hi = _bump(2.0 - x / R)
    if hi == 0.0:
        return 0.0
    return hi / (hi + lo)


def truncation_scale(u: SpectralField, trunc: TruncationConfig) -> float:
    """theta_R evaluated at |grad u|_L2, or exactly 1.0 when truncation is off."""
    if trunc.mode == "off":
        return 1.0
    return theta_R(sobolev_norm(u, 1, seminorm=True), trunc.radius)


def cubic_field(u: SpectralField) -> SpectralField:
    """Projected cubic ``Pi(|u|^2 u)`` via padded pointwise evaluation."""
    vals = to_physical(u).values
    mag2 = (vals * vals).sum(axis=0)
    return to_spectral(PhysField(u.grid, vals * mag2))


def precession(u: SpectralField) -> SpectralField:
    """Projected precession term ``Pi(u x Lap u)``."""
    vals = to_physical(u).values
    lap_vals = synthesize(u.grid, apply_laplacian(u).coeffs)
    return to_spectral(PhysField(u.grid, cross3(vals, lap_vals)))


def nonlocal_cubic(u: SpectralField, trunc: TruncationConfig) -> SpectralField:
    """Nonlocal damping term ``theta_R(|grad u|) Pi Lap(|u|^2 u)``.

    The Laplacian acts diagonally per mode, so applying it after the
    projected cubic equals projecting ``Lap(|u|^2 u)``.
    """
    out = apply_laplacian(cubic_field(u))
    scale = truncation_scale(u, trunc)
    if scale != 1.0:
        out = SpectralField(u.grid, out.coeffs * scale)
    return out


def drift_terms(u: SpectralField, params: ModelParams, noise,
                trunc: TruncationConfig) -> dict[str, SpectralField]:
    """Every Ito-form drift contribution, individually retrievable.

    Keys: ``laplacian`` (b1 Lap u), ``biharmonic`` (-b2 Lap^2 u), ``penalty``
    (b3 Pi((1 - |u|^2) u), assembled as b3 (Pi u - Pi(|u|^2 u))),
    ``precession`` (-b4 Pi(u x Lap u)), ``nonlocal`` (+b5 theta_R(.) Pi
    Lap(|u|^2 u)) and, when the noise family is nonempty, ``ito_correction``.
    """
    from .noise import ito_correction

    grid = u.grid
    lam = eigenvalue_array(grid)
    cubic = cubic_field(u)
    terms = {
        "laplacian": SpectralField(grid, params.beta1 * (-lam) * u.coeffs),
        "biharmonic": SpectralField(grid, -params.beta2 * lam * lam * u.coeffs),
        "penalty": SpectralField(grid, params.beta3 * (u.coeffs - cubic.coeffs)),
        "precession": -params.beta4 * precession(u),
        "nonlocal": SpectralField(
            grid,
            (params.beta5 * truncation_scale(u, trunc)) * (-lam) * cubic.coeffs,
        ),
    }
    if noise is not None and noise.J > 0:
        terms["ito_correction"] = ito_correction(u, noise)
    return terms


def ito_drift(u: SpectralField, params: ModelParams, noise,
              trunc: TruncationConfig) -> SpectralField:
    """Full Ito-form drift, including the Stratonovich correction."""
    total = np.zeros_like(u.coeffs)
    for term in drift_terms(u, params, noise, trunc).values():
        total += term.coeffs
    return SpectralField(u.grid, total)


def stratonovich_drift(u: SpectralField, params: ModelParams,
                       trunc: TruncationConfig) -> SpectralField:
    """Drift of the Stratonovich form: all b-terms, no Ito correction."""
    total = np.zeros_like(u.coeffs)
    for term in drift_terms(u, params, None, trunc).values():
        total += term.coeffs
    return SpectralField(u.grid, total)
