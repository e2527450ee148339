"""Neumann cosine-basis spectral core on rectangular boxes.

Fields are R^3-valued. A field is held either as coefficients in the
L^2-orthonormal eigenbasis of the Neumann Laplacian (:class:`SpectralField`)
or as point values on a zero-padded midpoint collocation grid
(:class:`PhysField`).

Conventions
-----------
* box ``[0, L_1] x ... x [0, L_d]`` with ``d in {1, 2, 3}``
* basis ``phi_k(x) = prod_i c_i(k_i) cos(pi k_i x_i / L_i)`` with
  ``c_i(0) = sqrt(1/L_i)`` and ``c_i(k) = sqrt(2/L_i)`` for ``k >= 1``;
  the eigenvalue of ``-Laplacian`` is ``lambda_k = sum_i (pi k_i / L_i)^2``
* every basis function satisfies ``du/dn = d(Lap u)/dn = 0`` on the box
  boundary, so represented fields do as well
* coefficients are stored as real ``(3, N_1, ..., N_d)`` arrays, row-major
  with axis 0 (the vector component) slowest
* collocation nodes are the midpoints ``x_j = (j + 1/2) L_i / M_i`` of the
  padded grid ``M_i = ceil(pad_factor * N_i)``; with ``pad_factor = 2``
  pointwise cubic products are alias-free on all retained modes
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft as sfft


class GridMismatchError(ValueError):
    """A field was combined with an operation on a different grid."""


@dataclass(frozen=True)
class Grid:
    """Rectangular box with per-axis retained mode counts.

    Parameters
    ----------
    dim:
        Spatial dimension, 1, 2 or 3.
    lengths:
        Per-axis box lengths ``L_i > 0``.
    modes:
        Per-axis retained mode counts ``N_i >= 1``.
    pad_factor:
        Zero-padding factor for physical-space evaluation; the padded grid
        has ``ceil(pad_factor * N_i)`` nodes per axis.
    """

    dim: int
    lengths: tuple[float, ...]
    modes: tuple[int, ...]
    pad_factor: float = 2.0

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if len(self.lengths) != self.dim or len(self.modes) != self.dim:
            raise ValueError("lengths and modes must each have dim entries")
        if any(L <= 0 for L in self.lengths):
            raise ValueError("box lengths must be positive")
        if any(N < 1 for N in self.modes):
            raise ValueError("mode counts must be >= 1")
        if self.pad_factor < 1:
            raise ValueError("pad_factor must be >= 1")
        object.__setattr__(self, "lengths", tuple(float(L) for L in self.lengths))
        object.__setattr__(self, "modes", tuple(int(N) for N in self.modes))

    @property
    def padded(self) -> tuple[int, ...]:
        return tuple(math.ceil(self.pad_factor * N) for N in self.modes)

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def with_modes(self, modes: tuple[int, ...]) -> "Grid":
        return Grid(self.dim, self.lengths, tuple(modes), self.pad_factor)


@dataclass(frozen=True)
class Basis:
    """Eigenpairs of the Neumann Laplacian restricted to the retained modes.

    ``eigenvalues[k1, ..., kd]`` is ``lambda_k``; ``normalization`` holds the
    per-mode amplitude ``prod_i c_i(k_i)``; ``sorted_flat`` lists flat mode
    indices by increasing eigenvalue (ties broken by flat index, stable
    across runs).
    """

    eigenvalues: np.ndarray
    normalization: np.ndarray
    sorted_flat: np.ndarray


@dataclass
class SpectralField:
    """R^3-valued field as coefficients in the retained cosine eigenbasis."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        expected = (3, *self.grid.modes)
        if self.coeffs.shape != expected:
            raise ValueError(f"coeffs shape {self.coeffs.shape}, expected {expected}")

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self.grid, other.grid)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self.grid, other.grid)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)


@dataclass
class PhysField:
    """R^3-valued field sampled on the padded midpoint collocation grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        expected = (3, *self.grid.padded)
        if self.values.shape != expected:
            raise ValueError(f"values shape {self.values.shape}, expected {expected}")


def _check_same_grid(a: Grid, b: Grid):
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a} vs {b}")


@lru_cache(maxsize=None)
def _axis_eigenvalues(grid: Grid) -> tuple[np.ndarray, ...]:
    return tuple(
        (np.pi * np.arange(N) / L) ** 2 for N, L in zip(grid.modes, grid.lengths)
    )


@lru_cache(maxsize=None)
def eigenvalue_array(grid: Grid) -> np.ndarray:
    """Array of shape ``grid.modes`` holding lambda_k for each multi-index."""
    per_axis = _axis_eigenvalues(grid)
    lam = np.zeros(grid.modes)
    for ax, lam1d in enumerate(per_axis):
        shape = [1] * grid.dim
        shape[ax] = grid.modes[ax]
        lam = lam + lam1d.reshape(shape)
    lam.setflags(write=False)
    return lam


def neumann_eigenpairs(grid: Grid) -> Basis:
    """All retained eigenpairs, with a run-stable sorted index map."""
    lam = eigenvalue_array(grid)
    norm = np.ones(grid.modes)
    for ax, (N, L) in enumerate(zip(grid.modes, grid.lengths)):
        c = np.full(N, math.sqrt(2.0 / L))
        c[0] = math.sqrt(1.0 / L)
        shape = [1] * grid.dim
        shape[ax] = N
        norm = norm * c.reshape(shape)
    order = np.argsort(lam.ravel(), kind="stable")
    return Basis(eigenvalues=lam, normalization=norm, sorted_flat=order)


@lru_cache(maxsize=None)
def _transform_scale(grid: Grid) -> float:
    # analysis scale relating ortho-normalized DCT output to basis coefficients
    return float(
        np.prod([math.sqrt(L / M) for L, M in zip(grid.lengths, grid.padded)])
    )


def _spatial_axes(grid: Grid) -> tuple[int, ...]:
    return tuple(range(1, grid.dim + 1))


# Below this padded size per axis, transforms go through cached orthonormal
# DCT/DST matrices; the FFT library's per-call overhead dominates for small
# grids. Both paths compute the same orthonormal transform.
_MATRIX_PATH_MAX = 64


@lru_cache(maxsize=None)
def _use_matrix_path(grid: Grid) -> bool:
    return max(grid.padded) <= _MATRIX_PATH_MAX


@lru_cache(maxsize=None)
def _axis_matrices(grid: Grid) -> tuple[tuple[np.ndarray, np.ndarray, np.ndarray], ...]:
    """Per-axis (analysis, synthesis, derivative-synthesis) matrices.

    analysis: (N, M) values -> coefficients; synthesis: (M, N) its adjoint;
    derivative: (M, N) coefficients -> axis derivative at the nodes. The
    per-axis scale sqrt(L/M) is folded in.
    """
    out = []
    for N, M, L in zip(grid.modes, grid.padded, grid.lengths):
        s = math.sqrt(L / M)
        dct_mat = sfft.dct(np.eye(M), type=2, norm="ortho", axis=0)
        dst_mat = sfft.dst(np.eye(M), type=2, norm="ortho", axis=0)
        analysis = np.ascontiguousarray(s * dct_mat[:N, :])
        synthesis = np.ascontiguousarray(dct_mat[:N, :].T / s)
        deriv = np.zeros((M, N))
        for k in range(1, N):
            deriv[:, k] = -(np.pi * k / L) / s * dst_mat[k - 1, :]
        for m in (analysis, synthesis, deriv):
            m.setflags(write=False)
        out.append((analysis, synthesis, deriv))
    return tuple(out)


def _apply_axis_matrix(arr: np.ndarray, mat: np.ndarray, ax: int) -> np.ndarray:
    if 1 + ax == arr.ndim - 1:
        return arr @ mat.T
    moved = np.moveaxis(arr, 1 + ax, -1)
    return np.moveaxis(moved @ mat.T, -1, 1 + ax)


def cross3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product of two ``(3, ...)`` arrays along the leading axis."""
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


def collocation_points(grid: Grid) -> tuple[np.ndarray, ...]:
    """Per-axis midpoint nodes of the padded grid."""
    return tuple(
        (np.arange(M) + 0.5) * (L / M) for M, L in zip(grid.padded, grid.lengths)
    )


def quad_weight(grid: Grid) -> float:
    """Quadrature weight of one padded-grid node (midpoint rule)."""
    return float(np.prod([L / M for L, M in zip(grid.lengths, grid.padded)]))


def synthesize(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    """Raw coefficients ``(3, *modes)`` -> values ``(3, *padded)``."""
    if _use_matrix_path(grid):
        arr = coeffs
        for ax, (_, syn, _) in enumerate(_axis_matrices(grid)):
            arr = _apply_axis_matrix(arr, syn, ax)
        return np.ascontiguousarray(arr)
    padded = np.zeros((3, *grid.padded))
    padded[(slice(None),) + tuple(slice(0, N) for N in grid.modes)] = coeffs
    padded /= _transform_scale(grid)
    return sfft.idctn(padded, type=2, norm="ortho", axes=_spatial_axes(grid))


def analyze(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Raw values ``(3, *padded)`` -> coefficients truncated to retained modes.

    The truncation composes the analysis with the Galerkin projection onto
    the retained-mode span.
    """
    if _use_matrix_path(grid):
        arr = values
        for ax, (ana, _, _) in enumerate(_axis_matrices(grid)):
            arr = _apply_axis_matrix(arr, ana, ax)
        return np.ascontiguousarray(arr)
    full = sfft.dctn(values, type=2, norm="ortho", axes=_spatial_axes(grid))
    full *= _transform_scale(grid)
    return np.ascontiguousarray(
        full[(slice(None),) + tuple(slice(0, N) for N in grid.modes)]
    )


def to_physical(field: SpectralField) -> PhysField:
    """Evaluate on the padded collocation grid (zero-padded synthesis)."""
    return PhysField(field.grid, synthesize(field.grid, field.coeffs))


def to_spectral(field: PhysField) -> SpectralField:
    """Analyze padded-grid values; the result is projected to retained modes."""
    return SpectralField(field.grid, analyze(field.grid, field.values))


def transform(field, direction: str):
    """Dispatch ``to_physical`` / ``to_spectral`` by name."""
    if direction == "to_physical":
        if not isinstance(field, SpectralField):
            raise GridMismatchError("to_physical expects a SpectralField")
        return to_physical(field)
    if direction == "to_spectral":
        if not isinstance(field, PhysField):
            raise GridMismatchError("to_spectral expects a PhysField on the padded grid")
        return to_spectral(field)
    raise ValueError(f"unknown transform direction {direction!r}")


def project(field: SpectralField, cutoff) -> SpectralField:
    """Zero every coefficient with any ``k_i >= cutoff_i``."""
    grid = field.grid
    if np.isscalar(cutoff):
        cutoff = (int(cutoff),) * grid.dim
    cutoff = tuple(int(c) for c in cutoff)
    if len(cutoff) != grid.dim:
        raise ValueError("cutoff must have one entry per axis")
    for c, N in zip(cutoff, grid.modes):
        if c < 0 or c > N:
            raise ValueError(f"cutoff {c} outside stored modes (0..{N})")
    out = np.zeros_like(field.coeffs)
    keep = (slice(None),) + tuple(slice(0, c) for c in cutoff)
    out[keep] = field.coeffs[keep]
    return SpectralField(grid, out)


def apply_laplacian(field: SpectralField, power: int = 1) -> SpectralField:
    """Per-mode multiplication by ``(-lambda_k)^power``."""
    if power not in (1, 2):
        raise ValueError("power must be 1 or 2")
    lam = eigenvalue_array(field.grid)
    mult = -lam if power == 1 else lam * lam
    return SpectralField(field.grid, field.coeffs * mult)


def gradient_values(grid: Grid, coeffs: np.ndarray) -> list[np.ndarray]:
    """Exact per-axis derivatives evaluated on the padded grid.

    Differentiating the cosine series gives a sine series per axis; each
    component is synthesized with a DST along the derivative axis and DCTs
    along the rest.
    """
    if _use_matrix_path(grid):
        mats = _axis_matrices(grid)
        out = []
        for ax in range(grid.dim):
            arr = coeffs
            for j, (_, syn, deriv) in enumerate(mats):
                arr = _apply_axis_matrix(arr, deriv if j == ax else syn, j)
            out.append(np.ascontiguousarray(arr))
        return out
    padded = np.zeros((3, *grid.padded))
    padded[(slice(None),) + tuple(slice(0, N) for N in grid.modes)] = coeffs
    scale = _transform_scale(grid)
    out = []
    for ax in range(grid.dim):
        M = grid.padded[ax]
        L = grid.lengths[ax]
        b = np.zeros_like(padded)
        bm = np.moveaxis(b, 1 + ax, -1)
        cm = np.moveaxis(padded, 1 + ax, -1)
        k = np.arange(1, M)
        # sine coefficient of frequency k sits at slot k-1
        bm[..., : M - 1] = cm[..., 1:] * (-(np.pi * k / L))
        arr = b
        for j in range(grid.dim):
            if j == ax:
                arr = sfft.idst(arr, type=2, norm="ortho", axis=1 + j)
            else:
                arr = sfft.idct(arr, type=2, norm="ortho", axis=1 + j)
        out.append(arr / scale)
    return out


def spectral_gradient(field: SpectralField) -> list[PhysField]:
    return [
        PhysField(field.grid, v) for v in gradient_values(field.grid, field.coeffs)
    ]


@lru_cache(maxsize=None)
def _sobolev_weight(grid: Grid, s: float, seminorm: bool) -> np.ndarray:
    lam = eigenvalue_array(grid)
    weight = np.power(lam, s) if seminorm else np.power(1.0 + lam, s)
    weight.setflags(write=False)
    return weight


def sobolev_norm(field: SpectralField, s: float, seminorm: bool = False) -> float:
    """Spectral-multiplier Sobolev norm ``(sum_k (1+lambda_k)^s |c_k|^2)^(1/2)``.

    With ``seminorm=True`` the multiplier is ``lambda_k^s`` (the k = 0 mode
    drops out for s > 0); ``s = 0`` gives the L^2 norm either way.
    """
    if s < 0:
        raise ValueError("s must be >= 0")
    mag2 = (field.coeffs * field.coeffs).sum(axis=0)
    if s == 0:
        return math.sqrt(float(mag2.sum()))
    weight = _sobolev_weight(field.grid, float(s), bool(seminorm))
    return math.sqrt(float((weight * mag2).sum()))


def lp_norm(field: SpectralField, p) -> float:
    """L^p norm by quadrature on the padded grid, p in {2, 4, inf}.

    For retained-mode fields the midpoint rule is exact at p = 2 and, with
    pad_factor 2, at p = 4 as well. The infinity norm is the max over nodes
    of the Euclidean magnitude of the 3-vector.
    """
    vals = synthesize(field.grid, field.coeffs)
    mag2 = (vals * vals).sum(axis=0)
    w = quad_weight(field.grid)
    if p == 2:
        return math.sqrt(float(mag2.sum()) * w)
    if p == 4:
        return float((mag2 * mag2).sum() * w) ** 0.25
    if p == math.inf or p == "inf":
        return math.sqrt(float(mag2.max()))
    raise ValueError(f"unsupported p {p!r}")


def l2_inner(a: SpectralField, b: SpectralField) -> float:
    """L^2 inner product from coefficients (Parseval-exact)."""
    _check_same_grid(a.grid, b.grid)
    return float((a.coeffs * b.coeffs).sum())


def h1_semi_inner(a: SpectralField, b: SpectralField) -> float:
    """Gradient inner product ``(grad a, grad b)`` as a spectral sum."""
    _check_same_grid(a.grid, b.grid)
    lam = eigenvalue_array(a.grid)
    return float((lam * (a.coeffs * b.coeffs).sum(axis=0)).sum())


def quad_inner(grid: Grid, a_vals: np.ndarray, b_vals: np.ndarray) -> float:
    """Pointwise product summed with the midpoint quadrature weight."""
    return float((a_vals * b_vals).sum() * quad_weight(grid))


def mode_values(grid: Grid, index: tuple[int, ...]) -> np.ndarray:
    """Scalar eigenfunction e_k on the padded grid, L^2-normalized."""
    index = tuple(int(i) for i in index)
    if len(index) != grid.dim:
        raise ValueError("index must have one entry per axis")
    pts = collocation_points(grid)
    vals = np.ones(grid.padded)
    for ax, (k, L, x) in enumerate(zip(index, grid.lengths, pts)):
        if k >= grid.modes[ax] or k < 0:
            raise ValueError(f"mode index {k} outside retained range on axis {ax}")
        c = math.sqrt(1.0 / L) if k == 0 else math.sqrt(2.0 / L)
        axis_vals = c * np.cos(np.pi * k * x / L)
        shape = [1] * grid.dim
        shape[ax] = grid.padded[ax]
        vals = vals * axis_vals.reshape(shape)
    return vals


def constant_field(grid: Grid, vector) -> SpectralField:
    """Spatially constant field with the given 3-vector value."""
    vector = np.asarray(vector, dtype=float)
    if vector.shape != (3,):
        raise ValueError("vector must have 3 components")
    coeffs = np.zeros((3, *grid.modes))
    coeffs[(slice(None),) + (0,) * grid.dim] = vector * math.sqrt(grid.volume)
    return SpectralField(grid, coeffs)


def eigenmode_field(grid: Grid, index: tuple[int, ...], vector) -> SpectralField:
    """Field ``e_k(x) * v`` for a retained multi-index k and 3-vector v."""
    index = tuple(int(i) for i in index)
    vector = np.asarray(vector, dtype=float)
    if vector.shape != (3,):
        raise ValueError("vector must have 3 components")
    for ax, (k, N) in enumerate(zip(index, grid.modes)):
        if k < 0 or k >= N:
            raise ValueError(f"mode index {k} outside retained range on axis {ax}")
    coeffs = np.zeros((3, *grid.modes))
    coeffs[(slice(None),) + index] = vector
    return SpectralField(grid, coeffs)


def zero_field(grid: Grid) -> SpectralField:
    return SpectralField(grid, np.zeros((3, *grid.modes)))


def embed(field: SpectralField, fine: Grid) -> SpectralField:
    """Zero-pad coefficients into a finer grid with the same box."""
    coarse = field.grid
    if fine.dim != coarse.dim or fine.lengths != coarse.lengths:
        raise GridMismatchError("embedding requires the same box")
    if any(nf < nc for nf, nc in zip(fine.modes, coarse.modes)):
        raise ValueError("target grid must retain at least as many modes")
    out = np.zeros((3, *fine.modes))
    out[(slice(None),) + tuple(slice(0, N) for N in coarse.modes)] = field.coeffs
    return SpectralField(fine, out)


def random_field(grid: Grid, rng: np.random.Generator, amplitude: float = 1.0,
                 decay: float = 1.0) -> SpectralField:
    """Gaussian random coefficients with algebraic mode decay (test utility)."""
    lam = eigenvalue_array(grid)
    scale = amplitude / (1.0 + lam) ** decay
    coeffs = rng.standard_normal((3, *grid.modes)) * scale
    return SpectralField(grid, coeffs)
