"""Fourier representation of real fields on the periodic box [0, 2pi)^3.

Fields are stored as full complex spectra in plain NumPy arrays:

- a scalar field is an array of shape ``(M, M, M)``,
- a vector field is an array of shape ``(3, M, M, M)``,

indexed in standard FFT order along each axis. Coefficients follow the
``norm="forward"`` convention, so ``f_hat[0, 0, 0]`` is the spatial mean and
all integrals are taken against the volume-normalized measure (|T^3| = 1).
Every multiplier below acts on the last three axes, so scalar and vector
arrays go through the same code path.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import DegenerateModeError, InvalidFieldError

_AXES = (-3, -2, -1)


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("MHDSTAB_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform periodic grid with ``M`` points (and modes) per axis.

    Wavenumbers run over ``-M/2 .. M/2 - 1`` in FFT order. The Nyquist plane
    ``k_i = -M/2`` is kept at zero by every transform, and the 2/3-rule
    cutoff is ``floor(M / 3)``.
    """

    m: int
    k: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = self.m
        if not isinstance(m, (int, np.integer)) or m < 8 or m % 2:
            raise ValueError(f"grid size must be an even integer >= 8, got {m!r}")
        k1 = np.fft.fftfreq(m, d=1.0 / m).round().astype(np.int64)
        k = np.stack(np.meshgrid(k1, k1, k1, indexing="ij"))
        k.setflags(write=False)
        object.__setattr__(self, "k", k)

    def __eq__(self, other):
        return isinstance(other, Grid) and other.m == self.m

    def __hash__(self):
        return hash(("Grid", self.m))

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.m, self.m, self.m)

    @property
    def dealias_cutoff(self) -> int:
        return self.m // 3

    @property
    def dx(self) -> float:
        return 2.0 * np.pi / self.m

    @cached_property
    def kf(self) -> np.ndarray:
        """Wavevectors as floats, shape ``(3, M, M, M)``."""
        return self.k.astype(float)

    @cached_property
    def k2(self) -> np.ndarray:
        return np.sum(self.kf**2, axis=0)

    @cached_property
    def kabs(self) -> np.ndarray:
        return np.sqrt(self.k2)

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True on modes kept by the transforms (every |k_i| < M/2)."""
        return np.all(np.abs(self.k) < self.m // 2, axis=0)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        return np.all(np.abs(self.k) <= self.dealias_cutoff, axis=0)

    @cached_property
    def points(self) -> np.ndarray:
        """Physical coordinates, shape ``(3, M, M, M)``."""
        x1 = self.dx * np.arange(self.m)
        return np.stack(np.meshgrid(x1, x1, x1, indexing="ij"))

    def zeros(self, vector: bool = False) -> np.ndarray:
        return np.zeros(((3,) if vector else ()) + self.shape, dtype=complex)

    def mode_index(self, k) -> tuple[int, int, int]:
        """Array index of the integer wavevector ``k``."""
        k = tuple(int(v) for v in k)
        if any(abs(v) >= self.m // 2 for v in k):
            raise ValueError(f"mode {k} outside the resolved band of M={self.m}")
        return tuple(v % self.m for v in k)


# transforms -----------------------------------------------------------------


def to_spectral(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Forward transform of real physical values; Nyquist modes zeroed."""
    coeffs = sfft.fftn(values, axes=_AXES, norm="forward", workers=_workers())
    coeffs *= grid.nyquist_mask
    return coeffs


def to_physical(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    return sfft.ifftn(coeffs, axes=_AXES, norm="forward", workers=_workers()).real


def reflect(coeffs: np.ndarray) -> np.ndarray:
    """Return the array ``c(-k)``."""
    return np.roll(np.flip(coeffs, axis=_AXES), 1, axis=_AXES)


def symmetrize(coeffs: np.ndarray) -> np.ndarray:
    """Project onto the real-field subspace: c(-k) = conj(c(k))."""
    return 0.5 * (coeffs + np.conj(reflect(coeffs)))


def symmetry_defect(coeffs: np.ndarray) -> float:
    return float(np.max(np.abs(coeffs - np.conj(reflect(coeffs))), initial=0.0))


def check_field(coeffs: np.ndarray, grid: Grid | None = None) -> np.ndarray:
    coeffs = np.asarray(coeffs)
    if grid is not None and coeffs.shape[-3:] != grid.shape:
        raise InvalidFieldError(
            f"field shape {coeffs.shape} does not match grid {grid.shape}"
        )
    if not np.all(np.isfinite(coeffs)):
        raise InvalidFieldError("field has non-finite coefficients")
    return coeffs


def single_mode(grid: Grid, k, amplitude: complex = 1.0) -> np.ndarray:
    """Real scalar field with coefficient ``amplitude`` at k and its conjugate at -k."""
    c = grid.zeros()
    if all(v == 0 for v in k):
        c[0, 0, 0] = np.real(amplitude)
        return c
    c[grid.mode_index(k)] = amplitude
    c[grid.mode_index([-v for v in k])] = np.conj(amplitude)
    return c


# norms and multipliers ------------------------------------------------------


def _sum_modes(weighted: np.ndarray) -> float:
    return float(np.sum(weighted).real)


def sobolev_norm(grid: Grid, f: np.ndarray, s: float, homogeneous: bool = False) -> float:
    """H^s norm sqrt(sum_k (1+|k|^2)^s |f_k|^2); ``homogeneous`` uses |k|^(2s).

    Vector fields sum over their components. In the homogeneous case the
    k = 0 mode contributes only when ``s == 0``.
    """
    check_field(f, grid)
    if not np.isfinite(s):
        raise ValueError("Sobolev index must be finite")
    return float(np.sqrt(sobolev_norm_sq(grid, f, s, homogeneous)))


def sobolev_norm_sq(grid: Grid, f: np.ndarray, s: float, homogeneous: bool = False) -> float:
    power = np.abs(f) ** 2
    if power.ndim == 4:
        power = power.sum(axis=0)
    if homogeneous:
        return _sum_modes(lambda_weight(grid, 2.0 * s) * power)
    return _sum_modes((1.0 + grid.k2) ** float(s) * power)


def lambda_weight(grid: Grid, s: float) -> np.ndarray:
    """|k|^s with value 0 at k = 0 (1 when s == 0)."""
    if s == 0:
        return np.ones(grid.shape)
    with np.errstate(divide="ignore"):
        return np.where(grid.k2 > 0, grid.kabs ** float(s), 0.0)


def bessel_weight(grid: Grid, s: float) -> np.ndarray:
    return (1.0 + grid.k2) ** (0.5 * float(s))


def bessel_multiplier(grid: Grid, f: np.ndarray, s: float, kind: str = "lambda") -> np.ndarray:
    """Apply Lambda^s (``kind="lambda"``, weight |k|^s) or J^s (``kind="bessel"``).

    Raises
    ------
    DegenerateModeError
        Lambda^s with s < 0 on a field whose mean is nonzero.
    """
    check_field(f, grid)
    if not np.isfinite(s):
        raise ValueError("multiplier order must be finite")
    if kind == "bessel":
        return f * bessel_weight(grid, s)
    if kind != "lambda":
        raise ValueError(f"unknown multiplier kind {kind!r}")
    if s < 0 and np.any(np.abs(f[..., 0, 0, 0]) > 0):
        raise DegenerateModeError("Lambda^s with s < 0 is undefined on a nonzero mean")
    return f * lambda_weight(grid, s)


def directional_derivative(grid: Grid, f: np.ndarray, n) -> np.ndarray:
    """(n . grad) f, i.e. multiplication by i (n . k)."""
    check_field(f, grid)
    n = np.asarray(n, dtype=float)
    return 1j * np.tensordot(n, grid.kf, axes=1) * f


def leray_project(grid: Grid, v: np.ndarray) -> np.ndarray:
    """Remove the gradient part: v - k (k . v) / |k|^2, identity at k = 0."""
    check_field(v, grid)
    kdotv = np.sum(grid.kf * v, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        coef = np.where(grid.k2 > 0, kdotv / grid.k2, 0.0)
    return v - grid.kf * coef


def dealias(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Zero every mode with some |k_i| > floor(M/3)."""
    return f * grid.dealias_mask


# differential operators -----------------------------------------------------


def grad(grid: Grid, f: np.ndarray) -> np.ndarray:
    return 1j * grid.kf * f


def div(grid: Grid, v: np.ndarray) -> np.ndarray:
    return 1j * np.sum(grid.kf * v, axis=0)


def curl(grid: Grid, v: np.ndarray) -> np.ndarray:
    k = grid.kf
    return 1j * np.stack(
        [
            k[1] * v[2] - k[2] * v[1],
            k[2] * v[0] - k[0] * v[2],
            k[0] * v[1] - k[1] * v[0],
        ]
    )


def laplacian(grid: Grid, f: np.ndarray) -> np.ndarray:
    return -grid.k2 * f


def jacobian(grid: Grid, v: np.ndarray) -> np.ndarray:
    """Spectral gradient tensor, entry ``[i, j] = d_j v_i``."""
    return 1j * grid.kf[None, :] * v[:, None]


def inner(f_phys: np.ndarray, g_phys: np.ndarray) -> float:
    """Volume-normalized L^2 pairing of physical-space arrays."""
    return float(np.mean(np.sum(f_phys * g_phys, axis=0) if f_phys.ndim == 4 else f_phys * g_phys))


def spectral_inner(f: np.ndarray, g: np.ndarray) -> float:
    """<f, g> computed from coefficients (Parseval), real part."""
    return float(np.sum(f * np.conj(g)).real)
