"""Raw initial-data generators.

The generators return unprepared states; pass them through
:func:`mhdstab.diagnostics.prepare_initial_data` before integrating.
"""

from __future__ import annotations

import numpy as np

from . import spectral as sp
from .errors import ConfigError
from .spectral import Grid
from .system import State, enforce_constraints

KINDS = ("random_band", "steepening", "shear_b")


def _upper_half(grid: Grid) -> np.ndarray:
    """Mask of wavevectors that are lexicographically positive."""
    k1, k2, k3 = grid.k
    return (k1 > 0) | ((k1 == 0) & (k2 > 0)) | ((k1 == 0) & (k2 == 0) & (k3 > 0))


def random_band(
    grid: Grid, amplitude: float, seed: int, norm_index: float, kmax: int = 4
) -> State:
    """Unit-modulus random-phase coefficients on ``1 <= |k|_inf <= kmax``.

    All eight components are filled, the constraints on a and b are
    enforced, and the result is scaled to ``amplitude`` in H^norm_index.
    """
    if kmax >= grid.dealias_cutoff:
        raise ConfigError(f"band kmax={kmax} exceeds the dealiasing cutoff", "ic.kmax")
    rng = np.random.default_rng(seed)
    kinf = np.max(np.abs(grid.k), axis=0)
    band = (kinf >= 1) & (kinf <= kmax)
    phases = np.exp(2j * np.pi * rng.random((8,) + grid.shape))
    upper = band & _upper_half(grid)
    coeffs = np.where(upper, phases, 0.0)
    coeffs = coeffs + np.conj(sp.reflect(coeffs))
    s, _ = enforce_constraints(State(grid, coeffs))
    norm = sp.sobolev_norm(grid, s.data, norm_index)
    return s.scaled(amplitude / norm)


def steepening(grid: Grid, amplitude: float, density_ratio: float = 0.1) -> State:
    """``u = A sin(x1) e1`` with a small density wave ``a = ratio A cos(x1)``."""
    s = State.zeros(grid)
    data = s.data.copy()
    data[1] = sp.single_mode(grid, (1, 0, 0), -0.5j * amplitude)
    data[0] = sp.single_mode(grid, (1, 0, 0), 0.5 * density_ratio * amplitude)
    return State(grid, data)


def shear_b(grid: Grid, amplitude: float) -> State:
    """Divergence-free shear field ``b = (0, eps cos x1, 0)``."""
    data = State.zeros(grid).data.copy()
    data[6] = sp.single_mode(grid, (1, 0, 0), 0.5 * amplitude)
    return State(grid, data)


def make(kind: str, grid: Grid, amplitude: float, seed: int = 0, norm_index: float = 6.5) -> State:
    if kind == "random_band":
        return random_band(grid, amplitude, seed, norm_index)
    if kind == "steepening":
        return steepening(grid, amplitude)
    if kind == "shear_b":
        return shear_b(grid, amplitude)
    raise ConfigError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}", "ic.kind")
