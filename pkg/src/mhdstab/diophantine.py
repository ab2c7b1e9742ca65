"""Diophantine certificates for background fields and the directional Poincare checks.

A background field ``n`` is certified on the truncated lattice cube
``0 < |k|_inf <= K`` by the constant

    c_est = min |n . k| |k|^r,

where ``|k|`` inside the product is Euclidean. Band-limited mean-zero fields
then satisfy ``c_est * ||f||_{H^s} <= ||n . grad f||_{H^{s+r}}`` mode by mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import spectral as sp
from .errors import InvalidBackgroundError, PreconditionError
from .spectral import Grid

DEFAULT_N = (1.0, np.sqrt(2.0), np.sqrt(3.0))


@dataclass(frozen=True)
class BackgroundField:
    """A candidate background field with its truncated-lattice certificate."""

    n: tuple[float, float, float]
    r: float
    K: int
    c_est: float
    k_min: tuple[int, int, int]

    def flagged(self, threshold: float = 1e-8) -> bool:
        """True when the certificate is too weak to trust (near-rational n)."""
        return self.c_est <= threshold

    def to_json(self) -> dict:
        return {
            "n": list(self.n),
            "r": self.r,
            "K": self.K,
            "c_est": self.c_est,
            "k_min": list(self.k_min),
        }


@lru_cache(maxsize=8)
def _lattice(K: int) -> tuple[np.ndarray, np.ndarray]:
    """Nonzero vectors of the cube |k|_inf <= K, sorted by (|k|^2, lexicographic)."""
    r1 = np.arange(-K, K + 1)
    pts = np.stack(np.meshgrid(r1, r1, r1, indexing="ij"), axis=-1).reshape(-1, 3)
    pts = pts[np.any(pts != 0, axis=1)]
    norm2 = np.sum(pts**2, axis=1)
    order = np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0], norm2))
    pts = pts[order]
    norm = np.sqrt(np.sum(pts.astype(float) ** 2, axis=1))
    pts.setflags(write=False)
    norm.setflags(write=False)
    return pts, norm


def scan_constant(n, r: float, K: int) -> BackgroundField:
    """Exhaustive scan of ``|n . k| |k|^r`` over the lattice cube of radius K.

    Ties go to the shortest vector, then to lexicographic order.

    Raises
    ------
    InvalidBackgroundError
        If ``n`` is zero, ``r <= 2`` or ``K < 1``.
    """
    n = np.asarray(n, dtype=float)
    if n.shape != (3,) or not np.all(np.isfinite(n)):
        raise InvalidBackgroundError(f"n must be a finite 3-vector, got {n!r}")
    if not np.any(n):
        raise InvalidBackgroundError("background field n must be nonzero")
    if not r > 2:
        raise InvalidBackgroundError(f"Diophantine exponent must exceed 2, got r={r}")
    if int(K) != K or K < 1:
        raise InvalidBackgroundError(f"lattice truncation K must be a positive integer, got {K}")
    pts, norm = _lattice(int(K))
    values = np.abs(pts @ n) * norm**r
    i = int(np.argmin(values))
    return BackgroundField(
        n=tuple(float(v) for v in n),
        r=float(r),
        K=int(K),
        c_est=float(values[i]),
        k_min=tuple(int(v) for v in pts[i]),
    )


def random_candidate(seed: int, r: float, K: int) -> BackgroundField:
    """Draw n uniformly from [1, 2]^3 with a seeded generator and certify it."""
    rng = np.random.default_rng(seed)
    return scan_constant(rng.uniform(1.0, 2.0, size=3), r, K)


def genericity_fraction(seeds, r: float, K: int, threshold: float = 1e-4) -> float:
    """Fraction of random candidates whose certificate exceeds ``threshold``."""
    seeds = list(seeds)
    hits = sum(random_candidate(s, r, K).c_est > threshold for s in seeds)
    return hits / len(seeds)


@dataclass(frozen=True)
class DirectionalReport:
    ratio: float
    bound: float
    holds: bool
    lhs: float
    rhs: float


@dataclass(frozen=True)
class VelocityReport:
    ratio: float
    constant: float
    holds: bool
    density_deviation: float
    weighted_mean: float
    violations: tuple[str, ...] = field(default_factory=tuple)


def _band_limited(grid: Grid, f: np.ndarray, K: int) -> bool:
    outside = np.any(np.abs(grid.k) > K, axis=0)
    return not np.any(np.abs(f[..., outside]) > 0)


def _ratio(num: float, den: float) -> float:
    if num == 0.0:
        return 0.0
    return num / den if den > 0 else np.inf


def verify_directional_inequality(grid: Grid, f: np.ndarray, bg: BackgroundField, s: float) -> DirectionalReport:
    """Check ``c_est ||f||_{H^s} <= ||n . grad f||_{H^{s+r}}`` for a mean-zero field.

    Raises
    ------
    PreconditionError
        If f has a nonzero mean or has modes outside the certified cube.
    """
    sp.check_field(f, grid)
    if np.max(np.abs(f[..., 0, 0, 0])) > 0:
        raise PreconditionError("field must have zero mean")
    if not _band_limited(grid, f, bg.K):
        raise PreconditionError(f"field has modes outside |k|_inf <= {bg.K}")
    lhs = sp.sobolev_norm(grid, f, s)
    rhs = sp.sobolev_norm(grid, sp.directional_derivative(grid, f, bg.n), s + bg.r)
    bound = 1.0 / bg.c_est if bg.c_est > 0 else np.inf
    return DirectionalReport(
        ratio=_ratio(lhs, rhs),
        bound=bound,
        holds=bool(bg.c_est * lhs <= rhs),
        lhs=bg.c_est * lhs,
        rhs=rhs,
    )


def verify_velocity_variant(
    grid: Grid, u: np.ndarray, rho_phys: np.ndarray, bg: BackgroundField, s: float
) -> VelocityReport:
    """Velocity version without a zero-mean condition, under ``int rho u = 0``.

    ``rho_phys`` is the density on the physical grid. Precondition failures
    are listed in ``violations`` instead of raising. The check constant is
    ``2 (1 + 1/c_est)``.
    """
    sp.check_field(u, grid)
    deviation = float(np.sqrt(np.mean((rho_phys - 1.0) ** 2)))
    u_phys = sp.to_physical(grid, u)
    weighted_mean = float(np.linalg.norm(np.mean(rho_phys * u_phys, axis=(-3, -2, -1))))
    violations = []
    if deviation > 0.5:
        violations.append("density deviation ||rho - 1||_L2 exceeds 1/2")
    if weighted_mean > 1e-10:
        violations.append("weighted mean int rho u is nonzero")
    if not _band_limited(grid, u, bg.K):
        violations.append(f"velocity has modes outside |k|_inf <= {bg.K}")
    num = sp.sobolev_norm(grid, u, s)
    den = sp.sobolev_norm(grid, sp.directional_derivative(grid, u, bg.n), s + bg.r)
    ratio = _ratio(num, den)
    constant = 2.0 * (1.0 + 1.0 / bg.c_est) if bg.c_est > 0 else np.inf
    return VelocityReport(
        ratio=ratio,
        constant=constant,
        holds=bool(ratio <= constant),
        density_deviation=deviation,
        weighted_mean=weighted_mean,
        violations=tuple(violations),
    )
