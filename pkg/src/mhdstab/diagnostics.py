"""Functionals tracked along a trajectory.

All integrals use the volume-normalized measure, so ``int f`` is the grid mean.
Conventions:

- ``Lambda^s`` in the cross terms of E is the homogeneous multiplier ``|k|^s``;
  the cross-term sum runs over integer ``s = 0 .. floor(r + 3)``.
- The weighted density term of E uses ``Lambda^(r+4) a``.
- ``Phi`` is the relative entropy
  ``1/2 int rho|u|^2 + R int (rho ln rho - rho + 1) + int rho (vartheta - ln vartheta - 1)
  + 1/2 int |b|^2``; its time derivative along the flow equals
  ``-kappa int |grad vartheta|^2 / vartheta^2 - sigma int |curl b|^2 / vartheta``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import spectral as sp
from .errors import ConfigError, DomainError, PreparationError
from .spectral import Grid
from .system import (
    VACUUM_THRESHOLD,
    Params,
    State,
    Tendency,
    B,
    U,
    divergence_max,
    enforce_constraints,
    rhs,
)


# conserved quantities -------------------------------------------------------


@dataclass(frozen=True)
class Conserved:
    mass_pert: float
    momentum: tuple[float, float, float]
    b_mean: tuple[float, float, float]
    total_energy: float


def conserved(s: State, p: Params) -> Conserved:
    """Total mass perturbation, momentum, mean field and total energy.

    ``total_energy = int rho theta + 1/2 int rho |u|^2 + 1/2 int |b|^2``.
    """
    phys = s.physical()
    rho = 1.0 + phys[0]
    u = phys[U]
    momentum = np.mean(rho * u, axis=(1, 2, 3))
    energy = np.mean(rho * phys[4] + 0.5 * rho * np.sum(u**2, axis=0) + 0.5 * np.sum(phys[B] ** 2, axis=0))
    return Conserved(
        mass_pert=float(s.a[0, 0, 0].real),
        momentum=tuple(float(v) for v in momentum),
        b_mean=tuple(float(v) for v in s.b[:, 0, 0, 0].real),
        total_energy=float(energy),
    )


# dissipation balance --------------------------------------------------------


@dataclass(frozen=True)
class Balance:
    phi: float
    dphi_dt: float
    dissipation: float
    residual: float

    @property
    def relative(self) -> float:
        return abs(self.residual) / (self.dissipation + 1e-30)


def relative_entropy(s: State, p: Params) -> float:
    """The modified energy Phi."""
    phys = s.physical()
    a, u, th, b = phys[0], phys[U], phys[4], phys[B]
    rho = 1.0 + a
    density_part = rho * np.log1p(a) - a
    thermal_part = rho * (th - np.log1p(th))
    return float(
        np.mean(
            0.5 * rho * np.sum(u**2, axis=0)
            + p.R * density_part
            + thermal_part
            + 0.5 * np.sum(b**2, axis=0)
        )
    )


def dissipation_balance(s: State, tend: Tendency, p: Params) -> Balance:
    """Chain-rule dPhi/dt from ``tend`` plus the two dissipation integrals.

    In the continuum ``residual = dPhi/dt + kappa int |grad vartheta|^2/vartheta^2
    + sigma int |curl b|^2 / vartheta`` vanishes identically; on the grid it
    measures discretization error.
    """
    g = s.grid
    phys = s.physical()
    rate = sp.to_physical(g, tend.data)
    a, u, th, b = phys[0], phys[U], phys[4], phys[B]
    a_t, u_t, th_t, b_t = rate[0], rate[U], rate[4], rate[B]
    rho = 1.0 + a
    vt = 1.0 + th
    dphi = np.mean(
        0.5 * a_t * np.sum(u**2, axis=0)
        + rho * np.sum(u * u_t, axis=0)
        + p.R * a_t * np.log1p(a)
        + a_t * (th - np.log1p(th))
        + rho * th / vt * th_t
        + np.sum(b * b_t, axis=0)
    )
    grad_th = sp.to_physical(g, sp.grad(g, s.theta))
    curl_b = sp.to_physical(g, sp.curl(g, s.b))
    diss = np.mean(
        p.kappa * np.sum(grad_th**2, axis=0) / vt**2 + p.sigma * np.sum(curl_b**2, axis=0) / vt
    )
    return Balance(
        phi=relative_entropy(s, p),
        dphi_dt=float(dphi),
        dissipation=float(diss),
        residual=float(dphi + diss),
    )


# L-infinity functional ------------------------------------------------------


def y_infinity(s: State) -> float:
    """The L-infinity functional controlling the high-order energy estimate.

    Vector fields use the pointwise Euclidean (Frobenius for gradients) norm;
    a grouped norm is the maximum over its members.
    """
    g = s.grid
    phys = s.physical()

    def sup(v):
        return float(np.max(np.sqrt(np.sum(v.reshape(-1, *g.shape) ** 2, axis=0))))

    a_inf = sup(phys[0])
    u_inf = sup(phys[U])
    th_inf = sup(phys[4])
    b_inf = sup(phys[B])
    grads = [
        sup(sp.to_physical(g, sp.grad(g, s.a))),
        sup(sp.to_physical(g, sp.jacobian(g, s.u))),
        sup(sp.to_physical(g, sp.grad(g, s.theta))),
        sup(sp.to_physical(g, sp.jacobian(g, s.b))),
    ]
    grad_u = grads[1]
    all_inf = max(a_inf, u_inf, th_inf, b_inf)
    grad_inf = max(grads)
    lap_th = sup(sp.to_physical(g, sp.laplacian(g, s.theta)))
    aub = max(a_inf, u_inf, b_inf)
    return (
        all_inf
        + (1 + a_inf**2) * all_inf**2
        + (1 + a_inf) * grad_inf
        + lap_th
        + (1 + aub**2 + grad_u**2) * grad_inf**2
    )


# Lyapunov pair --------------------------------------------------------------


def default_gamma(n) -> float:
    return 32.0 * (1.0 + float(np.dot(n, n)))


@dataclass(frozen=True)
class FunctionalConfig:
    """Sobolev indices and coupling weight of the Lyapunov functional.

    ``beta`` may equal ``big_n`` (decay exponent 0); the lower limit is
    ``r + 4`` and ``big_n >= 4 r + 7``.
    """

    r: float
    gamma: float
    big_n: float | None = None
    beta: float | None = None
    s_range: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        if self.big_n is None:
            object.__setattr__(self, "big_n", 4 * self.r + 7)
        if self.beta is None:
            object.__setattr__(self, "beta", self.r + 4)
        if not self.r > 2:
            raise ConfigError(f"r must exceed 2, got {self.r}", "dio.r")
        if self.big_n < 4 * self.r + 7:
            raise ConfigError(f"N = {self.big_n} violates N >= 4r + 7 = {4 * self.r + 7}", "functional.big_n")
        if not (self.r + 4 <= self.beta <= self.big_n):
            raise ConfigError(f"beta = {self.beta} outside [r + 4, N]", "functional.beta")
        if not self.gamma > 0:
            raise ConfigError("gamma must be positive", "functional.gamma")
        object.__setattr__(self, "s_range", tuple(range(0, math.floor(self.r + 3) + 1)))

    @property
    def top(self) -> float:
        return self.r + 4


def _sum_lambda_weights(grid: Grid, s_range) -> np.ndarray:
    return sum(sp.lambda_weight(grid, 2.0 * s) for s in s_range)


def cross_terms(s: State, cfg: FunctionalConfig, p: Params) -> float:
    """sum_s <L^s u, L^s grad a> + <L^s theta, L^s div u> - <L^s b, L^s (n.grad u)>."""
    g = s.grid
    w = _sum_lambda_weights(g, cfg.s_range)
    n_grad_u = sp.directional_derivative(g, s.u, p.n_vec)
    total = (
        np.sum(w * np.sum(s.u * np.conj(sp.grad(g, s.a)), axis=0))
        + np.sum(w * s.theta * np.conj(sp.div(g, s.u)))
        - np.sum(w * np.sum(s.b * np.conj(n_grad_u), axis=0))
    )
    return float(total.real)


def weighted_density_term(s: State, cfg: FunctionalConfig) -> float:
    """int (theta + a^2) / (1 + a)^2 (Lambda^(r+4) a)^2."""
    g = s.grid
    phys = s.physical()
    a, th = phys[0], phys[4]
    lam_a = sp.to_physical(g, sp.bessel_multiplier(g, s.a, cfg.top))
    return float(np.mean((th + a**2) / (1.0 + a) ** 2 * lam_a**2))


def lyapunov_E(s: State, cfg: FunctionalConfig, p: Params) -> float:
    g = s.grid
    top = cfg.gamma * sp.sobolev_norm_sq(g, s.data, cfg.top)
    return top + cfg.gamma * weighted_density_term(s, cfg) + cross_terms(s, cfg, p)


@dataclass(frozen=True)
class DissipationParts:
    """Constituents of D, exported so ratios can be inspected."""

    grad_theta: float  # ||grad theta||^2_{H^{r+4}}
    grad_b: float  # ||grad b||^2_{H^{r+4}}
    grad_a: float  # ||grad a||^2_{H^{r+3}}
    div_u: float  # ||div u||^2_{H^{r+3}}
    n_grad_u: float  # ||n . grad u||^2_{H^{r+3}}


def dissipation_parts(s: State, cfg: FunctionalConfig, p: Params) -> DissipationParts:
    g = s.grid
    top, low = cfg.top, cfg.r + 3
    return DissipationParts(
        grad_theta=sp.sobolev_norm_sq(g, sp.grad(g, s.theta), top),
        grad_b=sp.sobolev_norm_sq(g, sp.jacobian(g, s.b).reshape(9, *g.shape), top),
        grad_a=sp.sobolev_norm_sq(g, sp.grad(g, s.a), low),
        div_u=sp.sobolev_norm_sq(g, sp.div(g, s.u), low),
        n_grad_u=sp.sobolev_norm_sq(g, sp.directional_derivative(g, s.u, p.n_vec), low),
    )


def lyapunov_D(s: State, cfg: FunctionalConfig, p: Params) -> float:
    d = dissipation_parts(s, cfg, p)
    return (
        cfg.gamma * p.kappa * d.grad_theta
        + cfg.gamma * p.sigma * d.grad_b
        + d.grad_a
        + d.div_u
        + d.n_grad_u
    )


def positivity_margin(s: State, cfg: FunctionalConfig, p: Params) -> float:
    """E / (gamma ||state||^2_{H^{r+4}}); at least 1/2 when gamma is large enough."""
    base = cfg.gamma * sp.sobolev_norm_sq(s.grid, s.data, cfg.top)
    return lyapunov_E(s, cfg, p) / base if base > 0 else 1.0


def positivity_self_check(
    grid: Grid, cfg: FunctionalConfig, p: Params, samples: int = 100, amplitude: float = 1e-2, seed: int = 0
) -> float:
    """Smallest :func:`positivity_margin` over random small band-limited states.

    Raises
    ------
    ConfigError
        If any margin falls below 1/2, i.e. gamma is too small.
    """
    from .initial import random_band

    rng = np.random.default_rng(seed)
    worst = math.inf
    for _ in range(samples):
        s = random_band(grid, amplitude * rng.random(), int(rng.integers(2**31)), cfg.top)
        worst = min(worst, positivity_margin(s, cfg, p))
    if worst < 0.5:
        raise ConfigError(f"gamma = {cfg.gamma} fails E >= gamma/2 ||.||^2 (margin {worst:.3g})",
                          "functional.gamma")
    return worst


# decay ----------------------------------------------------------------------


def decay_exponent(cfg) -> float:
    """3 (N - beta) / (2 (N - r - 4)).

    Raises
    ------
    ConfigError
        If beta lies outside [r + 4, N].
    """
    n, beta, r = cfg.big_n, cfg.beta, cfg.r
    if not (r + 4 <= beta <= n):
        raise ConfigError(f"beta = {beta} outside [r + 4, N]", "functional.beta")
    return 3.0 * (n - beta) / (2.0 * (n - r - 4))


@dataclass(frozen=True)
class DecayFit:
    slope: float
    constant: float
    samples: int
    late_slope: float
    super_algebraic: bool


def decay_fit(t, values, t_min: float = 0.0) -> DecayFit:
    """Least-squares slope of log(value) against log(1 + t) for t >= t_min.

    ``constant`` is the smallest C with value <= C (1 + t)^slope on the
    window. ``super_algebraic`` flags a log-log slope that steepens by more
    than 0.5 between the first and second half of the window.

    Raises
    ------
    DomainError
        If any value in the window is nonpositive.
    ValueError
        If fewer than 10 samples fall in the window.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = t >= t_min
    t, v = t[keep], v[keep]
    if len(t) < 10:
        raise ValueError(f"decay_fit needs at least 10 samples, got {len(t)}")
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise DomainError("decay_fit needs strictly positive finite values")
    x, y = np.log1p(t), np.log(v)
    slope = float(np.polyfit(x, y, 1)[0])
    constant = float(np.max(v / (1.0 + t) ** slope))
    half = len(t) // 2
    early = float(np.polyfit(x[:half], y[:half], 1)[0]) if half >= 2 else slope
    late = float(np.polyfit(x[half:], y[half:], 1)[0]) if len(t) - half >= 2 else slope
    return DecayFit(slope, constant, len(t), late, late < early - 0.5)


# Poincare margin ------------------------------------------------------------


@dataclass(frozen=True)
class PoincareReport:
    ratio: float
    degenerate: bool


def poincare_check(s: State, p: Params | None = None) -> PoincareReport:
    """||theta||^2 / (||grad theta||^2 + ||grad u||^4 + ||grad b||^4) in L^2."""
    g = s.grid
    num = sp.sobolev_norm_sq(g, s.theta, 0)
    grad_th = sp.sobolev_norm_sq(g, sp.grad(g, s.theta), 0)
    grad_u = sp.sobolev_norm_sq(g, sp.jacobian(g, s.u).reshape(9, *g.shape), 0)
    grad_b = sp.sobolev_norm_sq(g, sp.jacobian(g, s.b).reshape(9, *g.shape), 0)
    den = grad_th + grad_u**2 + grad_b**2
    if num == 0.0:
        return PoincareReport(0.0, False)
    if den < 1e-30:
        return PoincareReport(float("inf"), True)
    return PoincareReport(num / den, False)


# initial data ---------------------------------------------------------------


@dataclass(frozen=True)
class Preparation:
    mean_a: float
    mean_b: float
    divergence: float
    nyquist: float
    velocity_shift: tuple[float, float, float]
    theta_shift: float


def prepare_initial_data(raw: State, p: Params) -> tuple[State, Preparation]:
    """Adjust raw data to the conservation constraints.

    Zeroes the means of a and b, projects b, removes the density-weighted
    mean of u by a constant shift and shifts theta by the constant that
    makes the total energy vanish.

    Raises
    ------
    PreparationError
        If the shifted temperature (or the density) is not admissible.
    """
    s, fix = enforce_constraints(raw)
    g = s.grid
    data = s.data.copy()
    phys = sp.to_physical(g, data)
    rho = 1.0 + phys[0]
    mass = float(np.mean(rho))
    shift_u = -np.mean(rho * phys[U], axis=(1, 2, 3)) / mass
    data[U, 0, 0, 0] += shift_u
    u = phys[U] + shift_u[:, None, None, None]
    energy = np.mean(rho * phys[4] + 0.5 * rho * np.sum(u**2, axis=0) + 0.5 * np.sum(phys[B] ** 2, axis=0))
    shift_th = -float(energy) / mass
    data[4, 0, 0, 0] += shift_th
    out = State(g, data)
    phys = out.physical()
    if np.min(1.0 + phys[0]) <= VACUUM_THRESHOLD:
        raise PreparationError("density is not admissible")
    if np.min(1.0 + phys[4]) <= VACUUM_THRESHOLD:
        raise PreparationError(f"temperature shift {shift_th:.3g} makes 1 + theta inadmissible")
    return out, Preparation(
        mean_a=fix.mean_a,
        mean_b=fix.mean_b,
        divergence=fix.divergence,
        nyquist=fix.nyquist,
        velocity_shift=tuple(float(v) for v in shift_u),
        theta_shift=shift_th,
    )


# per-sample record ----------------------------------------------------------

CSV_COLUMNS = (
    "t", "l2_a", "l2_u", "l2_theta", "l2_b", "h_r4", "E", "D", "Y_inf",
    "mass_pert", "mom1", "mom2", "mom3", "total_energy", "divb_max",
    "min_density", "balance_residual", "poincare_margin",
)


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    l2_a: float
    l2_u: float
    l2_theta: float
    l2_b: float
    h_beta: float
    h_r4: float
    mass_pert: float
    momentum: tuple[float, float, float]
    b_mean: tuple[float, float, float]
    total_energy: float
    phi: float
    balance_residual: float
    dissipation: float
    E: float
    D: float
    Y_inf: float
    divb_max: float
    min_density: float
    poincare_margin: float
    grad_u_inf: float

    @property
    def balance_relative(self) -> float:
        return abs(self.balance_residual) / (self.dissipation + 1e-30)

    def csv_row(self) -> tuple[float, ...]:
        """Values in :data:`CSV_COLUMNS` order; balance is relative to dissipation."""
        return (
            self.t, self.l2_a, self.l2_u, self.l2_theta, self.l2_b, self.h_r4,
            self.E, self.D, self.Y_inf, self.mass_pert, *self.momentum,
            self.total_energy, self.divb_max, self.min_density,
            self.balance_relative, self.poincare_margin,
        )

    def to_dict(self) -> dict:
        return asdict(self)


def grad_u_sup(s: State) -> float:
    """max over the grid of the Frobenius norm of grad u."""
    jac = sp.to_physical(s.grid, sp.jacobian(s.grid, s.u)).reshape(9, *s.grid.shape)
    return float(np.max(np.sqrt(np.sum(jac**2, axis=0))))


def record(t: float, s: State, p: Params, cfg: FunctionalConfig) -> DiagnosticsRecord:
    g = s.grid
    cons = conserved(s, p)
    bal = dissipation_balance(s, rhs(s, p), p)
    l2 = [sp.sobolev_norm(g, s.data[sl], 0) for sl in (slice(0, 1), U, slice(4, 5), B)]
    return DiagnosticsRecord(
        t=float(t),
        l2_a=l2[0],
        l2_u=l2[1],
        l2_theta=l2[2],
        l2_b=l2[3],
        h_beta=sp.sobolev_norm(g, s.data, cfg.beta),
        h_r4=sp.sobolev_norm(g, s.data, cfg.top),
        mass_pert=cons.mass_pert,
        momentum=cons.momentum,
        b_mean=cons.b_mean,
        total_energy=cons.total_energy,
        phi=bal.phi,
        balance_residual=bal.residual,
        dissipation=bal.dissipation,
        E=lyapunov_E(s, cfg, p),
        D=lyapunov_D(s, cfg, p),
        Y_inf=y_infinity(s),
        divb_max=divergence_max(s),
        min_density=float(np.min(1.0 + sp.to_physical(g, s.a))),
        poincare_margin=poincare_check(s, p).ratio,
        grad_u_inf=grad_u_sup(s),
    )
