"""Right-hand side of the perturbation system around the equilibrium (1, 0, 1, n).

Unknowns are the perturbations ``a = rho - 1``, ``u``, ``theta = vartheta - 1``
and ``b = h - n``. With ``c_nu = 1`` and ``P = R rho vartheta``::

    a_t     = -div u                                   + f1
    u_t     = -R grad a - R grad theta + n.grad b - grad(n.b) + f2
    theta_t = kappa lap theta - R div u                + f3
    b_t     = sigma lap b + n.grad u - n div u         + f4

Compact notation is resolved as ``b grad b := grad(|b|^2 / 2)`` and
``n grad b := grad(n . b)``, and ``f3`` carries the factor ``sigma`` on
``|curl b|^2``. Every product is evaluated on the physical grid, transformed
back and dealiased with the 2/3 rule. ``primitive_rhs`` evaluates the original
(rho, u, vartheta, h) equations independently and serves as the oracle.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import spectral as sp
from .errors import VacuumError
from .spectral import Grid

VACUUM_THRESHOLD = 0.05
WARNING_THRESHOLD = 0.5

# component slices into the stacked (8, M, M, M) layout
A, U, THETA, B = slice(0, 1), slice(1, 4), slice(4, 5), slice(5, 8)


class AdmissibilityWarning(UserWarning):
    """Density or temperature is outside the small-perturbation band."""


@dataclass(frozen=True)
class Params:
    R: float = 1.0
    kappa: float = 1.0
    sigma: float = 1.0
    n: tuple[float, float, float] = (1.0, float(np.sqrt(2.0)), float(np.sqrt(3.0)))
    c_nu: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "n", tuple(float(v) for v in self.n))
        if len(self.n) != 3 or not all(np.isfinite(self.n)):
            raise ValueError(f"n must be a finite 3-vector, got {self.n!r}")
        if not self.R > 0:
            raise ValueError(f"gas constant R must be positive, got {self.R}")
        if self.kappa < 0 or self.sigma < 0:
            raise ValueError("kappa and sigma must be nonnegative")
        if self.c_nu != 1.0:
            raise ValueError("only c_nu = 1 is supported")

    @property
    def n_vec(self) -> np.ndarray:
        return np.asarray(self.n)


@dataclass(frozen=True, eq=False)
class State:
    """Spectral perturbation state stored as one ``(8, M, M, M)`` array.

    Component order is ``(a, u1, u2, u3, theta, b1, b2, b3)``.
    """

    grid: Grid
    data: np.ndarray

    def __post_init__(self):
        if self.data.shape != (8,) + self.grid.shape:
            raise ValueError(f"state data has shape {self.data.shape}")

    @classmethod
    def from_fields(cls, grid: Grid, a=None, u=None, theta=None, b=None) -> "State":
        data = np.zeros((8,) + grid.shape, dtype=complex)
        if a is not None:
            data[0] = a
        if u is not None:
            data[U] = u
        if theta is not None:
            data[4] = theta
        if b is not None:
            data[B] = b
        return cls(grid, data)

    @classmethod
    def zeros(cls, grid: Grid) -> "State":
        return cls(grid, np.zeros((8,) + grid.shape, dtype=complex))

    @classmethod
    def from_physical(cls, grid: Grid, a=None, u=None, theta=None, b=None) -> "State":
        """Build a state from real values on the physical grid."""
        def tr(v):
            return None if v is None else sp.to_spectral(grid, np.asarray(v, dtype=float))

        return cls.from_fields(grid, tr(a), tr(u), tr(theta), tr(b))

    @property
    def a(self) -> np.ndarray:
        return self.data[0]

    @property
    def u(self) -> np.ndarray:
        return self.data[U]

    @property
    def theta(self) -> np.ndarray:
        return self.data[4]

    @property
    def b(self) -> np.ndarray:
        return self.data[B]

    def physical(self) -> np.ndarray:
        """All eight components on the physical grid."""
        return sp.to_physical(self.grid, self.data)

    def copy(self) -> "State":
        return State(self.grid, self.data.copy())

    def scaled(self, factor: float) -> "State":
        return State(self.grid, self.data * factor)


@dataclass(frozen=True, eq=False)
class Tendency:
    """Time derivative of a State plus the four nonlinear pieces."""

    grid: Grid
    data: np.ndarray
    f1: np.ndarray = field(repr=False)
    f2: np.ndarray = field(repr=False)
    f3: np.ndarray = field(repr=False)
    f4: np.ndarray = field(repr=False)

    @property
    def da(self) -> np.ndarray:
        return self.data[0]

    @property
    def du(self) -> np.ndarray:
        return self.data[U]

    @property
    def dtheta(self) -> np.ndarray:
        return self.data[4]

    @property
    def db(self) -> np.ndarray:
        return self.data[B]


@dataclass(frozen=True, eq=False)
class PrimitiveState:
    """Spectral (rho, u, vartheta, h); means included (rho ~ 1, h ~ n)."""

    grid: Grid
    rho: np.ndarray
    u: np.ndarray
    vartheta: np.ndarray
    h: np.ndarray


# change of variables --------------------------------------------------------


def to_primitive(s: State, p: Params) -> PrimitiveState:
    rho = s.a.copy()
    rho[0, 0, 0] += 1.0
    vartheta = s.theta.copy()
    vartheta[0, 0, 0] += 1.0
    h = s.b.copy()
    h[:, 0, 0, 0] += p.n_vec
    return PrimitiveState(s.grid, rho, s.u.copy(), vartheta, h)


def from_primitive(ps: PrimitiveState, p: Params) -> State:
    a = ps.rho.copy()
    a[0, 0, 0] -= 1.0
    theta = ps.vartheta.copy()
    theta[0, 0, 0] -= 1.0
    b = ps.h.copy()
    b[:, 0, 0, 0] -= p.n_vec
    return State.from_fields(ps.grid, a, ps.u, theta, b)


# admissibility --------------------------------------------------------------


def _check_positive(values: np.ndarray, what: str) -> float:
    lowest = float(np.min(values))
    if not np.isfinite(lowest) or lowest <= VACUUM_THRESHOLD:
        raise VacuumError(f"{what} reached {lowest:.3g} <= {VACUUM_THRESHOLD}")
    if lowest < WARNING_THRESHOLD:
        warnings.warn(f"{what} dropped to {lowest:.3g}", AdmissibilityWarning, stacklevel=3)
    return lowest


def min_density(s: State) -> float:
    return float(np.min(1.0 + sp.to_physical(s.grid, s.a)))


# linear part ----------------------------------------------------------------


def linear_rhs(s: State, p: Params, diffusion: bool = True) -> np.ndarray:
    """Linear part of the system as exact Fourier multipliers.

    With ``diffusion=False`` the kappa and sigma Laplacians are left out, which
    is the part the integrating-factor stepper treats explicitly.
    """
    g = s.grid
    R, n = p.R, p.n_vec
    out = np.empty_like(s.data)
    divu = sp.div(g, s.u)
    out[0] = -divu
    out[U] = (
        -R * sp.grad(g, s.a + s.theta)
        + sp.directional_derivative(g, s.b, n)
        - sp.grad(g, np.tensordot(n, s.b, axes=1))
    )
    out[4] = -R * divu
    out[B] = sp.directional_derivative(g, s.u, n) - n[:, None, None, None] * divu
    if diffusion:
        out[4] += p.kappa * sp.laplacian(g, s.theta)
        out[B] += p.sigma * sp.laplacian(g, s.b)
    return out


# nonlinear part -------------------------------------------------------------


def _cross(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.stack(
        [
            x[1] * y[2] - x[2] * y[1],
            x[2] * y[0] - x[0] * y[2],
            x[0] * y[1] - x[1] * y[0],
        ]
    )


def _advect(v: np.ndarray, jac: np.ndarray) -> np.ndarray:
    """(v . grad) w from the gradient tensor ``jac[i, j] = d_j w_i``."""
    return np.einsum("j...,ij...->i...", v, jac)


def nonlinear_terms(s: State, p: Params) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """The nonlinearities (f1, f2, f3, f4) as dealiased spectra.

    Raises
    ------
    VacuumError
        If ``1 + a`` or ``1 + theta`` falls to the vacuum threshold anywhere.
    """
    g = s.grid
    R, n = p.R, p.n_vec
    phys = s.physical()
    a, u, th, b = phys[0], phys[U], phys[4], phys[B]
    one_a = 1.0 + a
    _check_positive(one_a, "density 1 + a")

    grad_a = sp.to_physical(g, sp.grad(g, s.a))
    grad_th = sp.to_physical(g, sp.grad(g, s.theta))
    lap_th = sp.to_physical(g, sp.laplacian(g, s.theta))
    jac_u = sp.to_physical(g, sp.jacobian(g, s.u))
    jac_b = sp.to_physical(g, sp.jacobian(g, s.b))
    div_u = np.trace(jac_u)
    curl_b = np.stack(
        [jac_b[2, 1] - jac_b[1, 2], jac_b[0, 2] - jac_b[2, 0], jac_b[1, 0] - jac_b[0, 1]]
    )
    inv = 1.0 / one_a
    i_a = a * inv

    f1 = -np.sum(u * grad_a, axis=0) - a * div_u

    b_grad_b = _advect(b, jac_b)
    grad_half_b2 = np.einsum("j...,ji...->i...", b, jac_b)
    n_grad_b = np.einsum("j,ij...->i...", n, jac_b)
    grad_n_b = np.einsum("j,ji...->i...", n, jac_b)
    f2 = (
        -_advect(u, jac_u)
        + b_grad_b
        - grad_half_b2
        + R * i_a * grad_a
        - R * th * grad_a * inv
        - i_a * (n_grad_b + b_grad_b - grad_n_b - grad_half_b2)
    )

    f3 = (
        -np.sum(u * grad_th, axis=0)
        - R * th * div_u
        - p.kappa * i_a * lap_th
        + p.sigma * np.sum(curl_b**2, axis=0) * inv
    )

    f4 = -_advect(u, jac_b) + _advect(b, jac_u) - b * div_u

    def back(v):
        return sp.dealias(g, sp.to_spectral(g, v))

    return back(f1), back(f2), back(f3), back(f4)


def rhs(s: State, p: Params) -> Tendency:
    """Full tendency: exact linear multipliers plus dealiased nonlinearities."""
    f1, f2, f3, f4 = nonlinear_terms(s, p)
    data = linear_rhs(s, p)
    data[0] += f1
    data[U] += f2
    data[4] += f3
    data[B] += f4
    return Tendency(s.grid, data, f1, f2, f3, f4)


def primitive_rhs(ps: PrimitiveState, p: Params) -> PrimitiveState:
    """Time derivatives of (rho, u, vartheta, h) from the original equations.

    ``P = R rho vartheta`` and the Lorentz force ``(curl h) x h`` are formed
    pointwise; the density flux goes through a spectral divergence of ``rho u``.
    """
    g = ps.grid
    rho = sp.to_physical(g, ps.rho)
    u = sp.to_physical(g, ps.u)
    vt = sp.to_physical(g, ps.vartheta)
    h = sp.to_physical(g, ps.h)
    _check_positive(rho, "density rho")
    _check_positive(vt, "temperature vartheta")

    jac_u = sp.to_physical(g, sp.jacobian(g, ps.u))
    jac_h = sp.to_physical(g, sp.jacobian(g, ps.h))
    grad_rho = sp.to_physical(g, sp.grad(g, ps.rho))
    grad_vt = sp.to_physical(g, sp.grad(g, ps.vartheta))
    lap_vt = sp.to_physical(g, sp.laplacian(g, ps.vartheta))
    lap_h = sp.to_physical(g, sp.laplacian(g, ps.h))
    curl_h = sp.to_physical(g, sp.curl(g, ps.h))
    div_u = np.trace(jac_u)
    pressure = p.R * rho * vt
    grad_p = p.R * (grad_rho * vt + rho * grad_vt)

    rho_t = -sp.div(g, sp.to_spectral(g, rho * u))
    u_t = -_advect(u, jac_u) + (_cross(curl_h, h) - grad_p) / rho
    vt_t = -np.sum(u * grad_vt, axis=0) + (
        p.kappa * lap_vt - pressure * div_u + p.sigma * np.sum(curl_h**2, axis=0)
    ) / rho
    h_t = p.sigma * lap_h - _advect(u, jac_h) + _advect(h, jac_u) - h * div_u

    def back(v):
        return sp.dealias(g, sp.to_spectral(g, v))

    return PrimitiveState(g, sp.dealias(g, rho_t), back(u_t), back(vt_t), back(h_t))


def reformulated_rhs(s: State, p: Params) -> np.ndarray:
    """Tendency from the variable-coefficient heat-flux form of the system.

    The temperature equation is written as
    ``theta_t = div(kappa / (1 + a) grad theta) - R div u + F3`` with
    ``F3 = -u.grad theta - R theta div u + kappa grad I(a) . grad theta
    + sigma |curl b|^2 / (1 + a)``, where ``I(a) = a / (1 + a)``.
    Only the theta row differs from ``rhs``; the flux divergence is taken
    spectrally, so agreement with ``rhs`` checks the product rule on the grid.
    """
    g = s.grid
    base = rhs(s, p)
    phys = s.physical()
    a, u, th, b = phys[0], phys[U], phys[4], phys[B]
    one_a = 1.0 + a
    grad_th = sp.to_physical(g, sp.grad(g, s.theta))
    grad_i = sp.to_physical(g, sp.grad(g, sp.to_spectral(g, a / one_a)))
    jac_b = sp.to_physical(g, sp.jacobian(g, s.b))
    curl_b = np.stack(
        [jac_b[2, 1] - jac_b[1, 2], jac_b[0, 2] - jac_b[2, 0], jac_b[1, 0] - jac_b[0, 1]]
    )
    div_u = sp.to_physical(g, sp.div(g, s.u))
    flux = sp.div(g, sp.to_spectral(g, p.kappa * grad_th / one_a))
    big_f3 = (
        -np.sum(u * grad_th, axis=0)
        - p.R * th * div_u
        + p.kappa * np.sum(grad_i * grad_th, axis=0)
        + p.sigma * np.sum(curl_b**2, axis=0) / one_a
    )
    out = base.data.copy()
    out[4] = sp.dealias(g, flux) - p.R * sp.div(g, s.u) + sp.dealias(g, sp.to_spectral(g, big_f3))
    return out


# constraints ----------------------------------------------------------------


@dataclass(frozen=True)
class ConstraintReport:
    mean_a: float
    mean_b: float
    divergence: float
    nyquist: float


def enforce_constraints(s: State) -> tuple[State, ConstraintReport]:
    """Zero the means of a and b, project b, clear Nyquist modes.

    Returns the corrected state and the size of each correction (absolute
    mean removed, L2 norm of the removed gradient and Nyquist parts).
    """
    g = s.grid
    data = s.data.copy()
    mean_a = abs(data[0, 0, 0, 0])
    mean_b = float(np.linalg.norm(data[B, 0, 0, 0]))
    data[0, 0, 0, 0] = 0.0
    data[B, 0, 0, 0] = 0.0
    projected = sp.leray_project(g, data[B])
    divergence = float(np.sqrt(np.sum(np.abs(data[B] - projected) ** 2)))
    data[B] = projected
    removed = data * ~g.nyquist_mask
    nyquist = float(np.sqrt(np.sum(np.abs(removed) ** 2)))
    data *= g.nyquist_mask
    return State(g, data), ConstraintReport(float(mean_a), mean_b, divergence, nyquist)


def divergence_max(s: State) -> float:
    """max_k |k . b_hat(k)|."""
    return float(np.max(np.abs(np.sum(s.grid.kf * s.b, axis=0))))
