"""Integrating-factor RK4 time stepping.

Only the diagonal diffusion ``kappa lap theta`` and ``sigma lap b`` goes into
the integrating factor; the remaining linear couplings and the nonlinear
terms are advanced explicitly by classical RK4 in the rescaled variables
``exp(kappa |k|^2 t) theta_hat`` and ``exp(sigma |k|^2 t) b_hat``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import spectral as sp
from .errors import ConfigError, VacuumError
from .system import Params, State, enforce_constraints, linear_rhs, nonlinear_terms, U, B

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepperConfig:
    t_end: float
    dt_max: float = 0.05
    cfl: float = 0.4
    constraint_interval: int = 1
    sample_stride: int = 1
    blowup_factor: float = 1e3

    def __post_init__(self):
        if not self.t_end >= 0:
            raise ConfigError("must be nonnegative", "time.t_end")
        if not self.dt_max > 0:
            raise ConfigError("must be positive", "time.dt_max")
        if not 0 < self.cfl <= 1:
            raise ConfigError("must lie in (0, 1]", "time.cfl")
        if self.constraint_interval < 1:
            raise ConfigError("must be >= 1", "time.constraint_interval")
        if self.sample_stride < 1:
            raise ConfigError("must be >= 1", "time.sample_stride")


def diffusion_rates(grid: sp.Grid, p: Params) -> np.ndarray:
    """Diagonal of the stiff part, broadcastable against ``(8, M, M, M)``."""
    rates = np.zeros((8,) + grid.shape)
    rates[4] = -p.kappa * grid.k2
    rates[5:8] = -p.sigma * grid.k2
    return rates


def explicit_rhs(s: State, p: Params, nonlinear: bool = True) -> np.ndarray:
    out = linear_rhs(s, p, diffusion=False)
    if nonlinear:
        f1, f2, f3, f4 = nonlinear_terms(s, p)
        out[0] += f1
        out[U] += f2
        out[4] += f3
        out[B] += f4
    return out


def step(s: State, dt: float, p: Params, nonlinear: bool = True) -> State:
    """One integrating-factor RK4 step of size ``dt``.

    ``nonlinear=False`` advances the linear system only (used to compare
    with per-mode matrix exponentials).
    """
    if not dt > 0:
        raise ConfigError(f"time step must be positive, got {dt}", "dt")
    g = s.grid
    rates = diffusion_rates(g, p)
    e_half = np.exp(0.5 * dt * rates)
    e_full = e_half * e_half
    x = s.data

    def n_of(data):
        return explicit_rhs(State(g, data), p, nonlinear)

    k1 = n_of(x)
    k2 = n_of(e_half * (x + 0.5 * dt * k1))
    k3 = n_of(e_half * x + 0.5 * dt * k2)
    k4 = n_of(e_full * x + dt * e_half * k3)
    out = e_full * x + (dt / 6.0) * (e_full * k1 + 2.0 * e_half * (k2 + k3) + k4)
    return State(g, out)


def cfl_dt(s: State, p: Params, cfg: StepperConfig) -> float:
    """``min(dt_max, cfl dx / V)`` with V the largest local signal speed.

    ``V = max(|u| + sqrt(2 R (1 + theta)) + |n| + |b|)`` over the grid.
    """
    phys = s.physical()
    speed_u = np.linalg.norm(phys[U], axis=0)
    speed_b = np.linalg.norm(phys[B], axis=0)
    sound = np.sqrt(2.0 * p.R * np.clip(1.0 + phys[4], 0.0, None))
    v = float(np.max(speed_u + sound + speed_b)) + float(np.linalg.norm(p.n_vec))
    return min(cfg.dt_max, cfg.cfl * s.grid.dx / v)


@dataclass(frozen=True)
class BlowUpReport:
    t: float
    step: int
    reason: str
    h2_norm: float
    h2_initial: float
    min_density: float


@dataclass(frozen=True)
class RunResult:
    state: State
    t: float
    steps: int
    blowup: BlowUpReport | None = None

    @property
    def completed(self) -> bool:
        return self.blowup is None


Sink = Callable[[float, State], None]


def _h2(s: State) -> float:
    return sp.sobolev_norm(s.grid, s.data, 2.0)


def run(
    s0: State,
    p: Params,
    cfg: StepperConfig,
    sink: Sink | None = None,
    fixed_dt: float | None = None,
) -> RunResult:
    """Advance to ``cfg.t_end``, calling ``sink(t, state)`` every ``sample_stride`` steps.

    The initial and final states are always sampled. A blow-up (H^2 norm
    above ``blowup_factor`` times its initial value, vacuum, or non-finite
    values) stops the run and is returned as a report rather than raised.
    """
    s = s0
    t = 0.0
    steps = 0
    h2_0 = _h2(s0)
    if sink is not None:
        sink(t, s)
    last_sampled = 0

    def report(reason: str) -> BlowUpReport:
        data = s.data
        finite = bool(np.all(np.isfinite(data)))
        h2 = _h2(s) if finite else float("inf")
        rho_min = float(np.min(1.0 + sp.to_physical(s.grid, s.a))) if finite else float("nan")
        log.warning("run stopped at t=%.6g step %d: %s", t, steps, reason)
        return BlowUpReport(t, steps, reason, h2, h2_0, rho_min)

    while t < cfg.t_end * (1 - 1e-14):
        try:
            dt = fixed_dt if fixed_dt is not None else cfl_dt(s, p, cfg)
            dt = min(dt, cfg.t_end - t)
            candidate = step(s, dt, p)
        except VacuumError as exc:
            return RunResult(s, t, steps, report(f"vacuum: {exc}"))
        if not np.all(np.isfinite(candidate.data)):
            return RunResult(s, t, steps, report("non-finite state"))
        s = candidate
        t += dt
        steps += 1
        if steps % cfg.constraint_interval == 0:
            s, _ = enforce_constraints(s)
        h2 = _h2(s)
        rho_min = float(np.min(1.0 + sp.to_physical(s.grid, s.a)))
        if h2_0 > 0 and h2 > cfg.blowup_factor * h2_0:
            return RunResult(s, t, steps, report("H^2 norm exceeded ceiling"))
        if rho_min < 0.05:
            return RunResult(s, t, steps, report("density below 0.05"))
        if sink is not None and steps % cfg.sample_stride == 0:
            sink(t, s)
            last_sampled = steps
    if sink is not None and steps and last_sampled != steps:
        sink(t, s)
    return RunResult(s, t, steps)


def integrate(s: State, p: Params, dt: float, n_steps: int, nonlinear: bool = True) -> State:
    """Fixed-step integration without constraint enforcement or sampling."""
    for _ in range(n_steps):
        s = step(s, dt, p, nonlinear)
    return s
