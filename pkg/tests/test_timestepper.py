import numpy as np
import pytest
from scipy.linalg import expm

from mhdstab import spectral as sp
from mhdstab.diagnostics import conserved, prepare_initial_data
from mhdstab.errors import ConfigError
from mhdstab.initial import random_band
from mhdstab.linear import mode_matrix
from mhdstab.system import Params, State
from mhdstab import timestepper as ts
from mhdstab.timestepper import StepperConfig, cfl_dt, integrate, run, step


def order_study(s0, p, t_end, counts):
    ref = integrate(s0, p, t_end / (4 * counts[-1]), 4 * counts[-1])
    errs = [np.max(np.abs(integrate(s0, p, t_end / n, n).data - ref.data)) for n in counts]
    return [np.log2(a / b) for a, b in zip(errs, errs[1:])]


class TestStep:
    def test_equilibrium(self, grid16, params):
        assert not np.any(step(State.zeros(grid16), 0.1, params).data)

    def test_pure_diffusion_exact(self, grid16):
        # n orthogonal to k leaves b along e2 with pure resistive decay
        p = Params(sigma=0.7, n=(0, 0, 1))
        data = State.zeros(grid16).data.copy()
        data[6] = sp.single_mode(grid16, (2, 0, 0), 1e-3)
        out = step(State(grid16, data), 0.3, p, nonlinear=False)
        got = out.data[6][grid16.mode_index((2, 0, 0))]
        assert got == pytest.approx(1e-3 * np.exp(-0.7 * 4 * 0.3), rel=1e-15)

    def test_linear_matches_matrix_exponential(self, grid16):
        p = Params(R=1.2, kappa=0.8, sigma=0.5)
        s = random_band(grid16, 1e-3, 4, 4.0)
        dt = 1e-3
        out = step(s, dt, p, nonlinear=False)
        for k in [(1, -2, 3), (4, 0, -1), (0, 0, 1)]:
            idx = (slice(None),) + grid16.mode_index(k)
            exact = expm(mode_matrix(k, p).matrix * dt) @ s.data[idx]
            assert np.max(np.abs(out.data[idx] - exact)) <= 1e-10 * np.max(np.abs(exact))

    def test_heat_decay_with_explicit_terms_zeroed(self, grid16, monkeypatch):
        monkeypatch.setattr(ts, "explicit_rhs", lambda s, p, nonlinear=True: np.zeros_like(s.data))
        p = Params(kappa=0.6)
        s = State.from_physical(grid16, theta=np.cos(2 * grid16.points[0]))
        out = ts.step(s, 0.05, p)
        np.testing.assert_allclose(out.data, s.data * np.exp(-4 * 0.6 * 0.05), rtol=1e-15, atol=1e-16)

    def test_rejects_nonpositive_dt(self, grid16, params):
        with pytest.raises(ConfigError):
            step(State.zeros(grid16), 0.0, params)

    def test_fourth_order(self, grid16, params):
        s0, _ = prepare_initial_data(random_band(grid16, 0.3, 2, 6.5), params)
        orders = order_study(s0, params, 0.2, [10, 20, 40])
        assert min(orders) >= 3.7


class TestConfig:
    @pytest.mark.parametrize(
        "kw, path",
        [({"t_end": -1}, "time.t_end"), ({"t_end": 1, "cfl": 0}, "time.cfl"),
         ({"t_end": 1, "dt_max": 0}, "time.dt_max"), ({"t_end": 1, "sample_stride": 0}, "time.sample_stride")],
    )
    def test_invalid(self, kw, path):
        with pytest.raises(ConfigError) as info:
            StepperConfig(**kw)
        assert info.value.path == path

    def test_cfl_reference(self, grid32, params):
        dt = cfl_dt(State.zeros(grid32), params, StepperConfig(t_end=1.0, dt_max=1.0))
        assert dt == pytest.approx(0.4 * (2 * np.pi / 32) / (np.sqrt(2) + np.sqrt(6)), rel=1e-15)

    def test_cfl_shrinks_with_speed(self, grid16, params):
        cfg = StepperConfig(t_end=1.0, dt_max=1.0)
        fast = State.from_physical(grid16, u=np.stack([100 + 0 * grid16.points[0]] + [0 * grid16.points[0]] * 2))
        assert cfl_dt(fast, params, cfg) < 0.04 * cfl_dt(State.zeros(grid16), params, cfg)

    def test_cfl_bounded(self, grid16, params):
        cfg = StepperConfig(t_end=1.0, dt_max=0.05, cfl=0.4)
        dt = cfl_dt(State.zeros(grid16), params, cfg)
        speed = np.sqrt(2.0) + np.linalg.norm(params.n_vec)
        assert dt == pytest.approx(min(0.05, 0.4 * grid16.dx / speed))


class TestRun:
    def test_samples_and_end_time(self, grid16, params):
        s0, _ = prepare_initial_data(random_band(grid16, 1e-2, 0, 6.5), params)
        times = []
        res = run(s0, params, StepperConfig(t_end=0.5, sample_stride=3), sink=lambda t, s: times.append(t))
        assert res.completed and res.t == pytest.approx(0.5)
        assert times[0] == 0.0 and times[-1] == pytest.approx(0.5)
        assert len(times) == 1 + res.steps // 3 + (res.steps % 3 != 0)

    def test_conservation(self, grid16, params):
        # band 2 keeps quadratic products inside the dealiased range
        s0, _ = prepare_initial_data(random_band(grid16, 0.1, 1, 2.0, kmax=2), params)
        c0 = conserved(s0, params)
        res = run(s0, params, StepperConfig(t_end=0.3))
        c1 = conserved(res.state, params)
        assert abs(c1.mass_pert - c0.mass_pert) < 1e-14
        assert np.max(np.abs(np.subtract(c1.momentum, c0.momentum))) < 1e-9

    def test_energy_drift_is_fourth_order(self, grid16, params):
        # total energy is cubic in the state, so RK4 conserves it to O(dt^4)
        s0, _ = prepare_initial_data(random_band(grid16, 0.1, 1, 2.0, kmax=2), params)
        e0 = conserved(s0, params).total_energy
        drift = [abs(conserved(integrate(s0, params, 0.3 / n, n), params).total_energy - e0) for n in (8, 16, 32)]
        assert drift[0] / drift[1] > 12 and drift[1] / drift[2] > 12

    def test_step_halving_leaves_E_unchanged(self, grid16, params):
        from mhdstab.diagnostics import FunctionalConfig, lyapunov_E

        fcfg = FunctionalConfig(r=2.5, gamma=224)
        s0, _ = prepare_initial_data(random_band(grid16, 1e-2, 3, 6.5), params)
        coarse = integrate(s0, params, 5e-3, 40)
        fine = integrate(s0, params, 2.5e-3, 80)
        e_c, e_f = lyapunov_E(coarse, fcfg, params), lyapunov_E(fine, fcfg, params)
        assert abs(e_c - e_f) <= 1e-6 * abs(e_f)

    def test_zero_horizon(self, grid16, params):
        res = run(State.zeros(grid16), params, StepperConfig(t_end=0.0))
        assert res.steps == 0 and res.completed

    def test_blowup_report(self, grid16, params):
        s0, _ = prepare_initial_data(random_band(grid16, 1e-2, 0, 6.5), params)
        res = run(s0, Params(kappa=0, sigma=0, n=(0, 0, 0)), StepperConfig(t_end=1.0, blowup_factor=0.5))
        assert not res.completed
        assert res.blowup.step == 1 and "H^2" in res.blowup.reason
