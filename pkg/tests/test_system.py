import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mhdstab import spectral as sp
from mhdstab.errors import VacuumError
from mhdstab.spectral import Grid
from mhdstab.system import (
    AdmissibilityWarning,
    Params,
    State,
    divergence_max,
    enforce_constraints,
    from_primitive,
    linear_rhs,
    nonlinear_terms,
    primitive_rhs,
    reformulated_rhs,
    rhs,
    to_primitive,
)

from conftest import random_state


def rel_l2(x, y):
    return np.linalg.norm(x - y) / max(np.linalg.norm(y), 1e-300)


def primitive_as_state_tendency(s, p):
    pt = primitive_rhs(to_primitive(s, p), p)
    return np.concatenate([pt.rho[None], pt.u, pt.vartheta[None], pt.h])


class TestParams:
    def test_defaults(self):
        p = Params()
        assert p.R == 1.0 and p.kappa == 1.0 and p.sigma == 1.0
        np.testing.assert_allclose(p.n_vec, [1, np.sqrt(2), np.sqrt(3)])

    @pytest.mark.parametrize("kw", [{"R": 0.0}, {"kappa": -1.0}, {"c_nu": 2.0}, {"n": (1, 2)}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            Params(**kw)


class TestChangeOfVariables:
    def test_zero_state_is_equilibrium(self, grid16, params):
        ps = to_primitive(State.zeros(grid16), params)
        assert ps.rho[0, 0, 0] == 1.0 and ps.vartheta[0, 0, 0] == 1.0
        np.testing.assert_array_equal(ps.h[:, 0, 0, 0], params.n_vec)

    def test_round_trip(self, grid16, params):
        s = random_state(grid16, np.random.default_rng(0))
        back = from_primitive(to_primitive(s, params), params)
        assert np.max(np.abs(back.data - s.data)) <= 1e-15

    def test_density(self, grid16, params):
        x = grid16.points
        s = State.from_physical(grid16, a=0.1 * np.cos(x[0]))
        rho = sp.to_physical(grid16, to_primitive(s, params).rho)
        np.testing.assert_allclose(rho, 1 + 0.1 * np.cos(x[0]), atol=1e-15)


class TestNonlinearTerms:
    def test_zero_state(self, grid16, params):
        for f in nonlinear_terms(State.zeros(grid16), params):
            assert not np.any(f)

    def test_continuity_term(self, grid16, params):
        x = grid16.points
        s = State.from_physical(
            grid16, a=np.cos(x[0]) * 0.5, u=np.stack([np.sin(x[0]), 0 * x[0], 0 * x[0]])
        )
        f1 = sp.to_physical(grid16, nonlinear_terms(s, params)[0])
        # -u.grad a - a div u with a = cos/2, u1 = sin
        expected = 0.5 * (np.sin(x[0]) ** 2 - np.cos(x[0]) ** 2)
        np.testing.assert_allclose(f1, expected, atol=1e-14)

    def test_shear_field(self, grid16, params):
        x = grid16.points
        eps = 1e-2
        zero = 0 * x[0]
        s = State.from_physical(grid16, b=np.stack([zero, eps * np.cos(x[0]), zero]))
        f1, f2, f3, f4 = (sp.to_physical(grid16, f) for f in nonlinear_terms(s, params))
        np.testing.assert_allclose(f3, params.sigma * eps**2 * np.sin(x[0]) ** 2, atol=1e-17)
        np.testing.assert_allclose(f2[0], eps**2 * np.cos(x[0]) * np.sin(x[0]), atol=1e-17)
        assert np.max(np.abs(f2[1:])) < 1e-17
        assert np.max(np.abs(f1)) < 1e-17 and np.max(np.abs(f4)) < 1e-17

    def test_vacuum(self, grid16, params):
        s = State.from_physical(grid16, a=-0.99 * np.cos(grid16.points[0]) ** 2)
        with pytest.raises(VacuumError):
            nonlinear_terms(s, params)

    def test_warning_band(self, grid16, params):
        s = State.from_physical(grid16, a=-0.6 * np.cos(grid16.points[0]) ** 2)
        with pytest.warns(AdmissibilityWarning):
            nonlinear_terms(s, params)

    @settings(max_examples=10, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_density_mean_preserved(self, seed):
        g = Grid(16)
        s = random_state(g, np.random.default_rng(seed), size=0.3, index=2.0)
        f1 = nonlinear_terms(s, Params())[0]
        assert abs(f1[0, 0, 0]) < 1e-12


class TestRhs:
    def test_zero_state(self, grid16, params):
        assert not np.any(rhs(State.zeros(grid16), params).data)

    def test_single_temperature_mode(self, grid16):
        p = Params(R=1.3, kappa=0.7)
        x = grid16.points
        s = State.from_physical(grid16, theta=np.cos(x[0]))
        t = rhs(s, p)
        np.testing.assert_allclose(sp.to_physical(grid16, t.dtheta), -p.kappa * np.cos(x[0]), atol=1e-14)
        np.testing.assert_allclose(sp.to_physical(grid16, t.du[0]), p.R * np.sin(x[0]), atol=1e-14)
        assert np.max(np.abs(t.da)) == 0 and np.max(np.abs(t.db)) < 1e-15

    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("p", [Params(), Params(R=1.3, kappa=0.7, sigma=0.9, n=(0.3, -1.1, 2.0))])
    def test_primitive_oracle(self, grid16, seed, p):
        s = random_state(grid16, np.random.default_rng(seed))
        got = rhs(s, p).data
        ref = primitive_as_state_tendency(s, p)
        for sl in (slice(0, 1), slice(1, 4), slice(4, 5), slice(5, 8)):
            assert rel_l2(got[sl], ref[sl]) < 1e-12

    def test_reformulated_temperature_equation(self, grid16, params):
        s = random_state(grid16, np.random.default_rng(9))
        # 1/(1+a) is not band-limited, so the two forms alias differently
        assert rel_l2(reformulated_rhs(s, params), rhs(s, params).data) < 1e-9

    def test_induction_keeps_divergence_free(self, grid16, params):
        s = random_state(grid16, np.random.default_rng(1))
        db = rhs(s, params).db
        assert np.max(np.abs(np.sum(grid16.kf * db, axis=0))) < 1e-12

    def test_linearization(self, grid16, params):
        s = random_state(grid16, np.random.default_rng(2), size=1.0)
        lin = linear_rhs(s, params)
        defects = []
        for eps in (1e-3, 1e-4):
            full = rhs(s.scaled(eps), params).data
            defects.append(np.linalg.norm(full - eps * lin) / eps**2)
        assert defects[1] == pytest.approx(defects[0], rel=0.05)


class TestConstraints:
    def test_admissible_state_unchanged(self, grid16):
        s = random_state(grid16, np.random.default_rng(3))
        fixed, rep = enforce_constraints(s)
        assert np.max(np.abs(fixed.data - s.data)) < 1e-14
        assert max(rep.mean_a, rep.mean_b, rep.divergence, rep.nyquist) < 1e-14

    def test_gradient_removed(self, grid16):
        s = random_state(grid16, np.random.default_rng(4))
        data = s.data.copy()
        data[5:8] += sp.grad(grid16, sp.single_mode(grid16, (1, 2, 0), 0.1))
        fixed, rep = enforce_constraints(State(grid16, data))
        assert divergence_max(fixed) < 1e-14
        assert rep.divergence == pytest.approx(np.sqrt(2 * 5 * 0.01), rel=1e-12)

    def test_mean_drift_removed(self, grid16):
        data = State.zeros(grid16).data
        data[0, 0, 0, 0] = 1e-6
        fixed, rep = enforce_constraints(State(grid16, data))
        assert fixed.a[0, 0, 0] == 0 and rep.mean_a == pytest.approx(1e-6)

    def test_silent_on_clean_state(self, grid16):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            enforce_constraints(State.zeros(grid16))
