import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mhdstab import spectral as sp
from mhdstab.diophantine import (
    DEFAULT_N,
    genericity_fraction,
    random_candidate,
    scan_constant,
    verify_directional_inequality,
    verify_velocity_variant,
)
from mhdstab.errors import InvalidBackgroundError, PreconditionError
from mhdstab.spectral import Grid

from conftest import band_field

ROOT_N = (1.0, math.sqrt(2.0), math.sqrt(3.0))


def brute_force(n, r, K):
    """Plain-loop oracle: smallest |n.k||k|^r, first hit in (|k|^2, lex) order."""
    best = None
    for k in itertools.product(range(-K, K + 1), repeat=3):
        if k == (0, 0, 0):
            continue
        norm2 = sum(v * v for v in k)
        value = abs(sum(a * b for a, b in zip(n, k))) * norm2 ** (r / 2)
        key = (value, norm2, k)
        if best is None or key < best:
            best = key
    return best[0], best[2]


class TestScanConstant:
    def test_rational_direction_has_zero(self):
        bg = scan_constant((1, 1, 1), 2.5, 2)
        assert bg.c_est == 0.0
        assert bg.k_min == (-1, 0, 1)
        assert bg.flagged()

    def test_rational_components_large_cube(self):
        assert scan_constant((0.5, 0.25, 1.0), 3.0, 8).c_est == 0.0

    @pytest.mark.parametrize("K", [3, 8, 20])
    def test_matches_brute_force(self, K):
        value, k = brute_force(ROOT_N, 2.5, K)
        bg = scan_constant(ROOT_N, 2.5, K)
        assert bg.c_est == pytest.approx(value, rel=1e-12)
        assert bg.k_min == k
        assert bg.c_est > 0

    def test_default_vector(self):
        assert DEFAULT_N == pytest.approx(ROOT_N)

    @pytest.mark.parametrize("n, r, K", [((0, 0, 0), 2.5, 4), (ROOT_N, 2.0, 4), (ROOT_N, 2.5, 0)])
    def test_invalid(self, n, r, K):
        with pytest.raises(InvalidBackgroundError):
            scan_constant(n, r, K)

    def test_monotone_in_K(self):
        values = [scan_constant(ROOT_N, 2.5, K).c_est for K in range(1, 12)]
        assert all(b <= a for a, b in zip(values, values[1:]))

    @settings(max_examples=30, deadline=None)
    @given(
        n=st.tuples(*[st.floats(-3, 3, allow_nan=False)] * 3).filter(lambda v: max(map(abs, v)) > 1e-3),
        lam=st.floats(0.1, 10),
    )
    def test_scaling(self, n, lam):
        base = scan_constant(n, 2.5, 4).c_est
        scaled = scan_constant(tuple(lam * v for v in n), 2.5, 4).c_est
        assert scaled == pytest.approx(lam * base, rel=1e-12, abs=1e-300)

    def test_json(self):
        doc = scan_constant(ROOT_N, 2.5, 2).to_json()
        assert set(doc) == {"n", "r", "K", "c_est", "k_min"}


class TestRandomCandidates:
    def test_deterministic(self):
        assert random_candidate(7, 3.0, 6) == random_candidate(7, 3.0, 6)

    def test_draws_from_unit_cube(self):
        n = np.array(random_candidate(11, 3.0, 2).n)
        assert np.all((1 <= n) & (n <= 2))

    def test_genericity(self):
        # a modest sample; almost every direction is certified
        assert genericity_fraction(range(200), 3.0, 10) > 0.9

    def test_near_rational_is_flagged(self):
        bg = scan_constant((1.0, 1.0 + 1e-15, 2.0), 2.5, 4)
        assert bg.flagged()


class TestDirectionalInequality:
    def test_single_mode_closed_form(self, grid16):
        bg = scan_constant(ROOT_N, 2.5, 7)
        f = sp.single_mode(grid16, (1, 0, 0), 0.5)
        rep = verify_directional_inequality(grid16, f, bg, 0.0)
        assert rep.ratio == pytest.approx(1.0 / 2.0**1.25)
        assert rep.holds and rep.ratio <= rep.bound

    def test_nonzero_mean_rejected(self, grid16):
        bg = scan_constant(ROOT_N, 2.5, 7)
        with pytest.raises(PreconditionError):
            verify_directional_inequality(grid16, sp.single_mode(grid16, (0, 0, 0), 1.0), bg, 0.0)

    def test_band_outside_certificate_rejected(self, grid16):
        bg = scan_constant(ROOT_N, 2.5, 2)
        with pytest.raises(PreconditionError):
            verify_directional_inequality(grid16, sp.single_mode(grid16, (3, 0, 0)), bg, 0.0)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), s=st.sampled_from([0.0, 1.0, 2.5]))
    def test_holds_on_random_fields(self, seed, s):
        g = Grid(16)
        bg = scan_constant(ROOT_N, 2.5, 7)
        f = band_field(g, np.random.default_rng(seed), kmax=7)
        rep = verify_directional_inequality(g, f, bg, s)
        assert rep.holds


class TestVelocityVariant:
    def test_zero_velocity(self, grid16):
        bg = scan_constant(ROOT_N, 2.5, 7)
        rep = verify_velocity_variant(grid16, grid16.zeros(vector=True), np.ones(grid16.shape), bg, 0.0)
        assert rep.ratio == 0.0 and rep.holds and not rep.violations

    def test_unit_density_matches_scalar(self, grid16):
        bg = scan_constant(ROOT_N, 2.5, 7)
        u = band_field(grid16, np.random.default_rng(0), components=3)
        rep = verify_velocity_variant(grid16, u, np.ones(grid16.shape), bg, 1.0)
        expect = sp.sobolev_norm(grid16, u, 1.0) / sp.sobolev_norm(
            grid16, sp.directional_derivative(grid16, u, ROOT_N), 3.5
        )
        assert rep.ratio == pytest.approx(expect)
        assert not rep.violations

    def test_compensated_mean(self, grid16):
        bg = scan_constant(ROOT_N, 2.5, 7)
        rho = 1.0 + 0.1 * np.cos(grid16.points[0])
        u = band_field(grid16, np.random.default_rng(1), components=3, kmax=3)
        shift = -np.mean(rho * sp.to_physical(grid16, u), axis=(1, 2, 3)) / np.mean(rho)
        u[:, 0, 0, 0] += shift
        rep = verify_velocity_variant(grid16, u, rho, bg, 0.0)
        assert rep.weighted_mean < 1e-12
        assert not rep.violations
        assert rep.holds

    def test_violations_reported(self, grid16):
        bg = scan_constant(ROOT_N, 2.5, 7)
        u = sp.single_mode(grid16, (0, 0, 0), 1.0)[None].repeat(3, axis=0)
        rho = 1.0 + 2.0 * np.cos(grid16.points[0])
        rep = verify_velocity_variant(grid16, u, rho, bg, 0.0)
        assert len(rep.violations) == 2
