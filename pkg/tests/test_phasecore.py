"""Circular arithmetic, grid posteriors, Bayes updates and moments."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stabphase.phasecore import (TWO_PI, DegeneratePosteriorError, PosteriorGrid1D,
                                 bayes_update, bayes_update_log, circ_diff, gaussian_grid,
                                 grid_points, moments, uniform_prior, uniform_prior_2d, wrap)

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
angles = st.floats(-np.pi, np.pi, allow_nan=False, exclude_max=True)


class TestWrap:
    def test_examples(self):
        assert wrap(0.0) == 0.0
        assert wrap(3 * np.pi) == pytest.approx(-np.pi)
        assert wrap(-1.5 * np.pi) == pytest.approx(0.5 * np.pi)

    def test_pi_maps_to_minus_pi(self):
        assert wrap(np.pi) == -np.pi

    def test_array_input(self):
        out = wrap(np.array([0.0, 2 * np.pi + 0.5, -np.pi]))
        np.testing.assert_allclose(out, [0.0, 0.5, -np.pi], atol=1e-12)

    @pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
    def test_non_finite_rejected(self, bad):
        with pytest.raises(ValueError):
            wrap(bad)

    @given(finite)
    def test_range_and_congruence(self, x):
        w = wrap(x)
        assert -np.pi <= w < np.pi
        k = (x - w) / TWO_PI
        assert abs(k - round(k)) < 1e-6

    @given(finite)
    def test_idempotent(self, x):
        assert wrap(wrap(x)) == wrap(x)


class TestCircDiff:
    def test_examples(self):
        assert circ_diff(0.3, 0.1) == pytest.approx(0.2)
        assert circ_diff(np.pi - 0.1, -np.pi + 0.1) == pytest.approx(-0.2)
        assert circ_diff(1.234, 1.234) == 0.0

    @given(angles, angles)
    def test_antisymmetric_up_to_wrap(self, a, b):
        d = circ_diff(a, b)
        assert -np.pi <= d < np.pi
        assert abs(wrap(d + circ_diff(b, a))) < 1e-9


class TestUniformPrior:
    def test_eight_bins(self):
        g = uniform_prior(8)
        assert g.bins == 8
        np.testing.assert_allclose(g.density, 1.0 / TWO_PI)

    def test_normalized(self):
        assert uniform_prior(2048).mass() == pytest.approx(1.0, abs=1e-12)

    def test_too_few_bins(self):
        with pytest.raises(ValueError):
            uniform_prior(7)

    def test_midpoints(self):
        pts = grid_points(4)
        np.testing.assert_allclose(pts, [-0.75 * np.pi, -0.25 * np.pi, 0.25 * np.pi, 0.75 * np.pi])

    def test_2d_normalized(self):
        g = uniform_prior_2d(64, 16)
        assert g.mass() == pytest.approx(1.0, abs=1e-12)
        assert g.offset_points[0] > -1 and g.offset_points[-1] < 1


class TestBayesUpdate:
    def test_single_plus_outcome_peaks_at_zero(self):
        g = bayes_update(uniform_prior(2048), lambda phi: 0.5 * (1 + np.cos(phi)))
        expected = (1 + np.cos(g.points)) / TWO_PI
        np.testing.assert_allclose(g.density, expected, atol=1e-12)
        assert abs(g.points[np.argmax(g.density)]) < g.spacing

    def test_constant_one_is_identity(self):
        g0 = gaussian_grid(0.4, 0.2, 256)
        g1 = bayes_update(g0, np.ones(256))
        np.testing.assert_allclose(g1.density, g0.density, rtol=1e-12)

    def test_two_updates_match_direct_product(self):
        lik = lambda phi: 0.5 * (1 + np.cos(phi))
        g = bayes_update(bayes_update(uniform_prior(512), lik), lik)
        direct = (1 + np.cos(g.points)) ** 2
        direct /= direct.sum() * g.spacing
        np.testing.assert_allclose(g.density, direct, rtol=1e-12, atol=1e-15)

    def test_degenerate_raises(self):
        g = uniform_prior(64)
        with pytest.raises(DegeneratePosteriorError):
            bayes_update(g, np.zeros(64))

    def test_out_of_range_likelihood(self):
        with pytest.raises(ValueError):
            bayes_update(uniform_prior(16), np.full(16, 1.5))

    def test_2d_callable(self):
        g = uniform_prior_2d(32, 8)
        g = bayes_update(g, lambda phi, h: (2 + h + np.cos(phi)) / 4)
        assert g.mass() == pytest.approx(1.0, abs=1e-12)
        assert g.offset_marginal().argmax() == 7

    def test_log_update_matches_products(self):
        g0 = uniform_prior(256)
        lik = 0.5 * (1 + 0.5 * np.cos(g0.points - 1.0))
        g = g0
        for _ in range(30):
            g = bayes_update(g, lik)
        gl = bayes_update_log(g0, 30 * np.log(lik))
        np.testing.assert_allclose(gl.density, g.density, rtol=1e-10)

    @settings(max_examples=50)
    @given(st.lists(angles, min_size=1, max_size=6), st.integers(0, 2**32 - 1))
    def test_normalization_preserved(self, thetas, seed):
        rng = np.random.default_rng(seed)
        g = uniform_prior(256)
        for t in thetas:
            s = rng.choice([-1, 1])
            g = bayes_update(g, lambda phi: 0.5 * (1 + s * np.cos(phi - t)))
            assert abs(g.mass() - 1.0) <= 1e-12
            assert np.all(g.density >= 0)

    @settings(max_examples=50)
    @given(angles, angles, st.sampled_from([1.0, 0.5, 0.25]))
    def test_order_independent(self, t1, t2, amp):
        g = gaussian_grid(0.3, 0.8, 512)
        l1 = lambda phi: 0.5 * (1 + amp * np.cos(phi - t1))
        l2 = lambda phi: 0.5 * (1 - amp * np.cos(phi - t2))
        a = bayes_update(bayes_update(g, l1), l2)
        b = bayes_update(bayes_update(g, l2), l1)
        np.testing.assert_allclose(a.density, b.density, rtol=1e-12, atol=1e-12)


class TestMoments:
    def test_one_plus_cos(self):
        g = bayes_update(uniform_prior(4096), lambda phi: 0.5 * (1 + np.cos(phi)))
        m = moments(g)
        assert m.mean == pytest.approx(0.0, abs=1e-12)
        assert m.variance == pytest.approx(np.pi**2 / 3 - 2, abs=1e-6)
        assert not m.diffuse

    def test_uniform_is_diffuse(self):
        m = moments(uniform_prior(2048))
        assert m.diffuse and m.mean == 0.0
        assert m.variance == pytest.approx(np.pi**2 / 3, rel=1e-6)

    def test_narrow_gaussian_near_boundary(self):
        m = moments(gaussian_grid(3.0, 0.01, 4096))
        assert m.mean == pytest.approx(3.0, abs=1e-6)
        assert m.variance == pytest.approx(0.01, abs=1e-5)

    @settings(max_examples=40)
    @given(st.integers(-300, 300))
    def test_circular_shift(self, k):
        g = gaussian_grid(0.5, 0.3, 1024)
        m0 = moments(g)
        shifted = PosteriorGrid1D(np.roll(g.density, k))
        m1 = moments(shifted)
        assert abs(circ_diff(m1.mean, m0.mean + k * g.spacing)) < 1e-9
        assert m1.variance == pytest.approx(m0.variance, abs=1e-9)

    @settings(max_examples=40)
    @given(angles, st.floats(1e-3, 100.0))
    def test_variance_bounded_for_wrapped_normal(self, mu, s2):
        assert 0 <= moments(gaussian_grid(mu, s2, 512)).variance <= np.pi**2 / 3 + 1e-9

    def test_second_moment_can_exceed_uniform_value(self):
        # heavy side lobes just short of flipping the circular mean
        pts = grid_points(4096)
        d = np.zeros(4096)
        for a, w in ((0.0, 0.49), (2.8, 0.255), (-2.8, 0.255)):
            d[np.argmin(np.abs(circ_diff(pts, a)))] += w
        g = PosteriorGrid1D(d / (TWO_PI / 4096))
        m = moments(g)
        assert abs(m.mean) < 0.1
        assert m.variance > np.pi**2 / 3
