"""Test cases for Gaussian mixture targets."""

import numpy as np
import pytest
from scipy.special import logsumexp

from app.target import (
    GaussianMixtureTarget,
    TemperedDensity,
    potential,
    tempered_log_density_unnorm,
    tilde_log_density_unnorm,
)


@pytest.fixture
def two_modes():
    return GaussianMixtureTarget(
        means=[[-2.0, 0.0], [3.0, 1.0]],
        covariance=[[2.0, 0.0], [0.0, 0.5]],
        weights=[0.3, 0.7],
    )


class TestGaussianMixtureTarget:
    """Construction and derived constants."""

    def test_constants(self, two_modes):
        """Eigenvalue constants, weights and separation follow the parameters."""
        assert two_modes.dim == 2
        assert two_modes.n_components == 2
        assert two_modes.gamma_min == pytest.approx(0.5)
        assert two_modes.gamma_max == pytest.approx(2.0)
        assert two_modes.kappa == pytest.approx(4.0)
        assert two_modes.w_min == pytest.approx(0.3)
        assert two_modes.separation == pytest.approx(np.sqrt(10.0))

    def test_separation_floor(self):
        """D never drops below sqrt(gamma_min), even for coincident means."""
        target = GaussianMixtureTarget(means=[[0.0], [0.0]], covariance=[[4.0]], weights=[0.5, 0.5])
        assert target.separation == pytest.approx(2.0)

    def test_symmetric_pair(self):
        """The two-mode benchmark puts its means at +-(D/(2 sqrt 2)) (1, 1)."""
        target = GaussianMixtureTarget.symmetric_pair(8.0)
        offset = 8.0 / (2.0 * np.sqrt(2.0))
        np.testing.assert_allclose(target.means, [[-offset, -offset], [offset, offset]])
        np.testing.assert_allclose(target.covariance, np.eye(2))
        np.testing.assert_allclose(target.weights, [0.5, 0.5])
        assert target.separation == pytest.approx(4.0)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(means=[[0.0]], covariance=[[1.0]], weights=[0.9]),
            dict(means=[[0.0], [1.0]], covariance=[[1.0]], weights=[1.2, -0.2]),
            dict(means=[[0.0, 0.0]], covariance=[[1.0, 2.0], [2.0, 1.0]], weights=[1.0]),
            dict(means=[[0.0, 0.0]], covariance=[[1.0, 0.5], [0.0, 1.0]], weights=[1.0]),
            dict(means=[[0.0, 0.0]], covariance=[[1.0]], weights=[1.0]),
        ],
    )
    def test_invalid_parameters(self, kwargs):
        """Bad weights, non-SPD or mis-shaped covariances raise ValueError."""
        with pytest.raises(ValueError):
            GaussianMixtureTarget(**kwargs)


class TestDensities:
    """Potential and tempered densities."""

    def test_potential_matches_direct_formula(self, two_modes):
        """f(x) = -log sum_j w_j exp(-q_j(x)/2) with Mahalanobis forms q_j."""
        x = np.array([0.5, -0.25])
        inv = np.linalg.inv(two_modes.covariance)
        q = [float((x - m) @ inv @ (x - m)) for m in two_modes.means]
        expected = -logsumexp(np.log(two_modes.weights) - 0.5 * np.array(q))
        assert potential(two_modes, x) == pytest.approx(expected, rel=1e-12)

    def test_single_component_minimum(self):
        """A one-component target has f(mu) = 0."""
        target = GaussianMixtureTarget(means=[[1.0, 2.0]], covariance=np.eye(2), weights=[1.0])
        assert target.potential([1.0, 2.0]) == pytest.approx(0.0, abs=1e-14)

    def test_batched_points(self, two_modes):
        """Batches of points give one value per point."""
        pts = np.zeros((4, 3, 2))
        assert two_modes.quadratic_forms(pts).shape == (4, 3, 2)
        assert np.asarray(two_modes.potential(pts)).shape == (4, 3)

    def test_wrong_dimension(self, two_modes):
        """Points of the wrong dimension are rejected."""
        with pytest.raises(ValueError):
            two_modes.potential([1.0, 2.0, 3.0])

    def test_tilde_equals_target_at_beta_one(self, two_modes):
        """At beta = 1 the component-wise tempered mixture is the target itself."""
        pts = np.random.default_rng(0).normal(size=(10, 2))
        np.testing.assert_allclose(
            tilde_log_density_unnorm(two_modes, 1.0, pts), -np.asarray(two_modes.potential(pts)), rtol=1e-12
        )

    def test_tempered_density(self, two_modes):
        """log p_beta = -beta f."""
        td = TemperedDensity(two_modes, 0.25)
        x = np.array([1.0, 1.0])
        assert tempered_log_density_unnorm(td, x) == pytest.approx(-0.25 * two_modes.potential(x))

    @pytest.mark.parametrize("beta", [0.0, -0.5, 1.5])
    def test_beta_out_of_range(self, two_modes, beta):
        """Inverse temperatures outside (0, 1] raise ValueError."""
        with pytest.raises(ValueError):
            TemperedDensity(two_modes, beta)
        with pytest.raises(ValueError):
            two_modes.tilde_log_density_unnorm(beta, [0.0, 0.0])

    def test_far_point_is_stable(self):
        """At |x| = 1e3 the potential is finite and matches the min-shifted sum to 1e-12."""
        target = GaussianMixtureTarget.symmetric_pair(8.0)
        x = np.array([1e3, 0.0])
        q = np.array([float(np.sum((x - m) ** 2)) for m in target.means])
        shifted = 0.5 * q.min() - np.log(np.sum(0.5 * np.exp(-0.5 * (q - q.min()))))
        value = target.potential(x)
        assert np.isfinite(value)
        assert abs(value - shifted) <= 1e-12 * abs(shifted)

    def test_potential_at_origin_for_wide_pair(self):
        """For D = 30 both modes sit at distance 15, so f(0) = 225 / 2."""
        target = GaussianMixtureTarget.symmetric_pair(30.0)
        assert target.potential([0.0, 0.0]) == pytest.approx(112.5, rel=1e-12)
