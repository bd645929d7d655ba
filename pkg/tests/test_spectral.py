"""Test cases for discrete chains and the spectral verification suite."""

import math

import numpy as np
import pytest

from app.config import VerifySection
from app.errors import CapacityError, DegenerateRestrictionError, NumericError, PathError
from app.spectral import (
    DiscreteChain,
    GridSpec,
    build_projected,
    discretize_st,
    projected_paths,
    restricted_spectral_gap,
    reversible_spectral_gap,
    stationary_vector,
    total_variation,
    verify_canonical_path_bound,
    verify_decomposition_theorem,
    verify_dirichlet_decomposition,
    verify_mixing_bound,
)
from app.spectral.suite import radius_sweep, random_instance, run_verification_suite
from app.spectral.verify import (
    density_sandwich_slack,
    gap_ratio_ok,
    grid_sandwich_slack,
    stationarity_error,
)
from app.target import GaussianMixtureTarget

TWO_STATE = np.array([[0.9, 0.1], [0.2, 0.8]])


@pytest.fixture(scope="module")
def target():
    return GaussianMixtureTarget(means=[[-1.5], [2.0]], covariance=[[0.8]], weights=[0.4, 0.6])


@pytest.fixture(scope="module")
def betas():
    return [0.2, 0.45, 1.0]


def _chain(target, betas, laziness=0.5, lam=1.0 / 3.0, kind="tilde"):
    st = discretize_st(target, betas, GridSpec(8.0, 33), eta=1.0, lam=lam, laziness=laziness, kind=kind)
    return st.with_radius(st.smallest_radius(0.75))


class TestDiscreteChain:
    """Stationary vectors, gaps and distances on small chains."""

    def test_two_state_stationary(self):
        """pi = (2/3, 1/3) for the two-state chain."""
        np.testing.assert_allclose(stationary_vector(TWO_STATE), [2 / 3, 1 / 3], rtol=1e-12)

    def test_two_state_gap(self):
        """Restricted gap on the full space equals 1 - lambda_2 for a reversible chain."""
        chain = DiscreteChain(TWO_STATE)
        assert restricted_spectral_gap(chain) == pytest.approx(0.3, rel=1e-10)
        assert reversible_spectral_gap(chain.P, chain.pi) == pytest.approx(0.3, rel=1e-10)

    def test_rows_must_sum_to_one(self):
        """Non-stochastic matrices are rejected."""
        with pytest.raises(ValueError):
            DiscreteChain(np.array([[0.5, 0.4], [0.2, 0.8]]))

    def test_wrong_stationary_vector(self):
        """A supplied vector that is not stationary is a numeric error."""
        with pytest.raises(NumericError):
            DiscreteChain(TWO_STATE, pi=np.array([0.5, 0.5]))

    def test_zero_mass_state_in_restriction(self):
        """A masked state without stationary mass makes the variance form singular."""
        chain = DiscreteChain(np.eye(3), pi=np.array([0.5, 0.5, 0.0]))
        with pytest.raises(DegenerateRestrictionError):
            restricted_spectral_gap(chain)

    def test_gap_on_partial_mask(self):
        """On two adjacent states of a three-state path the gap matches a scan of g = (s, t)."""
        P = np.array([[0.5, 0.5, 0.0], [0.25, 0.5, 0.25], [0.0, 0.5, 0.5]])
        chain = DiscreteChain(P)
        np.testing.assert_allclose(chain.pi, [0.25, 0.5, 0.25], rtol=1e-12)
        mask = np.array([True, True, False])

        pi = chain.pi[:2]
        ratios = []
        for s, t in [(0.0, 1.0), (0.0, -3.0), (2.0, 0.5), (1.0, 7.0)]:
            g = np.array([s, t])
            energy = 0.5 * sum((g[b] - g[a]) ** 2 * pi[a] * P[a, b] for a in range(2) for b in range(2))
            spread = 0.5 * sum((g[b] - g[a]) ** 2 * pi[a] * pi[b] for a in range(2) for b in range(2))
            ratios.append(energy / spread)
        assert restricted_spectral_gap(chain, mask) == pytest.approx(min(ratios), rel=1e-12)
        assert restricted_spectral_gap(chain, mask) == pytest.approx(1.0, rel=1e-12)

    def test_random_reversible_stationary(self):
        """A random reversible 10-state chain has pi proportional to its row weights."""
        rng = np.random.default_rng(3)
        weights = rng.uniform(0.1, 1.0, size=(10, 10))
        weights = weights + weights.T
        P = weights / weights.sum(axis=1, keepdims=True)
        expected = weights.sum(axis=1) / weights.sum()
        np.testing.assert_allclose(stationary_vector(P), expected, rtol=0.0, atol=1e-10)

    def test_tiny_masses_keep_gap_defined(self):
        """A state of mass 1e-40 leaves the gap defined and equal to the reversible gap."""
        P = np.array([[0.5, 0.5, 0.0], [0.5, 0.5 - 1e-40, 1e-40], [0.0, 0.5, 0.5]])
        pi = np.array([0.5, 0.5 - 1e-40, 1e-40])
        pi = pi / pi.sum()
        chain = DiscreteChain(P, pi=pi)
        assert restricted_spectral_gap(chain) == pytest.approx(0.5, rel=1e-9)
        assert restricted_spectral_gap(chain) == pytest.approx(reversible_spectral_gap(P, pi), rel=1e-9)

    def test_total_variation(self):
        """TV is the L1 distance, between 0 and 2."""
        assert total_variation([1.0, 0.0], [0.0, 1.0]) == 2.0
        assert total_variation([0.5, 0.5], [0.5, 0.5]) == 0.0


class TestDiscretizedTempering:
    """Grid tempering chains and the decomposition checks."""

    def test_stationary_vector_is_exact(self, target, betas):
        """Eigen-computed pi equals r_i p_i on the grid."""
        st = _chain(target, betas)
        assert stationarity_error(st) <= 1e-10
        assert st.base.detailed_balance_residual() <= 1e-12

    def test_grid_mixture_is_exact(self, target, betas):
        """p_i = sum_j w_(i,j) p_(i,j) holds exactly on the grid."""
        st = _chain(target, betas)
        mixed = np.einsum("lj,ljg->lg", st.component_weights, st.component_density)
        np.testing.assert_allclose(mixed, st.level_density, rtol=1e-10, atol=1e-15)

    def test_state_index(self, target, betas):
        """States are flattened level-major."""
        st = _chain(target, betas)
        assert st.state_index(2, 5) == st.n_grid + 5

    def test_boundary_level_move_rejection(self, target, betas):
        """From level 1 the downward proposal always fails, keeping lam/2 on the diagonal."""
        lam = 0.3
        st = discretize_st(target, betas, GridSpec(8.0, 33), eta=1.0, lam=lam)
        local = st.level_chain(1)
        for point in (0, 10, 16, 32):
            s = st.state_index(1, point)
            up = st.core[s, st.state_index(2, point)]
            rejected_up = 0.5 * lam - up
            held = st.core[s, s] - (1.0 - lam) * local[point, point] - rejected_up
            assert held == pytest.approx(0.5 * lam, rel=1e-12)

    def test_symmetric_target_gives_symmetric_pi(self, betas):
        """For a target and grid symmetric under x -> -x the computed pi is symmetric too."""
        mirror = GaussianMixtureTarget(means=[[-2.0], [2.0]], covariance=[[1.0]], weights=[0.5, 0.5])
        st = discretize_st(mirror, betas, GridSpec(8.0, 33), eta=1.0, lam=1.0 / 3.0, laziness=0.5)
        pi = st.base.pi.reshape(st.n_levels, st.n_grid)
        assert np.max(np.abs(pi - pi[:, ::-1])) <= 1e-12

    def test_capacity(self, target):
        """Too many states raise CapacityError."""
        with pytest.raises(CapacityError):
            discretize_st(target, [0.5, 1.0], GridSpec(5.0, 20001), eta=1.0, lam=0.5)

    def test_projected_chain_balance(self, target, betas):
        """The projected chain is reversible with respect to its stationary vector."""
        projected = build_projected(_chain(target, betas))
        assert projected.size == 6
        assert projected.balance_residual() <= 1e-12
        np.testing.assert_allclose(projected.Mbar.sum(axis=1), 1.0, atol=1e-12)
        assert projected.index(2, 1) == 2

    def test_dirichlet_decomposition(self, target, betas):
        """E = (1 - lam) sum r_i E_i + lam E^I on random functions, lazy and not."""
        for laziness in (0.5, 0.0):
            report = verify_dirichlet_decomposition(_chain(target, betas, laziness=laziness), trials=100, seed=1)
            assert report.trials == 100
            assert report.max_relative_error <= 1e-10

    def test_decomposition_theorem(self, target, betas):
        """The restricted gap dominates (1 - zeta)/C_M, lazy and not."""
        for laziness in (0.5, 0.0):
            report = verify_decomposition_theorem(_chain(target, betas, laziness=laziness))
            assert report.holds
            assert report.C1 == 1.0
            assert report.phi >= 0.75
            assert 0.0 < report.theta <= 1.0
            assert report.lazy == (laziness > 0)

    def test_corrupted_constant_fails(self, target, betas):
        """Shrinking C3 by 1e-6 with rare level moves pushes the bound above the gap."""
        st = _chain(target, betas, lam=1e-3)
        assert verify_decomposition_theorem(st).holds
        assert not verify_decomposition_theorem(st, c3_scale=1e-6).holds

    def test_canonical_paths(self, target, betas):
        """Var <= rho E for the level/component path family."""
        st = _chain(target, betas)
        projected = build_projected(st)
        report = verify_canonical_path_bound(
            DiscreteChain(projected.Mbar, pi=projected.Pbar),
            projected_paths(st.n_levels, st.n_components),
            trials=100,
        )
        assert report.holds
        assert report.rho > 0

    def test_path_through_missing_edge(self):
        """Paths that use a zero-probability edge are rejected."""
        chain = DiscreteChain(np.array([[0.5, 0.5, 0.0], [0.25, 0.5, 0.25], [0.0, 0.5, 0.5]]))
        with pytest.raises(PathError):
            verify_canonical_path_bound(chain, {(0, 2): [0, 2]}, trials=1)

    def test_projected_paths_shape(self):
        """Different components switch at level 1."""
        paths = projected_paths(3, 2)
        assert len(paths) == 6 * 5
        assert paths[(5, 4)] == [5, 3, 1, 0, 2, 4]
        assert paths[(0, 4)] == [0, 2, 4]

    def test_mixing_bound(self, target, betas):
        """Exact distribution iteration reaches TV <= eps within the predicted steps."""
        st = _chain(target, betas).with_radius(math.inf)
        report = verify_mixing_bound(st, epsilon=0.1, start="mode")
        assert report.mass_ok and report.gap_ok
        assert report.hypotheses_hold
        assert report.tv <= 0.1
        assert report.level_tv_max <= report.level_bound
        assert report.ok

    def test_mixing_needs_lazy_chain(self, target, betas):
        """The mixing check refuses a non-lazy chain."""
        with pytest.raises(ValueError):
            verify_mixing_bound(_chain(target, betas, laziness=0.0))

    def test_sandwich(self, target, betas):
        """w_min p_tilde <= p <= p_tilde / w_min pointwise and on the grid, and the gap ratio holds."""
        points = np.random.default_rng(0).uniform(-8.0, 8.0, size=(1000, 1))
        for beta in betas:
            assert density_sandwich_slack(target, beta, points) >= -1e-9
        tilde = _chain(target, betas)
        star = _chain(target, betas, kind="tempered").with_radius(tilde.radius)
        assert grid_sandwich_slack(tilde, star) >= -1e-9
        assert gap_ratio_ok(tilde, star)

    def test_radius_sweep(self, target, betas):
        """phi grows with the restriction radius."""
        st = _chain(target, betas)
        sweep = radius_sweep(st, [2.0, 4.0, 8.0])
        assert list(sweep.columns) == ["radius", "phi", "C2", "C3", "holds"]
        assert sweep["phi"].is_monotonic_increasing


class TestVerificationSuite:
    """Randomized instances end to end."""

    @pytest.fixture
    def small(self):
        return VerifySection(instances=3, grid_points=32, extent=10.0)

    def test_random_instance(self, small):
        """Instances respect the configured ranges."""
        for k in range(5):
            target, n_levels = random_instance(small, 0, k)
            assert n_levels in (2, 3)
            assert target.dim == 1
            assert np.all(np.abs(target.means) <= 3.0)
            assert target.w_min >= 0.2 - 1e-12
            assert 0.5 <= target.gamma_min <= 1.5

    def test_all_rows_pass(self, small):
        """Every lazy and non-lazy row passes every check."""
        frame = run_verification_suite(small, seed=0, threads=1)
        assert len(frame) == 6
        assert frame["holds"].all()
        assert (frame["stationarity_error"] <= 1e-10).all()
        assert (frame["dirichlet_error"] <= 1e-10).all()
        assert (frame["balance_residual"] <= 1e-12).all()
        assert frame["passed"].all()
        assert frame["mixing_ok"].dropna().all()

    def test_thread_count_invariance(self, small):
        """Rows are identical for any number of threads."""
        one = run_verification_suite(small, seed=5, threads=1)
        many = run_verification_suite(small, seed=5, threads=3)
        assert one.equals(many)

    def test_shipped_defaults_pass(self):
        """The default configuration verifies every row, including the full-grid mixing runs."""
        frame = run_verification_suite(VerifySection(), seed=0, threads=4)
        assert len(frame) == 40
        assert frame["passed"].all()
        assert frame["mixing_ok"].dropna().all()

    def test_single_level_single_component(self):
        """L = 1 and n = 1 reduce to plain Metropolis: C3 = 0 and the bound still holds."""
        cfg = VerifySection(instances=2, level_choices=[1], components=1, min_weight=1.0)
        frame = run_verification_suite(cfg, seed=0, threads=1)
        assert (frame["L"] == 1).all()
        assert (frame["n"] == 1).all()
        assert (frame["C3"] == 0.0).all()
        assert frame["holds"].all()
        assert frame["sandwich_ratio_ok"].all()
        assert frame["passed"].all()

    def test_three_components(self):
        """Three-component instances pass every check."""
        cfg = VerifySection(instances=2, components=3)
        frame = run_verification_suite(cfg, seed=0, threads=2)
        assert (frame["n"] == 3).all()
        assert frame["passed"].all()
