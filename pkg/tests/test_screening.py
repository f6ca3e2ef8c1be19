import numpy as np
import pytest

from rarsel import (
    Dataset,
    ScenarioSpec,
    default_screen_size,
    isis_select,
    marginal_coefficients,
    permutation_threshold,
    retain,
    sample_dataset,
    sis_select,
    standardize,
)
from rarsel.experiment import derive_seed
from rarsel.screening import ScreeningError
from rarsel.solver import SolverConfig

MC_SOLVER = SolverConfig(lambda_min_ratio=0.01, max_active=375)


class TestMarginalCoefficients:
    def test_exact_univariate_slope(self):
        x = np.array([[1.0], [2.0], [3.0], [4.0]])
        y = 2.0 * x[:, 0]
        stats = marginal_coefficients(Dataset(x, y))
        assert abs(stats.coef[0] - 2.0) < 1e-12

    def test_orthogonal_column_zero(self):
        # centered second column is exactly orthogonal to centered y
        x = np.column_stack([np.arange(5.0), [1.0, -2.0, 1.0, 0.0, 0.0]])
        y = np.array([1.0, 1.0, 1.0, 2.0, -5.0])  # sums to 0, y . x2c = 0
        stats = marginal_coefficients(Dataset(x, y))
        assert stats.coef[1] == 0.0

    def test_rank_ties_broken_by_index(self):
        x = np.column_stack(
            [[1.0, -1.0, 1.0, -1.0], [-1.0, 1.0, -1.0, 1.0], [1.0, -1.0, -1.0, 1.0]]
        )
        y = np.array([0.5, -0.5, 0.5, -0.5])
        stats = marginal_coefficients(Dataset(x, y))
        # columns 0 and 1 have |coef| 0.5, column 2 has 0
        assert stats.abs_rank.tolist() == [0, 1, 2]

    def test_constant_column_flagged(self):
        x = np.column_stack([np.full(4, 3.0), np.arange(4.0)])
        stats = marginal_coefficients(Dataset(x, np.arange(4.0)))
        assert stats.constant_columns == (0,)
        assert stats.coef[0] == 0.0

    def test_all_constant_errors(self):
        x = np.ones((4, 2))
        with pytest.raises(ScreeningError):
            marginal_coefficients(Dataset(x, np.arange(4.0)))


class TestSisSelect:
    def test_full_budget_keeps_everything(self, small_dataset):
        stats = marginal_coefficients(small_dataset)
        assert sis_select(stats, 6).tolist() == [0, 1, 2, 3, 4, 5]

    def test_direct_ranking(self):
        x = np.column_stack(
            [[1.0, -1.0, 1.0, -1.0], [1.0, -1.0, -1.0, 1.0], [1.0, 1.0, -1.0, -1.0]]
        )
        y = 0.5 * x[:, 0] + 0.4 * x[:, 1] + 0.1 * x[:, 2]
        stats = marginal_coefficients(Dataset(x, y))
        assert sis_select(stats, 2).tolist() == [0, 1]

    def test_nesting(self, small_dataset):
        stats = marginal_coefficients(small_dataset)
        previous = set()
        for d in range(1, 7):
            current = set(sis_select(stats, d).tolist())
            assert previous <= current
            previous = current

    def test_default_budget(self):
        assert default_screen_size(300) == 52

    def test_bounds(self, small_dataset):
        stats = marginal_coefficients(small_dataset)
        with pytest.raises(ScreeningError):
            sis_select(stats, 0)
        with pytest.raises(ScreeningError):
            sis_select(stats, 7)


class TestPermutationThreshold:
    def test_constant_response_zero(self):
        x = np.column_stack([np.arange(6.0), np.arange(6.0) ** 2])
        ds = Dataset(x, np.full(6, 2.0))
        assert permutation_threshold(ds, 5, seed=3) == 0.0

    def test_monotone_in_m_with_prefix_permutations(self, small_dataset):
        values = [permutation_threshold(small_dataset, m, seed=11) for m in (1, 5, 15, 30)]
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_deterministic(self, small_dataset):
        a = permutation_threshold(small_dataset, 8, seed=21)
        b = permutation_threshold(small_dataset, 8, seed=21)
        assert a == b
        assert permutation_threshold(small_dataset, 8, seed=22) != a

    def test_column_order_invariance(self, small_dataset):
        shuffled = Dataset(small_dataset.x[:, ::-1], small_dataset.y)
        a = permutation_threshold(small_dataset, 6, seed=4)
        b = permutation_threshold(shuffled, 6, seed=4)
        assert a == b  # max over columns is order-free


class TestRetain:
    def _stats(self, coef):
        p = len(coef)
        x = np.random.default_rng(0).standard_normal((8, p))
        stats = marginal_coefficients(Dataset(x, np.zeros(8) + x[:, 0]))
        # overwrite with the synthetic coefficients, keeping the dataclass shape
        order = np.lexsort((np.arange(p), -np.abs(np.asarray(coef))))
        return type(stats)(coef=np.asarray(coef, dtype=float), abs_rank=order)

    def test_direct_threshold(self):
        result = retain(self._stats([0.5, 0.4, 0.1]), gamma=0.3, n=100)
        assert result.retained.tolist() == [0, 1]
        assert not result.capped

    def test_empty_retention_is_legal(self):
        result = retain(self._stats([0.5, 0.4, 0.1]), gamma=0.6, n=100)
        assert result.retained.size == 0

    def test_cap_applies(self):
        result = retain(self._stats([0.5, 0.4, 0.1, 0.3, 0.2]), gamma=0.0, n=9)
        assert result.capped
        assert result.retained.tolist() == [0, 1, 3]  # top ceil(sqrt(9)) = 3

    def test_monotone_in_gamma(self):
        stats = self._stats([0.5, 0.4, 0.1, 0.3, 0.2])
        previous = set(retain(stats, 0.0, n=10_000).retained.tolist())
        for gamma in (0.15, 0.25, 0.35, 0.45, 0.55):
            current = set(retain(stats, gamma, n=10_000).retained.tolist())
            assert current <= previous
            previous = current

    def test_negative_gamma_rejected(self):
        with pytest.raises(ScreeningError):
            retain(self._stats([0.5]), gamma=-0.1, n=10)


class TestIsisSelect:
    def test_single_iteration_equals_sis(self, small_dataset):
        stats = marginal_coefficients(small_dataset)
        assert np.array_equal(
            isis_select(small_dataset, d_n=3, iterations=1),
            sis_select(stats, 3),
        )

    def test_truncates_to_budget(self, small_dataset):
        out = isis_select(small_dataset, d_n=2, iterations=3, per_iter=4)
        assert out.size == 2

    def test_early_termination_on_dead_residual_screen(self):
        rng = np.random.default_rng(6)
        x = np.column_stack([rng.standard_normal(20), np.full(20, 1.0), np.full(20, 2.0)])
        y = 2.0 * x[:, 0]
        out = isis_select(Dataset(x, y), d_n=3, iterations=5, per_iter=1)
        assert out.tolist() == [0]  # remaining columns are constant: screen dies

    def test_iteration_budget_respected(self, small_dataset):
        out = isis_select(small_dataset, d_n=6, iterations=2, per_iter=2)
        assert out.size == 4  # 2 rounds x 2 picks


class TestMonteCarloBehavior:
    """Frozen Monte-Carlo rates (fixed seed streams, measured once)."""

    def test_isis_recovers_weak_marginal_signal(self):
        # In the equicorrelated scenario the second signal is almost
        # marginally silent; residual screening finds it in round two.
        # Measured 100/100 over the full seed stream.
        spec = ScenarioSpec.named("1A", 500)
        hits = 0
        n_seeds = 25
        for s in range(n_seeds):
            ds = standardize(sample_dataset(spec, derive_seed("isis-oracle", s)))
            kept = isis_select(ds, d_n=80, iterations=2, config=MC_SOLVER)
            hits += 1 in kept
        assert hits >= 0.8 * n_seeds

    def test_permutation_threshold_band(self):
        # Band event: the strongest signal is retained while every noise
        # outside the correlated block stays below the threshold.  Measured
        # rate 0.910 over 200 seeds (m = 10); assert a safe margin below.
        spec = ScenarioSpec.named("1A", 500)
        hits = 0
        n_seeds = 60
        for s in range(n_seeds):
            ds = standardize(sample_dataset(spec, derive_seed("pth-oracle", s)))
            stats = marginal_coefficients(ds)
            gamma = permutation_threshold(ds, 10, derive_seed("pth-seed", s))
            retained = retain(stats, gamma, ds.n_samples).retained
            hits += (0 in retained) and (np.abs(stats.coef[8:]).max() < gamma)
        assert hits >= 0.80 * n_seeds
