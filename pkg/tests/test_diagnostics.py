import math
from itertools import permutations

import numpy as np
import pytest

from rankmbo.diagnostics import (
    EvalPool,
    audit_marginal_decomposition,
    audit_mse_to_rank,
    build_ranking_report,
    dist_to_manifold,
    make_eval_pool,
    manifold_distances,
    product_pairs,
    ranking_error,
    ranking_error_vs_radius,
    save_bound_reports,
    save_radius_rows,
    wasserstein1_assignment,
    wasserstein1_sorted,
)
from rankmbo.tasks import OfflineDataset, make_offline_dataset, quadratic_bowl_task


def enumerate_w1(A, B, metric="euclidean"):
    """Brute-force matching optimum over all permutations; independent oracle."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n = len(A)
    best = math.inf
    for perm in permutations(range(n)):
        if metric == "euclidean":
            total = sum(np.linalg.norm(A[i] - B[perm[i]]) for i in range(n))
        else:
            total = sum(
                np.linalg.norm(A[i, 0] - B[perm[i], 0])
                + np.linalg.norm(A[i, 1] - B[perm[i], 1])
                for i in range(n)
            )
        best = min(best, total)
    return best / n


def true_score_fn(pool_like):
    """Score function equal to the bowl's true objective."""
    return lambda X: -np.sum(np.atleast_2d(X) ** 2, axis=1)


class TestRankingError:
    def test_true_function_is_perfect(self):
        task = quadratic_bowl_task(dim=2)
        pool = make_eval_pool(task, 300, 0.1, seed=0)
        err = ranking_error(task.evaluate_batch, pool.near_designs, pool.sub_designs)
        assert err == 0.0

    def test_negated_function_is_fully_wrong(self):
        task = quadratic_bowl_task(dim=2)
        pool = make_eval_pool(task, 300, 0.1, seed=0)
        err = ranking_error(
            lambda X: -task.evaluate_batch(X), pool.near_designs, pool.sub_designs
        )
        assert err == 1.0

    def test_half_wrong_three_points(self):
        scores = {(0.0,): 1.0, (1.0,): 2.0, (2.0,): 0.0}

        def fn(X):
            return np.array([scores[tuple(row)] for row in np.atleast_2d(X)])

        err = ranking_error(fn, np.array([[0.0]]), np.array([[1.0], [2.0]]))
        assert err == 0.5

    def test_within_unit_interval_and_brute_force_equal(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            near = rng.normal(size=(rng.integers(1, 20), 2))
            sub = rng.normal(size=(rng.integers(1, 20), 2))
            w = rng.normal(size=2)
            fn = lambda X: np.atleast_2d(X) @ w
            err = ranking_error(fn, near, sub)
            brute = np.mean(
                [float(fn(a[None])[0] <= fn(b[None])[0]) for a in near for b in sub]
            )
            assert 0.0 <= err <= 1.0
            assert err == brute

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(4)
        near = rng.normal(size=(15, 2))
        sub = rng.normal(size=(25, 2))
        w = rng.normal(size=2)
        base = lambda X: np.atleast_2d(X) @ w
        err = ranking_error(base, near, sub)
        assert ranking_error(lambda X: np.exp(base(X)), near, sub) == err
        assert ranking_error(lambda X: 3.0 * base(X) + 7.0, near, sub) == err

    def test_subsampled_path_close_to_exhaustive(self):
        rng = np.random.default_rng(5)
        near = rng.normal(size=(100, 2))
        sub = rng.normal(size=(100, 2))
        w = rng.normal(size=2)
        fn = lambda X: np.atleast_2d(X) @ w
        exact = ranking_error(fn, near, sub)
        approx = ranking_error(fn, near, sub, pair_cap=5000, seed=8)
        assert abs(exact - approx) < 0.05

    def test_empty_side_rejected(self):
        with pytest.raises(ValueError):
            ranking_error(lambda X: np.zeros(len(X)), np.zeros((0, 2)), np.zeros((3, 2)))


class TestManifoldDistance:
    def test_member_distance_zero(self):
        M = np.array([[0.0, 0.0], [1.0, 1.0]])
        assert dist_to_manifold(np.array([1.0, 1.0]), M) == 0.0

    def test_three_four_five(self):
        assert dist_to_manifold(np.array([3.0, 4.0]), np.zeros((1, 2))) == 5.0

    def test_adding_points_never_increases_distance(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            M = rng.normal(size=(10, 3))
            extra = rng.normal(size=(5, 3))
            x = rng.normal(size=3)
            d1 = dist_to_manifold(x, M)
            d2 = dist_to_manifold(x, np.vstack([M, extra]))
            assert d2 <= d1

    def test_batch_matches_single(self):
        rng = np.random.default_rng(7)
        M = rng.normal(size=(20, 2))
        X = rng.normal(size=(9, 2))
        batch = manifold_distances(X, M)
        singles = np.array([dist_to_manifold(x, M) for x in X])
        assert np.allclose(batch, singles, atol=0)


class TestRadiusSweep:
    def _setup(self):
        task = quadratic_bowl_task(dim=2)
        ds = make_offline_dataset(task, 300, 0.6, seed=1)
        pool = make_eval_pool(task, 400, 0.05, seed=2)
        return task, ds, pool

    def test_large_radius_equals_overall(self):
        task, ds, pool = self._setup()
        fn = task.evaluate_batch
        rows = ranking_error_vs_radius(fn, pool, ds.designs, [1e9])
        overall = ranking_error(fn, pool.near_designs, pool.sub_designs)
        assert rows[0].error == overall
        assert rows[0].n_restricted == len(pool.sub_idx)

    def test_tiny_radius_gives_null_row(self):
        task, ds, pool = self._setup()
        rows = ranking_error_vs_radius(task.evaluate_batch, pool, ds.designs, [1e-12, 1e9])
        assert rows[0].n_restricted == 0
        assert rows[0].error is None
        assert rows[1].error is not None

    def test_restricted_sets_are_nested(self):
        task, ds, pool = self._setup()
        radii = [0.1, 0.3, 0.8, 2.0]
        d_sub = manifold_distances(pool.sub_designs, ds.designs)
        sizes = [int((d_sub <= r).sum()) for r in radii]
        rows = ranking_error_vs_radius(task.evaluate_batch, pool, ds.designs, radii)
        assert [r.n_restricted for r in rows] == sizes
        assert sizes == sorted(sizes)

    def test_radii_validation(self):
        task, ds, pool = self._setup()
        with pytest.raises(ValueError):
            ranking_error_vs_radius(task.evaluate_batch, pool, ds.designs, [2.0, 1.0])
        with pytest.raises(ValueError):
            ranking_error_vs_radius(task.evaluate_batch, pool, ds.designs, [-1.0])

    def test_report_fields(self):
        task, ds, pool = self._setup()
        report = build_ranking_report(
            task.evaluate_batch, pool, ds, [0.5, 1.0, 2.0], w1_sample_size=16, seed=0
        )
        assert report.overall_error == 0.0
        assert report.value_gap > 0.0
        assert report.w1_near >= 0.0
        assert report.mean_dist_to_manifold >= 0.0
        assert report.manifold_diameter > 0.0
        assert report.n_near == len(pool.near_idx)


class TestWassersteinSorted:
    def test_identical_lists(self):
        assert wasserstein1_sorted([1.0, 2.0], [2.0, 1.0]) == 0.0

    def test_singletons(self):
        assert wasserstein1_sorted([0.0], [3.0]) == 3.0

    def test_matched_shift(self):
        assert wasserstein1_sorted([0.0, 1.0], [1.0, 2.0]) == 1.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            wasserstein1_sorted([0.0], [1.0, 2.0])


class TestWassersteinAssignment:
    def test_identical_sets_zero(self):
        rng = np.random.default_rng(8)
        A = rng.normal(size=(10, 3))
        assert wasserstein1_assignment(A, A.copy()) == 0.0

    def test_matches_sorted_in_one_dimension(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            n = int(rng.integers(1, 40))
            a = rng.normal(size=n)
            b = rng.normal(size=n)
            assert wasserstein1_assignment(a, b) == pytest.approx(
                wasserstein1_sorted(a, b), abs=1e-12
            )

    def test_matches_enumeration_small_n(self):
        rng = np.random.default_rng(10)
        for _ in range(25):
            n = int(rng.integers(1, 7))
            d = int(rng.integers(1, 4))
            A = rng.normal(size=(n, d))
            B = rng.normal(size=(n, d))
            assert wasserstein1_assignment(A, B) == pytest.approx(
                enumerate_w1(A, B), abs=1e-9
            )

    def test_pair_metric_matches_enumeration(self):
        rng = np.random.default_rng(11)
        for _ in range(15):
            n = int(rng.integers(1, 6))
            A = rng.normal(size=(n, 2, 2))
            B = rng.normal(size=(n, 2, 2))
            assert wasserstein1_assignment(A, B, metric="pair") == pytest.approx(
                enumerate_w1(A, B, metric="pair"), abs=1e-9
            )

    def test_metric_axioms(self):
        rng = np.random.default_rng(12)
        for _ in range(30):
            n = int(rng.integers(2, 12))
            A = rng.normal(size=(n, 2))
            B = rng.normal(size=(n, 2))
            C = rng.normal(size=(n, 2))
            dab = wasserstein1_assignment(A, B)
            dba = wasserstein1_assignment(B, A)
            dac = wasserstein1_assignment(A, C)
            dcb = wasserstein1_assignment(C, B)
            assert dab >= 0.0
            assert dab == pytest.approx(dba, abs=1e-9)
            assert dab <= dac + dcb + 1e-9
        # identity of indiscernibles on point sets
        A = rng.normal(size=(6, 2))
        assert wasserstein1_assignment(A, np.random.default_rng(1).permutation(A)) == pytest.approx(0.0, abs=1e-12)

    def test_product_sample_bounded_by_marginal_sum(self):
        # product built from 2 x 3 marginals stays within brute-force reach
        rng = np.random.default_rng(13)
        for _ in range(20):
            first_a, second_a = rng.normal(size=(2, 2)), rng.normal(size=(3, 2))
            first_b, second_b = rng.normal(size=(2, 2)), rng.normal(size=(3, 2))
            prod_a = product_pairs(first_a, second_a)
            prod_b = product_pairs(first_b, second_b)
            lhs = wasserstein1_assignment(prod_a, prod_b, metric="pair")
            assert lhs == pytest.approx(enumerate_w1(prod_a, prod_b, metric="pair"), abs=1e-9)
            rhs = wasserstein1_assignment(first_a, first_b) + wasserstein1_assignment(
                second_a, second_b
            )
            assert lhs <= rhs + 1e-9

    def test_size_cap_and_mismatch(self):
        with pytest.raises(ValueError):
            wasserstein1_assignment(np.zeros((3, 1)), np.zeros((4, 1)))
        with pytest.raises(ValueError):
            wasserstein1_assignment(np.zeros((600, 1)), np.zeros((600, 1)))
        with pytest.raises(ValueError):
            wasserstein1_assignment(np.zeros((2, 2)), np.zeros((2, 3)))


class TestAuditMseToRank:
    def _pool(self, seed=0):
        rng = np.random.default_rng(seed)
        near = rng.uniform(-1.0, 1.0, size=(20, 2))
        sub = rng.uniform(2.0, 4.0, size=(40, 2))

        def truth(X):
            return -np.sum(np.atleast_2d(X) ** 2, axis=1)

        return near, sub, truth(near), truth(sub), truth

    def test_truth_scorer_gives_zero_both_sides(self):
        near, sub, f_near, f_sub, truth = self._pool()
        rep = audit_mse_to_rank(truth, near, sub, f_near, f_sub)
        assert rep.applicable
        assert rep.lhs == 0.0
        assert rep.rhs == 0.0
        assert rep.holds

    def test_constant_shift_keeps_ranking(self):
        near, sub, f_near, f_sub, truth = self._pool()
        shifted = lambda X: truth(X) + 5.0
        rep = audit_mse_to_rank(shifted, near, sub, f_near, f_sub)
        assert rep.lhs == 0.0
        expected_rhs = 4.0 / rep.value_gap**2 * (25.0 + 25.0)
        assert rep.rhs == pytest.approx(expected_rhs)
        assert rep.holds

    def test_nonpositive_gap_flagged_inapplicable(self):
        near, sub, f_near, f_sub, truth = self._pool()
        rep = audit_mse_to_rank(truth, near, sub, f_sub[:20], f_near, tol=1e-9)
        assert not rep.applicable
        assert rep.holds is None

    def test_random_scorers_never_violate(self):
        near, sub, f_near, f_sub, _ = self._pool(seed=1)
        rng = np.random.default_rng(2)
        for _ in range(50):
            w = rng.normal(size=2)
            b = rng.normal()
            fn = lambda X: np.atleast_2d(X) @ w + b
            rep = audit_mse_to_rank(fn, near, sub, f_near, f_sub)
            assert rep.applicable and rep.holds


class TestAuditMarginalDecomposition:
    def test_identical_samples_zero_both_sides(self):
        rng = np.random.default_rng(14)
        s = rng.normal(size=(4, 2))
        rep = audit_marginal_decomposition(s, s, s, s)
        assert rep.lhs == pytest.approx(0.0, abs=1e-12)
        assert rep.rhs == pytest.approx(0.0, abs=1e-12)
        assert rep.holds

    def test_singleton_transport_is_forced(self):
        rep = audit_marginal_decomposition(
            np.array([[0.0]]), np.array([[10.0]]), np.array([[1.0]]), np.array([[9.0]])
        )
        assert rep.lhs == pytest.approx(2.0)
        assert rep.rhs == pytest.approx(2.0)
        assert rep.holds

    def test_random_trials_never_violate(self):
        rng = np.random.default_rng(15)
        for _ in range(30):
            samples = [rng.normal(size=(8, 2)) for _ in range(4)]
            rep = audit_marginal_decomposition(*samples)
            assert rep.holds

    def test_size_validation(self):
        with pytest.raises(ValueError):
            audit_marginal_decomposition(
                np.zeros((2, 1)), np.zeros((3, 1)), np.zeros((2, 1)), np.zeros((2, 1))
            )
        with pytest.raises(ValueError):
            audit_marginal_decomposition(
                np.zeros((65, 1)), np.zeros((65, 1)), np.zeros((65, 1)), np.zeros((65, 1))
            )


class TestReportSerialization:
    def test_radius_rows_csv(self, tmp_path):
        from rankmbo.diagnostics import RadiusRow

        rows = [RadiusRow(0.5, 10, 0.25), RadiusRow(1.0, 0, None)]
        save_radius_rows(rows, tmp_path / "r.csv")
        lines = (tmp_path / "r.csv").read_text().splitlines()
        assert lines[0] == "d,n_restricted,rank_error"
        assert lines[1] == "0.5,10,0.25"
        assert lines[2] == "1,0,"

    def test_bound_reports_csv(self, tmp_path):
        from rankmbo.diagnostics import BoundReport

        reports = [
            BoundReport(lhs=0.125, rhs=0.5, holds=True, applicable=True),
            BoundReport(lhs=float("nan"), rhs=float("nan"), holds=None, applicable=False),
        ]
        save_bound_reports(reports, tmp_path / "b.csv")
        lines = (tmp_path / "b.csv").read_text().splitlines()
        assert lines[0] == "trial,lhs,rhs,holds"
        assert lines[1] == "0,0.125,0.5,1"
        assert lines[2].startswith("1,nan,nan,")


def test_eval_pool_partitions_by_true_score():
    task = quadratic_bowl_task(dim=2)
    pool = make_eval_pool(task, 200, 0.1, seed=3)
    assert len(pool.near_idx) + len(pool.sub_idx) == 200
    assert pool.true_scores[pool.near_idx].min() >= pool.true_scores[pool.sub_idx].max()
    # near side really is the top of the true scores
    assert pool.true_scores[pool.near_idx].min() >= np.quantile(pool.true_scores, 0.85)
