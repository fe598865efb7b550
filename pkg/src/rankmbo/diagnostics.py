"""Theory-facing measurements for trained surrogates.

The central quantity is the optimization-oriented ranking error: the
probability that a surrogate scores a near-optimal design at or below a
suboptimal one, estimated over the full product of a fresh evaluation pool's
top-quantile set and its complement.  The module also measures how that error
grows as the suboptimal side is restricted to within a radius of the data
manifold, computes empirical 1-Wasserstein distances by exact minimum-cost
matching (including the additive pair metric on products of design pairs),
and numerically audits two inequalities: the squared-error-to-ranking
reduction with constant 4 / gap^2, and the decomposition of the pair-metric
transport cost into the sum of its marginal transport costs.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .objectives import partition_scores, zero_one_rank_loss
from .tasks import OfflineDataset, TaskSpec

__all__ = [
    "EvalPool",
    "RadiusRow",
    "RankingErrorReport",
    "BoundReport",
    "make_eval_pool",
    "ranking_error",
    "dist_to_manifold",
    "manifold_distances",
    "manifold_diameter",
    "ranking_error_vs_radius",
    "build_ranking_report",
    "wasserstein1_sorted",
    "wasserstein1_assignment",
    "product_pairs",
    "audit_mse_to_rank",
    "audit_marginal_decomposition",
    "save_radius_rows",
    "save_bound_reports",
    "save_report_summary",
]

PAIR_CAP = 10_000_000
ASSIGNMENT_CAP = 512
AUDIT_TOL = 1e-9


@dataclass
class EvalPool:
    """A large fresh sample of designs with true scores, used only for evaluation.

    The pool is split at the top-quantile threshold of the true scores into the
    near-optimal side and its complement, mirroring how the offline dataset is
    partitioned but on unseen ground truth.
    """

    designs: np.ndarray
    true_scores: np.ndarray
    near_fraction: float
    seed: int
    threshold: float = field(init=False)
    near_idx: np.ndarray = field(init=False)
    sub_idx: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.designs = np.asarray(self.designs, dtype=float)
        self.true_scores = np.asarray(self.true_scores, dtype=float)
        part = partition_scores(self.true_scores, self.near_fraction)
        self.threshold = part.threshold
        self.near_idx = part.near_idx
        self.sub_idx = part.sub_idx

    @property
    def near_designs(self) -> np.ndarray:
        return self.designs[self.near_idx]

    @property
    def sub_designs(self) -> np.ndarray:
        return self.designs[self.sub_idx]


@dataclass
class RadiusRow:
    radius: float
    n_restricted: int
    error: float | None


@dataclass
class RankingErrorReport:
    rows: list[RadiusRow]
    overall_error: float
    value_gap: float
    w1_near: float
    mean_dist_to_manifold: float
    manifold_diameter: float
    near_fraction: float
    n_near: int
    n_sub: int
    seed: int


@dataclass
class BoundReport:
    lhs: float
    rhs: float
    holds: bool | None
    applicable: bool
    value_gap: float | None = None


def make_eval_pool(
    task: TaskSpec, size: int, near_fraction: float, seed: int
) -> EvalPool:
    rng = np.random.default_rng(seed)
    designs = rng.uniform(task.lower, task.upper, size=(size, task.dim))
    return EvalPool(
        designs=designs,
        true_scores=task.evaluate_batch(designs),
        near_fraction=near_fraction,
        seed=seed,
    )


def ranking_error(
    score_fn,
    near: np.ndarray,
    sub: np.ndarray,
    pair_cap: int = PAIR_CAP,
    seed: int = 0,
) -> float:
    """Fraction of (near, sub) pairs the scorer ranks incorrectly (ties count).

    Exhaustive over the full product when it has at most ``pair_cap`` pairs;
    otherwise a seeded uniform subsample of ``pair_cap`` pairs.
    """
    near = np.atleast_2d(np.asarray(near, dtype=float))
    sub = np.atleast_2d(np.asarray(sub, dtype=float))
    if len(near) == 0 or len(sub) == 0:
        raise ValueError("both design sets must be non-empty")
    h_near = np.asarray(score_fn(near), dtype=float)
    h_sub = np.asarray(score_fn(sub), dtype=float)
    n_pairs = len(near) * len(sub)
    if n_pairs <= pair_cap:
        return float(np.mean(h_near[:, None] <= h_sub[None, :]))
    rng = np.random.default_rng(seed)
    i = rng.integers(0, len(near), size=pair_cap)
    j = rng.integers(0, len(sub), size=pair_cap)
    return float(np.mean(zero_one_rank_loss(h_near[i], h_sub[j])))


def manifold_distances(X: np.ndarray, manifold: np.ndarray) -> np.ndarray:
    """Euclidean distance from each row of X to its nearest manifold point."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    manifold = np.atleast_2d(np.asarray(manifold, dtype=float))
    if len(manifold) == 0:
        raise ValueError("manifold must be non-empty")
    out = np.empty(len(X))
    chunk = max(1, 2_000_000 // max(1, len(manifold)))
    for start in range(0, len(X), chunk):
        stop = min(start + chunk, len(X))
        out[start:stop] = cdist(X[start:stop], manifold).min(axis=1)
    return out


def dist_to_manifold(x: np.ndarray, manifold: np.ndarray) -> float:
    """Exact nearest-neighbor distance of a single design to the manifold."""
    x = np.asarray(x, dtype=float)
    return float(manifold_distances(x[None, :], manifold)[0])


def manifold_diameter(manifold: np.ndarray) -> float:
    manifold = np.atleast_2d(np.asarray(manifold, dtype=float))
    best = 0.0
    chunk = max(1, 2_000_000 // max(1, len(manifold)))
    for start in range(0, len(manifold), chunk):
        stop = min(start + chunk, len(manifold))
        best = max(best, float(cdist(manifold[start:stop], manifold).max()))
    return best


def ranking_error_vs_radius(
    score_fn,
    pool: EvalPool,
    manifold: np.ndarray,
    radii,
    pair_cap: int = PAIR_CAP,
    seed: int = 0,
) -> list[RadiusRow]:
    """Ranking error with the suboptimal side restricted to within each radius
    of the manifold.  Radii must be positive and ascending, so the restricted
    sets are nested.  Empty restrictions yield a row with a null estimate.
    """
    radii = [float(r) for r in radii]
    if any(r <= 0.0 for r in radii):
        raise ValueError("radii must be positive")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly ascending")
    d_sub = manifold_distances(pool.sub_designs, manifold)
    rows: list[RadiusRow] = []
    for radius in radii:
        mask = d_sub <= radius
        n = int(mask.sum())
        if n == 0:
            rows.append(RadiusRow(radius=radius, n_restricted=0, error=None))
            continue
        err = ranking_error(
            score_fn, pool.near_designs, pool.sub_designs[mask], pair_cap, seed
        )
        rows.append(RadiusRow(radius=radius, n_restricted=n, error=err))
    return rows


def build_ranking_report(
    score_fn,
    pool: EvalPool,
    dataset: OfflineDataset,
    radii,
    w1_sample_size: int = 128,
    pair_cap: int = PAIR_CAP,
    seed: int = 0,
) -> RankingErrorReport:
    """Radius sweep plus the scalar terms of the error decomposition: the
    empirical margin between the two pool sides, the transport distance from
    the near side to the training marginal, and the mean distance of the near
    side to the data manifold (with the manifold diameter as the calibration
    constant)."""
    manifold = dataset.designs
    rows = ranking_error_vs_radius(score_fn, pool, manifold, radii, pair_cap, seed)
    overall = ranking_error(
        score_fn, pool.near_designs, pool.sub_designs, pair_cap, seed
    )
    f_near = pool.true_scores[pool.near_idx]
    f_sub = pool.true_scores[pool.sub_idx]
    gap = float(f_near.min() - f_sub.max())

    rng = np.random.default_rng(seed)
    n = min(w1_sample_size, len(pool.near_idx), len(manifold))
    near_sample = pool.near_designs[rng.choice(len(pool.near_idx), n, replace=False)]
    manifold_sample = manifold[rng.choice(len(manifold), n, replace=False)]
    w1 = wasserstein1_assignment(near_sample, manifold_sample, metric="euclidean")

    return RankingErrorReport(
        rows=rows,
        overall_error=overall,
        value_gap=gap,
        w1_near=w1,
        mean_dist_to_manifold=float(
            manifold_distances(pool.near_designs, manifold).mean()
        ),
        manifold_diameter=manifold_diameter(manifold),
        near_fraction=pool.near_fraction,
        n_near=len(pool.near_idx),
        n_sub=len(pool.sub_idx),
        seed=seed,
    )


def wasserstein1_sorted(a, b) -> float:
    """Closed-form 1-D empirical W1 between equal-size samples: sort and match."""
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if len(a) != len(b):
        raise ValueError("samples must have equal length")
    if len(a) == 0:
        raise ValueError("samples must be non-empty")
    return float(np.mean(np.abs(np.sort(a) - np.sort(b))))


def _pair_cost(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return cdist(A[:, 0, :], B[:, 0, :]) + cdist(A[:, 1, :], B[:, 1, :])


def wasserstein1_assignment(
    A: np.ndarray,
    B: np.ndarray,
    metric: str = "euclidean",
    max_points: int = ASSIGNMENT_CAP,
) -> float:
    """Exact empirical W1 between equal-size samples via min-cost matching.

    ``euclidean`` expects (n, d) design arrays (1-D inputs are treated as
    (n, 1)); ``pair`` expects (n, 2, d) arrays of design pairs and uses the
    additive metric ||x - z|| + ||x' - z'||.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if metric == "euclidean":
        if A.ndim == 1:
            A = A[:, None]
        if B.ndim == 1:
            B = B[:, None]
        if A.ndim != 2 or B.ndim != 2:
            raise ValueError("euclidean metric expects (n, d) arrays")
    elif metric == "pair":
        if A.ndim != 3 or A.shape[1] != 2 or B.ndim != 3 or B.shape[1] != 2:
            raise ValueError("pair metric expects (n, 2, d) arrays")
    else:
        raise ValueError(f"unknown metric {metric!r}")
    if len(A) != len(B):
        raise ValueError("samples must have equal size")
    if len(A) == 0:
        raise ValueError("samples must be non-empty")
    if len(A) > max_points:
        raise ValueError(f"sample size {len(A)} exceeds the exact-solve cap {max_points}")
    if A.shape[1:] != B.shape[1:]:
        raise ValueError("sample dimensions must match")
    cost = cdist(A, B) if metric == "euclidean" else _pair_cost(A, B)
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum() / len(A))


def product_pairs(first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """All (first_i, second_j) combinations as an (n*m, 2, d) pair array."""
    first = np.atleast_2d(np.asarray(first, dtype=float))
    second = np.atleast_2d(np.asarray(second, dtype=float))
    if first.shape[1] != second.shape[1]:
        raise ValueError("marginal samples must share the design dimension")
    n, m = len(first), len(second)
    out = np.empty((n * m, 2, first.shape[1]))
    out[:, 0, :] = np.repeat(first, m, axis=0)
    out[:, 1, :] = np.tile(second, (n, 1))
    return out


def audit_mse_to_rank(
    score_fn,
    near: np.ndarray,
    sub: np.ndarray,
    f_near: np.ndarray,
    f_sub: np.ndarray,
    tol: float = AUDIT_TOL,
) -> BoundReport:
    """Check ranking error <= (4 / gap^2) * (near MSE + sub MSE) against truth.

    The gap is the smallest true-value difference over all (near, sub) pairs;
    when it is not strictly positive the reduction does not apply and the
    report is flagged accordingly.
    """
    near = np.atleast_2d(np.asarray(near, dtype=float))
    sub = np.atleast_2d(np.asarray(sub, dtype=float))
    f_near = np.asarray(f_near, dtype=float)
    f_sub = np.asarray(f_sub, dtype=float)
    gap = float(f_near.min() - f_sub.max())
    if gap <= 0.0:
        return BoundReport(
            lhs=math.nan, rhs=math.nan, holds=None, applicable=False, value_gap=gap
        )
    lhs = ranking_error(score_fn, near, sub)
    mse_near = float(np.mean((np.asarray(score_fn(near)) - f_near) ** 2))
    mse_sub = float(np.mean((np.asarray(score_fn(sub)) - f_sub) ** 2))
    rhs = 4.0 / gap**2 * (mse_near + mse_sub)
    return BoundReport(
        lhs=lhs, rhs=rhs, holds=bool(lhs <= rhs + tol), applicable=True, value_gap=gap
    )


def audit_marginal_decomposition(
    near_sample: np.ndarray,
    sub_sample: np.ndarray,
    mu_sample: np.ndarray,
    nu_sample: np.ndarray,
    tol: float = AUDIT_TOL,
) -> BoundReport:
    """Check pair-metric W1 of the two product measures against the sum of
    the marginal W1 distances.

    The product measures are built from all index combinations of each pair
    of marginal samples (n^2 equal-mass atoms per side), matching the product
    structure the decomposition requires.
    """
    samples = [
        np.atleast_2d(np.asarray(s, dtype=float))
        for s in (near_sample, sub_sample, mu_sample, nu_sample)
    ]
    near_s, sub_s, mu_s, nu_s = samples
    n = len(near_s)
    if any(len(s) != n for s in samples):
        raise ValueError("all four marginal samples must have equal size")
    if n > 64:
        raise ValueError("marginal sample size capped at 64 for the exact solve")
    target = product_pairs(near_s, sub_s)
    training = product_pairs(mu_s, nu_s)
    lhs = wasserstein1_assignment(target, training, metric="pair", max_points=n * n)
    rhs = wasserstein1_assignment(near_s, mu_s) + wasserstein1_assignment(sub_s, nu_s)
    return BoundReport(lhs=lhs, rhs=rhs, holds=bool(lhs <= rhs + tol), applicable=True)


def save_radius_rows(rows: list[RadiusRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["d", "n_restricted", "rank_error"])
        for row in rows:
            err = "" if row.error is None else format(row.error, ".17g")
            writer.writerow([format(row.radius, ".17g"), row.n_restricted, err])


def save_bound_reports(reports: list[BoundReport], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "lhs", "rhs", "holds"])
        for trial, rep in enumerate(reports):
            writer.writerow(
                [
                    trial,
                    format(rep.lhs, ".17g"),
                    format(rep.rhs, ".17g"),
                    "" if rep.holds is None else int(rep.holds),
                ]
            )


def save_report_summary(report: RankingErrorReport, path: str | Path) -> None:
    summary = {
        "overall_error": report.overall_error,
        "value_gap": report.value_gap,
        "w1_near": report.w1_near,
        "mean_dist_to_manifold": report.mean_dist_to_manifold,
        "manifold_diameter": report.manifold_diameter,
        "near_fraction": report.near_fraction,
        "n_near": report.n_near,
        "n_sub": report.n_sub,
        "seed": report.seed,
        "radius_errors": [
            {"d": r.radius, "n_restricted": r.n_restricted, "rank_error": r.error}
            for r in report.rows
        ],
    }
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
