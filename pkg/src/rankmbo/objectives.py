"""Training objectives for the surrogate: MSE regression, global pairwise
ranking, and distribution-aware ranking (DAR).

The two ranking objectives descend the same margin loss
``max(0, margin - (h(x_pref) - h(x_other)))`` and differ only in how training
pairs are drawn.  The global trainer samples uniformly from all index pairs
with a strict score gap.  DAR first splits the dataset at the top-quantile
threshold into a near-optimal set and its complement, then mixes cross-region
pairs (near vs. sub, the preferred element always near) with a small ratio of
intra-region pairs drawn inside the near set.  Both ranking trainers finish
with z-score output adaptation so their gradient scale during design search
matches regression-trained surrogates.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .surrogate import MlpSurrogate, TrainConfig, _Optimizer, zscore_adapt
from .tasks import OfflineDataset

__all__ = [
    "PartitionedDataset",
    "RankConfig",
    "DarConfig",
    "TrainingDiverged",
    "partition",
    "partition_scores",
    "mse_loss",
    "mse_loss_grad",
    "margin_rank_loss",
    "margin_rank_loss_grad",
    "zero_one_rank_loss",
    "sample_ranked_pairs",
    "sample_dar_pairs",
    "train_mse",
    "train_rank_global",
    "train_dar",
    "save_loss_trace",
]


class TrainingDiverged(RuntimeError):
    """Raised when the training loss becomes non-finite."""

    def __init__(self, iteration: int, message: str | None = None):
        self.iteration = iteration
        super().__init__(message or f"training loss became non-finite at iteration {iteration}")


@dataclass
class PartitionedDataset:
    """Index split of a dataset at the top-quantile score threshold.

    ``near_idx`` holds the indices whose score is >= threshold (ties at the
    threshold included), ``sub_idx`` the strict complement.  Both are sorted
    ascending and together cover every index exactly once.
    """

    threshold: float
    near_idx: np.ndarray
    sub_idx: np.ndarray
    near_fraction: float

    @property
    def n_near(self) -> int:
        return len(self.near_idx)

    @property
    def n_sub(self) -> int:
        return len(self.sub_idx)


@dataclass
class RankConfig(TrainConfig):
    margin: float = 0.4

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.margin < 0.0:
            raise ValueError("margin must be non-negative")


@dataclass
class DarConfig(RankConfig):
    near_fraction: float = 0.2
    intra_ratio: float = 0.1

    def __post_init__(self) -> None:
        super().__post_init__()
        if not 0.0 < self.near_fraction < 1.0:
            raise ValueError("near_fraction must lie strictly between 0 and 1")
        if not 0.0 <= self.intra_ratio <= 1.0:
            raise ValueError("intra_ratio must lie in [0, 1]")


def partition_scores(scores: np.ndarray, near_fraction: float) -> PartitionedDataset:
    """Split score indices so the near set holds the top ~near_fraction of them.

    The threshold is the ceil(near_fraction * m)-th largest score; every index
    whose score ties the threshold goes to the near side.  Raises when the
    split would leave either side empty (e.g. all scores identical).
    """
    scores = np.asarray(scores, dtype=float)
    m = len(scores)
    if m < 2:
        raise ValueError("partition needs at least 2 scores")
    if not 0.0 < near_fraction < 1.0:
        raise ValueError("near_fraction must lie strictly between 0 and 1")
    k = int(math.ceil(near_fraction * m))
    threshold = float(np.sort(scores)[::-1][k - 1])
    near = np.flatnonzero(scores >= threshold)
    sub = np.flatnonzero(scores < threshold)
    if len(near) == 0:
        raise ValueError("near-optimal set is empty; increase near_fraction")
    if len(sub) == 0:
        raise ValueError(
            "suboptimal set is empty (all scores tie the threshold); partition undefined"
        )
    return PartitionedDataset(
        threshold=threshold, near_idx=near, sub_idx=sub, near_fraction=near_fraction
    )


def partition(dataset: OfflineDataset, near_fraction: float) -> PartitionedDataset:
    return partition_scores(dataset.scores, near_fraction)


def mse_loss(pred, y):
    """Squared error (pred - y)^2; broadcasts over arrays."""
    return (np.asarray(pred, dtype=float) - np.asarray(y, dtype=float)) ** 2


def mse_loss_grad(pred, y):
    """d/dpred of the squared error: 2 (pred - y)."""
    return 2.0 * (np.asarray(pred, dtype=float) - np.asarray(y, dtype=float))


def margin_rank_loss(s_pref, s_other, margin: float):
    """Hinge on the score gap: max(0, margin - (s_pref - s_other))."""
    s_pref = np.asarray(s_pref, dtype=float)
    s_other = np.asarray(s_other, dtype=float)
    return np.maximum(0.0, margin - (s_pref - s_other))


def margin_rank_loss_grad(s_pref, s_other, margin: float):
    """Gradients w.r.t. (s_pref, s_other); zero at and beyond the hinge point."""
    s_pref = np.asarray(s_pref, dtype=float)
    s_other = np.asarray(s_other, dtype=float)
    active = (margin - (s_pref - s_other)) > 0.0
    g = active.astype(float)
    return -g, g


def zero_one_rank_loss(s_pref, s_other):
    """1 when the preferred score is at or below the other, else 0 (ties count as errors)."""
    s_pref = np.asarray(s_pref, dtype=float)
    s_other = np.asarray(s_other, dtype=float)
    return (s_pref <= s_other).astype(float)


def sample_ranked_pairs(
    rng: np.random.Generator, scores: np.ndarray, count: int
) -> tuple[np.ndarray, np.ndarray]:
    """Uniform draws from all index pairs (i, j) with scores[i] > scores[j].

    Draws unordered candidate pairs with replacement and orients each by score;
    tied candidates are redrawn, which leaves the distribution uniform over the
    strictly ranked pairs.
    """
    scores = np.asarray(scores, dtype=float)
    m = len(scores)
    i = rng.integers(0, m, size=count)
    j = rng.integers(0, m, size=count)
    tied = scores[i] == scores[j]
    while tied.any():
        n_bad = int(tied.sum())
        i[tied] = rng.integers(0, m, size=n_bad)
        j[tied] = rng.integers(0, m, size=n_bad)
        tied = scores[i] == scores[j]
    swap = scores[j] > scores[i]
    pref = np.where(swap, j, i)
    other = np.where(swap, i, j)
    return pref, other


def sample_dar_pairs(
    rng: np.random.Generator,
    scores: np.ndarray,
    part: PartitionedDataset,
    intra_ratio: float,
    count: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mixture pair sampler: cross-region with probability 1 - intra_ratio,
    intra-region (both from the near set, preferred = higher score, ties
    redrawn) otherwise.  Returns (pref, other, intra_mask).
    """
    scores = np.asarray(scores, dtype=float)
    u = rng.random(count)
    intra = u > (1.0 - intra_ratio)
    pref = np.empty(count, dtype=np.int64)
    other = np.empty(count, dtype=np.int64)

    n_cross = int((~intra).sum())
    pref[~intra] = part.near_idx[rng.integers(0, part.n_near, size=n_cross)]
    other[~intra] = part.sub_idx[rng.integers(0, part.n_sub, size=n_cross)]

    n_intra = count - n_cross
    if n_intra > 0:
        a = part.near_idx[rng.integers(0, part.n_near, size=n_intra)]
        b = part.near_idx[rng.integers(0, part.n_near, size=n_intra)]
        tied = scores[a] == scores[b]
        while tied.any():
            n_bad = int(tied.sum())
            a[tied] = part.near_idx[rng.integers(0, part.n_near, size=n_bad)]
            b[tied] = part.near_idx[rng.integers(0, part.n_near, size=n_bad)]
            tied = scores[a] == scores[b]
        swap = scores[b] > scores[a]
        pref[intra] = np.where(swap, b, a)
        other[intra] = np.where(swap, a, b)
    return pref, other, intra


def _standardize_inputs(model: MlpSurrogate, designs: np.ndarray) -> None:
    mean = designs.mean(axis=0)
    std = designs.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    model.set_input_standardization(mean, std)


def train_mse(
    model: MlpSurrogate, dataset: OfflineDataset, config: TrainConfig
) -> tuple[MlpSurrogate, np.ndarray]:
    """Minibatch descent on the mean squared error against observed scores.

    Inputs are standardized per coordinate over the dataset before entering
    the network; the constants are stored on the model and applied at
    inference.  Returns the model and the per-iteration mean batch loss.
    """
    X, y = dataset.designs, dataset.scores
    _standardize_inputs(model, X)
    rng = np.random.default_rng(config.seed)
    opt = _Optimizer(model, config)
    m = len(y)
    trace = np.empty(config.iterations)
    for it in range(config.iterations):
        idx = rng.integers(0, m, size=config.batch_size)
        preds = model.forward_batch(X[idx])
        resid = preds - y[idx]
        loss = float(np.mean(resid**2))
        if not np.isfinite(loss):
            raise TrainingDiverged(it)
        trace[it] = loss
        upstream = mse_loss_grad(preds, y[idx]) / config.batch_size
        grads_w, grads_b = model.param_gradients(X[idx], upstream)
        opt.step(model, grads_w, grads_b)
    model.objective = "mse"
    model.train_config = config.to_dict()
    return model, trace


def _train_pairwise(
    model: MlpSurrogate,
    dataset: OfflineDataset,
    config: RankConfig,
    draw_pairs,
    tag: str,
) -> tuple[MlpSurrogate, np.ndarray]:
    X = dataset.designs
    _standardize_inputs(model, X)
    rng = np.random.default_rng(config.seed)
    opt = _Optimizer(model, config)
    bs = config.batch_size
    trace = np.empty(config.iterations)
    for it in range(config.iterations):
        pref, other = draw_pairs(rng, bs)
        inputs = np.vstack([X[pref], X[other]])
        scores = model.forward_batch(inputs)
        s_pref, s_other = scores[:bs], scores[bs:]
        loss = float(np.mean(margin_rank_loss(s_pref, s_other, config.margin)))
        if not np.isfinite(loss):
            raise TrainingDiverged(it)
        trace[it] = loss
        g_pref, g_other = margin_rank_loss_grad(s_pref, s_other, config.margin)
        upstream = np.concatenate([g_pref, g_other]) / bs
        grads_w, grads_b = model.param_gradients(inputs, upstream)
        opt.step(model, grads_w, grads_b)
    zscore_adapt(model, dataset)
    model.objective = tag
    model.train_config = config.to_dict()
    return model, trace


def train_rank_global(
    model: MlpSurrogate, dataset: OfflineDataset, config: RankConfig
) -> tuple[MlpSurrogate, np.ndarray]:
    """Margin-loss descent on pairs drawn uniformly from all strictly ranked
    index pairs of the dataset, followed by z-score output adaptation."""
    y = dataset.scores
    if np.all(y == y[0]):
        raise ValueError("all scores identical; no ranked pairs exist")

    def draw(rng, count):
        return sample_ranked_pairs(rng, y, count)

    return _train_pairwise(model, dataset, config, draw, "rank_global")


def train_dar(
    model: MlpSurrogate, dataset: OfflineDataset, config: DarConfig
) -> tuple[MlpSurrogate, np.ndarray]:
    """Distribution-aware ranking: quantile partition, mixed pair sampling,
    margin-loss descent, then z-score output adaptation."""
    part = partition(dataset, config.near_fraction)
    y = dataset.scores
    if config.intra_ratio > 0.0:
        near_scores = y[part.near_idx]
        if part.n_near < 2 or np.all(near_scores == near_scores[0]):
            raise ValueError(
                "near set cannot form intra-region pairs; set intra_ratio=0"
            )

    def draw(rng, count):
        pref, other, _ = sample_dar_pairs(rng, y, part, config.intra_ratio, count)
        return pref, other

    return _train_pairwise(model, dataset, config, draw, "dar")


def save_loss_trace(trace: np.ndarray, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "loss"])
        for it, loss in enumerate(np.asarray(trace, dtype=float)):
            writer.writerow([it, format(loss, ".17g")])
