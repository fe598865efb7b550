"""Projected gradient-ascent design search over a trained surrogate.

Ascent runs in the standardized input space used at training (step sizes then
have a consistent meaning across tasks); the box constraints are transformed
into that space and applied as a per-coordinate clamp after every step.
Candidates are initialized from the near-optimal subset of the offline
dataset and scored against the true objective only afterwards, as a held-out
grader.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .surrogate import MlpSurrogate
from .tasks import OfflineDataset, TaskSpec, normalized_score
from .objectives import PartitionedDataset

__all__ = [
    "SearchConfig",
    "SearchResult",
    "SurrogateObjective",
    "project_box",
    "ascend",
    "propose_candidates",
    "score_candidates",
    "save_search_result",
]

INIT_RULES = ("topk", "random")


@dataclass
class SearchConfig:
    step_size: float = 0.05
    steps: int = 200
    num_candidates: int = 32
    init_rule: str = "topk"
    seed: int = 0
    keep_trajectories: bool = True

    def __post_init__(self) -> None:
        if self.step_size < 0.0:
            raise ValueError("step_size must be non-negative")
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        if self.num_candidates < 1:
            raise ValueError("num_candidates must be at least 1")
        if self.init_rule not in INIT_RULES:
            raise ValueError(f"init_rule must be one of {INIT_RULES}")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class SearchResult:
    init_designs: np.ndarray
    candidates: np.ndarray
    surrogate_scores: np.ndarray
    config: SearchConfig
    trajectories: np.ndarray | None = None
    true_scores: np.ndarray | None = None
    normalized_scores: np.ndarray | None = None
    best_true: float | None = None
    best_normalized: float | None = None


class SurrogateObjective:
    """Differentiable search objective backed by a surrogate model.

    ``adapted=True`` (the default) scores and differentiates the z-score
    adapted output; ``adapted=False`` uses the raw network output, which only
    rescales every gradient by the adaptation std.
    """

    def __init__(self, model: MlpSurrogate, adapted: bool = True):
        if adapted and not model.is_adapted:
            raise RuntimeError("model has no adaptation constants; adapt it first")
        self.model = model
        self.adapted = adapted
        self.x_mean = model.x_mean
        self.x_std = model.x_std

    def value_batch(self, X: np.ndarray) -> np.ndarray:
        if self.adapted:
            return self.model.predict_adapted_batch(X)
        return self.model.forward_batch(X)

    def gradient_batch(self, X: np.ndarray) -> np.ndarray:
        g = self.model.input_gradient_batch(X)
        if self.adapted:
            g = g / self.model.adapt_std
        return g


def project_box(x: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Per-coordinate clamp of x into [lower, upper]."""
    x = np.asarray(x, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if x.shape[-1] != lower.shape[-1] or lower.shape != upper.shape:
        raise ValueError("inconsistent lengths for x and bounds")
    return np.clip(x, lower, upper)


def _ascend_batch(
    objective, X0: np.ndarray, lower: np.ndarray, upper: np.ndarray, config: SearchConfig
) -> np.ndarray:
    """Run all trajectories simultaneously; returns (k, steps+1, dim).

    The ascent step lives in the objective's standardized input space; mapped
    back to raw coordinates it becomes a step along x_std^2 * gradient, with
    the projection applied directly on the raw box so the bound satisfaction
    is exact.
    """
    X = np.atleast_2d(np.asarray(X0, dtype=float))
    x_std = np.asarray(objective.x_std, dtype=float)
    step_scale = config.step_size * x_std**2
    path = np.empty((len(X), config.steps + 1, X.shape[1]))
    path[:, 0] = X
    for t in range(config.steps):
        g = np.asarray(objective.gradient_batch(X), dtype=float)
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite search gradient at step {t}")
        X = np.clip(X + step_scale * g, lower, upper)
        path[:, t + 1] = X
    return path


def ascend(
    objective,
    x0: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    config: SearchConfig,
) -> np.ndarray:
    """Projected gradient ascent from x0; returns all steps+1 iterates.

    The objective must expose ``gradient_batch`` plus ``x_mean``/``x_std``
    describing its training-time input standardization (identity constants for
    exact stand-ins).  The step size is fixed; no schedule.
    """
    x0 = np.asarray(x0, dtype=float)
    return _ascend_batch(objective, x0[None, :], lower, upper, config)[0]


def propose_candidates(
    model: MlpSurrogate,
    dataset: OfflineDataset,
    part: PartitionedDataset,
    config: SearchConfig,
) -> SearchResult:
    """Ascend from near-set initializations; returns candidates without true scores.

    ``topk`` initializes at the highest-scoring members of the near set
    (resampling with replacement when the near set is smaller than the
    candidate count); ``random`` draws uniformly from the near set.
    """
    if part.n_near < 1:
        raise ValueError("empty near set")
    rng = np.random.default_rng(config.seed)
    y = dataset.scores
    k = config.num_candidates
    if config.init_rule == "topk":
        ranked = part.near_idx[np.argsort(-y[part.near_idx], kind="stable")]
        chosen = ranked[:k]
        if len(chosen) < k:
            pad = part.near_idx[rng.integers(0, part.n_near, size=k - len(chosen))]
            chosen = np.concatenate([chosen, pad])
    else:
        chosen = part.near_idx[rng.integers(0, part.n_near, size=k)]
    X0 = dataset.designs[chosen]

    objective = SurrogateObjective(model, adapted=True)
    paths = _ascend_batch(objective, X0, dataset.task.lower, dataset.task.upper, config)
    candidates = paths[:, -1].copy()
    return SearchResult(
        init_designs=X0,
        candidates=candidates,
        surrogate_scores=objective.value_batch(candidates),
        config=config,
        trajectories=paths if config.keep_trajectories else None,
    )


def score_candidates(result: SearchResult, task: TaskSpec) -> SearchResult:
    """Evaluate the true objective on each candidate and fill in the summary."""
    result.true_scores = task.evaluate_batch(result.candidates)
    result.normalized_scores = np.array(
        [normalized_score(v, task) for v in result.true_scores]
    )
    best = int(np.argmax(result.true_scores))
    result.best_true = float(result.true_scores[best])
    result.best_normalized = float(result.normalized_scores[best])
    return result


def save_search_result(
    result: SearchResult, csv_path: str | Path, json_path: str | Path | None = None
) -> None:
    dim = result.candidates.shape[1]
    header = (
        ["candidate_id"]
        + [f"x0_{i}" for i in range(dim)]
        + [f"xfinal_{i}" for i in range(dim)]
        + ["surrogate_score", "true_score", "normalized_score"]
    )
    n = len(result.candidates)
    true_scores = result.true_scores if result.true_scores is not None else [np.nan] * n
    norm_scores = (
        result.normalized_scores if result.normalized_scores is not None else [np.nan] * n
    )
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for cid in range(n):
            row = (
                [cid]
                + [format(v, ".17g") for v in result.init_designs[cid]]
                + [format(v, ".17g") for v in result.candidates[cid]]
                + [
                    format(result.surrogate_scores[cid], ".17g"),
                    format(true_scores[cid], ".17g"),
                    format(norm_scores[cid], ".17g"),
                ]
            )
            writer.writerow(row)
    if json_path is not None:
        summary = {
            "best_true": result.best_true,
            "best_normalized": result.best_normalized,
            "config": result.config.to_dict(),
        }
        with open(json_path, "w") as fh:
            json.dump(summary, fh, indent=2)
            fh.write("\n")
