"""Synthetic continuous black-box tasks and offline dataset construction.

All objectives are stored in "higher is better" orientation so the whole
pipeline uniformly maximizes.  Offline datasets follow the worst-fraction
protocol: sample a pool uniformly inside the feasible box, evaluate the true
objective, and keep only the lowest-scoring fraction, which creates a
deliberate shift between the training data and the region of the true optima.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

__all__ = [
    "TaskSpec",
    "OfflineDataset",
    "eval_branin",
    "eval_quadratic_bowl",
    "branin_task",
    "quadratic_bowl_task",
    "get_task",
    "make_offline_dataset",
    "normalized_score",
    "save_dataset",
    "load_dataset",
    "BRANIN_MAXIMIZERS",
    "BRANIN_MAX_VALUE",
]

# The three global maximizers of the negated Branin function and their value.
BRANIN_MAXIMIZERS = (
    (math.pi, 2.275),
    (-math.pi, 12.275),
    (9.42478, 2.475),
)
BRANIN_MAX_VALUE = -0.397887


@dataclass
class TaskSpec:
    """A continuous black-box objective with box bounds.

    ``y_min_full`` and ``y_max_full`` are the true-score extrema over the most
    recently generated pool; they stay ``None`` until a pool has been drawn and
    are the reference scale for :func:`normalized_score`.
    """

    name: str
    dim: int
    lower: np.ndarray
    upper: np.ndarray
    fn: Callable[[np.ndarray], float] = field(repr=False, compare=False)
    batch_fn: Callable[[np.ndarray], np.ndarray] | None = field(
        default=None, repr=False, compare=False
    )
    maximize: bool = True
    y_min_full: float | None = None
    y_max_full: float | None = None

    def __post_init__(self) -> None:
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if self.lower.shape != (self.dim,) or self.upper.shape != (self.dim,):
            raise ValueError("bounds must both have shape (dim,)")
        if not np.all(self.lower < self.upper):
            raise ValueError("degenerate box: need lower[i] < upper[i] for all i")

    def evaluate(self, x: np.ndarray) -> float:
        return float(self.fn(np.asarray(x, dtype=float)))

    def evaluate_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.batch_fn is not None:
            return np.asarray(self.batch_fn(X), dtype=float)
        return np.array([self.fn(row) for row in X], dtype=float)

    def contains(self, X: np.ndarray) -> bool:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return bool(np.all(X >= self.lower) and np.all(X <= self.upper))

    def has_extrema(self) -> bool:
        return self.y_min_full is not None and self.y_max_full is not None


@dataclass
class OfflineDataset:
    """Fixed (design, score) pairs; the only information available to training."""

    designs: np.ndarray
    scores: np.ndarray
    task: TaskSpec
    seed: int
    pool_size: int
    keep_fraction: float
    noise_std: float = 0.0

    def __post_init__(self) -> None:
        self.designs = np.asarray(self.designs, dtype=float)
        self.scores = np.asarray(self.scores, dtype=float)
        if self.designs.ndim != 2 or self.designs.shape[1] != self.task.dim:
            raise ValueError("designs must have shape (m, dim)")
        if len(self.designs) != len(self.scores):
            raise ValueError("designs and scores must have equal length")
        if len(self.scores) < 2:
            raise ValueError("dataset needs at least 2 points")
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("scores must be finite")
        if not self.task.contains(self.designs):
            raise ValueError("every design must lie inside the task box")

    def __len__(self) -> int:
        return len(self.scores)


def eval_branin(x: np.ndarray) -> float:
    """Negated Branin function on the box [-5, 10] x [0, 15].

    Uses the standard constants a=1, b=5.1/(4*pi^2), c=5/pi, r=6, s=10,
    t=1/(8*pi).  The sign flip makes the three classic minimizers the global
    maximizers, with value close to -0.397887.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (2,):
        raise ValueError(f"branin expects a 2-vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("branin requires finite input")
    return float(_branin_batch(x[None, :])[0])


def _branin_batch(X: np.ndarray) -> np.ndarray:
    x1, x2 = X[:, 0], X[:, 1]
    b = 5.1 / (4.0 * np.pi**2)
    c = 5.0 / np.pi
    t = 1.0 / (8.0 * np.pi)
    value = (x2 - b * x1**2 + c * x1 - 6.0) ** 2 + 10.0 * (1.0 - t) * np.cos(x1) + 10.0
    return -value


def eval_quadratic_bowl(x: np.ndarray, center: np.ndarray) -> float:
    """Concave bowl -||x - center||^2 with its analytically known maximum at center."""
    x = np.asarray(x, dtype=float)
    center = np.asarray(center, dtype=float)
    if x.shape != center.shape:
        raise ValueError("x and center must have the same length")
    return float(-np.sum((x - center) ** 2))


def branin_task() -> TaskSpec:
    return TaskSpec(
        name="branin",
        dim=2,
        lower=np.array([-5.0, 0.0]),
        upper=np.array([10.0, 15.0]),
        fn=eval_branin,
        batch_fn=_branin_batch,
    )


def quadratic_bowl_task(
    dim: int = 2, center: np.ndarray | None = None, halfwidth: float = 5.0
) -> TaskSpec:
    center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    if center.shape != (dim,):
        raise ValueError("center must have shape (dim,)")
    return TaskSpec(
        name="quadratic_bowl",
        dim=dim,
        lower=center - halfwidth,
        upper=center + halfwidth,
        fn=lambda x: eval_quadratic_bowl(x, center),
        batch_fn=lambda X: -np.sum((X - center) ** 2, axis=1),
    )


_TASK_FACTORIES: dict[str, Callable[[], TaskSpec]] = {
    "branin": branin_task,
    "quadratic_bowl": quadratic_bowl_task,
}


def get_task(name: str) -> TaskSpec:
    if name not in _TASK_FACTORIES:
        known = ", ".join(sorted(_TASK_FACTORIES))
        raise ValueError(f"unknown task {name!r} (known: {known})")
    return _TASK_FACTORIES[name]()


def make_offline_dataset(
    task: TaskSpec,
    pool_size: int,
    keep_fraction: float,
    seed: int,
    noise_std: float = 0.0,
) -> OfflineDataset:
    """Draw a uniform pool, keep the worst fraction of it as the offline dataset.

    Records the true-score extrema of the full pool on ``task`` for later
    normalization.  Deterministic for a fixed seed; ties in the keep selection
    are broken by original pool index via a stable sort.
    """
    if pool_size < 2:
        raise ValueError("pool_size must be at least 2")
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError("keep_fraction must lie in (0, 1]")
    keep = int(math.floor(keep_fraction * pool_size))
    if keep < 2:
        raise ValueError(
            f"keep_fraction * pool_size = {keep} keeps fewer than 2 designs"
        )
    if noise_std < 0.0:
        raise ValueError("noise_std must be non-negative")

    rng = np.random.default_rng(seed)
    pool = rng.uniform(task.lower, task.upper, size=(pool_size, task.dim))
    y_true = task.evaluate_batch(pool)
    task.y_min_full = float(y_true.min())
    task.y_max_full = float(y_true.max())

    observed = y_true
    if noise_std > 0.0:
        observed = y_true + rng.normal(0.0, noise_std, size=pool_size)

    order = np.argsort(observed, kind="stable")
    kept = order[:keep]
    return OfflineDataset(
        designs=pool[kept],
        scores=observed[kept],
        task=task,
        seed=seed,
        pool_size=pool_size,
        keep_fraction=keep_fraction,
        noise_std=noise_std,
    )


def normalized_score(y: float, task: TaskSpec) -> float:
    """Map a true score onto the pool scale: (y - y_min) / (y_max - y_min).

    May exceed [0, 1] when a searched design beats the pool optimum; that is
    permitted and reported as-is.
    """
    if not task.has_extrema():
        raise ValueError("task has no recorded pool extrema; generate a pool first")
    span = task.y_max_full - task.y_min_full
    if span == 0.0:
        raise ValueError("pool extrema coincide; normalization undefined")
    return (y - task.y_min_full) / span


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def save_dataset(
    dataset: OfflineDataset, csv_path: str | Path, sidecar_path: str | Path | None = None
) -> None:
    """Write the dataset as CSV (x0..x{d-1},y) plus an optional JSON sidecar."""
    csv_path = Path(csv_path)
    dim = dataset.task.dim
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(dim)] + ["y"])
        for row, y in zip(dataset.designs, dataset.scores):
            writer.writerow([_fmt(v) for v in row] + [_fmt(y)])
    if sidecar_path is not None:
        with open(sidecar_path, "w") as fh:
            json.dump(dataset_sidecar(dataset), fh, indent=2)
            fh.write("\n")


def dataset_sidecar(dataset: OfflineDataset) -> dict:
    return {
        "task": dataset.task.name,
        "seed": dataset.seed,
        "pool_size": dataset.pool_size,
        "keep_fraction": dataset.keep_fraction,
        "noise_std": dataset.noise_std,
        "y_min_full": dataset.task.y_min_full,
        "y_max_full": dataset.task.y_max_full,
    }


def load_dataset(csv_path: str | Path, sidecar_path: str | Path) -> OfflineDataset:
    """Rebuild a dataset from its CSV and sidecar (task looked up by name)."""
    with open(sidecar_path) as fh:
        meta = json.load(fh)
    task = get_task(meta["task"])
    task.y_min_full = meta["y_min_full"]
    task.y_max_full = meta["y_max_full"]
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    return OfflineDataset(
        designs=data[:, :-1],
        scores=data[:, -1],
        task=task,
        seed=meta["seed"],
        pool_size=meta["pool_size"],
        keep_fraction=meta["keep_fraction"],
        noise_std=meta.get("noise_std", 0.0),
    )
