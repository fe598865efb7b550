"""Two-hidden-layer ReLU surrogate with exact reverse-mode gradients.

The network computes ``W3 @ relu(W2 @ relu(W1 z + b1) + b2) + b3`` on
standardized inputs ``z = (x - x_mean) / x_std``.  Gradients are provided with
respect to both the parameters (for training) and the raw input (for design
search).  The ReLU subgradient at exactly 0 is defined as 0, which keeps all
gradients deterministic.

After training, a z-score output adaptation can be attached: predictions are
shifted and scaled by their mean and standard deviation over the training
designs, so gradient magnitudes during design search are comparable across
training objectives whose raw output scales differ.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "TrainConfig",
    "MlpSurrogate",
    "init_surrogate",
    "zscore_adapt",
    "save_model",
    "load_model",
]

ADAPT_STD_FLOOR = 1e-12


@dataclass
class TrainConfig:
    """Optimization hyperparameters shared by all training objectives."""

    iterations: int = 5000
    batch_size: int = 64
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.0
    weight_init_scale: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.learning_rate < 0.0:
            raise ValueError("learning_rate must be non-negative")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.weight_decay < 0.0:
            raise ValueError("weight_decay must be non-negative")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


class MlpSurrogate:
    """MLP scoring model with layer sizes [dim, hidden, hidden, 1]."""

    def __init__(
        self,
        weights: list[np.ndarray],
        biases: list[np.ndarray],
        seed: int | None = None,
    ):
        if len(weights) != 3 or len(biases) != 3:
            raise ValueError("expected exactly three linear layers")
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        for w, b in zip(self.weights, self.biases):
            if w.shape[0] != b.shape[0]:
                raise ValueError("weight/bias shapes inconsistent")
        if self.weights[0].shape[0] != self.weights[1].shape[1]:
            raise ValueError("layer shapes inconsistent")
        if self.weights[1].shape[0] != self.weights[2].shape[1]:
            raise ValueError("layer shapes inconsistent")
        if self.weights[2].shape[0] != 1:
            raise ValueError("output layer must be scalar")
        for w in self.weights + self.biases:
            if not np.all(np.isfinite(w)):
                raise ValueError("parameters must be finite")
        self.seed = seed
        dim = self.weights[0].shape[1]
        self.x_mean = np.zeros(dim)
        self.x_std = np.ones(dim)
        self.adapt_mean: float | None = None
        self.adapt_std: float | None = None
        self.adapt_degenerate: bool = False
        self.objective: str | None = None
        self.train_config: dict | None = None

    @property
    def dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def layer_sizes(self) -> list[int]:
        return [self.dim, self.weights[0].shape[0], self.weights[1].shape[0], 1]

    @property
    def num_params(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    @property
    def is_adapted(self) -> bool:
        return self.adapt_mean is not None and self.adapt_std is not None

    def set_input_standardization(self, mean: np.ndarray, std: np.ndarray) -> None:
        mean = np.asarray(mean, dtype=float)
        std = np.asarray(std, dtype=float)
        if mean.shape != (self.dim,) or std.shape != (self.dim,):
            raise ValueError("standardization constants must have shape (dim,)")
        if np.any(std <= 0.0):
            raise ValueError("x_std must be positive")
        self.x_mean = mean
        self.x_std = std

    # -- forward and gradients ------------------------------------------------

    def _forward_cache(self, X: np.ndarray):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ValueError(f"expected inputs of shape (n, {self.dim})")
        Z = (X - self.x_mean) / self.x_std
        A1 = Z @ self.weights[0].T + self.biases[0]
        if not np.all(np.isfinite(A1)):
            raise FloatingPointError("non-finite activation in layer 1")
        H1 = np.maximum(A1, 0.0)
        A2 = H1 @ self.weights[1].T + self.biases[1]
        if not np.all(np.isfinite(A2)):
            raise FloatingPointError("non-finite activation in layer 2")
        H2 = np.maximum(A2, 0.0)
        out = H2 @ self.weights[2].T + self.biases[2]
        if not np.all(np.isfinite(out)):
            raise FloatingPointError("non-finite activation in layer 3")
        return out[:, 0], (Z, A1, H1, A2, H2)

    def forward_batch(self, X: np.ndarray) -> np.ndarray:
        out, _ = self._forward_cache(X)
        return out

    def forward(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected input of shape ({self.dim},)")
        return float(self.forward_batch(x[None, :])[0])

    def param_gradients(
        self, batch_inputs: np.ndarray, upstream_grads: np.ndarray
    ) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Gradients of sum_i upstream_i * h(x_i) w.r.t. every weight and bias."""
        X = np.atleast_2d(np.asarray(batch_inputs, dtype=float))
        up = np.asarray(upstream_grads, dtype=float).reshape(-1)
        if len(up) != len(X):
            raise ValueError("need one upstream gradient per batch input")
        _, (Z, A1, H1, A2, H2) = self._forward_cache(X)
        gw3 = up[None, :] @ H2
        gb3 = np.array([up.sum()])
        d2 = np.outer(up, self.weights[2][0]) * (A2 > 0.0)
        gw2 = d2.T @ H1
        gb2 = d2.sum(axis=0)
        d1 = (d2 @ self.weights[1]) * (A1 > 0.0)
        gw1 = d1.T @ Z
        gb1 = d1.sum(axis=0)
        return [gw1, gw2, gw3], [gb1, gb2, gb3]

    def input_gradient_batch(self, X: np.ndarray) -> np.ndarray:
        """Exact gradient of h at each row, w.r.t. the raw (unstandardized) input."""
        X = np.asarray(X, dtype=float)
        Z = (X - self.x_mean) / self.x_std
        A1 = Z @ self.weights[0].T + self.biases[0]
        H1 = np.maximum(A1, 0.0)
        A2 = H1 @ self.weights[1].T + self.biases[1]
        v2 = self.weights[2][0][None, :] * (A2 > 0.0)
        v1 = (v2 @ self.weights[1]) * (A1 > 0.0)
        gz = v1 @ self.weights[0]
        return gz / self.x_std

    def input_gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected input of shape ({self.dim},)")
        return self.input_gradient_batch(x[None, :])[0]

    def min_preactivation_magnitude(self, x: np.ndarray) -> float:
        """Smallest |pre-activation| at x; small values flag kink-adjacent inputs."""
        x = np.asarray(x, dtype=float)
        _, (_, A1, _, A2, _) = self._forward_cache(np.atleast_2d(x))
        return float(min(np.abs(A1).min(), np.abs(A2).min()))

    # -- output adaptation ----------------------------------------------------

    def adapt_output(self, designs: np.ndarray) -> "MlpSurrogate":
        """Attach z-score output constants computed over the given designs."""
        designs = np.atleast_2d(np.asarray(designs, dtype=float))
        if len(designs) < 1:
            raise ValueError("adaptation needs a non-empty design set")
        preds = self.forward_batch(designs)
        self.adapt_mean = float(preds.mean())
        std = float(preds.std())
        if std < ADAPT_STD_FLOOR:
            self.adapt_std = 1.0
            self.adapt_degenerate = True
        else:
            self.adapt_std = std
            self.adapt_degenerate = False
        return self

    def predict_adapted_batch(self, X: np.ndarray) -> np.ndarray:
        if not self.is_adapted:
            raise RuntimeError("output adaptation has not been performed")
        return (self.forward_batch(X) - self.adapt_mean) / self.adapt_std

    def predict_adapted(self, x: np.ndarray) -> float:
        if not self.is_adapted:
            raise RuntimeError("output adaptation has not been performed")
        return (self.forward(x) - self.adapt_mean) / self.adapt_std

    # -- persistence ----------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "layer_sizes": self.layer_sizes,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "x_mean": self.x_mean.tolist(),
            "x_std": self.x_std.tolist(),
            "adapt_mean": self.adapt_mean,
            "adapt_std": self.adapt_std,
            "adapt_degenerate": self.adapt_degenerate,
            "objective": self.objective,
            "train_config": self.train_config,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MlpSurrogate":
        model = cls(
            weights=[np.array(w, dtype=float) for w in data["weights"]],
            biases=[np.array(b, dtype=float) for b in data["biases"]],
            seed=data.get("seed"),
        )
        model.set_input_standardization(
            np.array(data["x_mean"], dtype=float), np.array(data["x_std"], dtype=float)
        )
        model.adapt_mean = data.get("adapt_mean")
        model.adapt_std = data.get("adapt_std")
        model.adapt_degenerate = bool(data.get("adapt_degenerate", False))
        model.objective = data.get("objective")
        model.train_config = data.get("train_config")
        return model


def init_surrogate(
    dim: int, hidden: int, seed: int, init_scale: float = 1.0
) -> MlpSurrogate:
    """Fresh surrogate with uniform(+-scale/sqrt(fan_in)) weights and zero biases."""
    if dim < 1 or hidden < 1:
        raise ValueError("dim and hidden must be positive")
    rng = np.random.default_rng(seed)
    sizes = [dim, hidden, hidden, 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = init_scale / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpSurrogate(weights, biases, seed=seed)


def zscore_adapt(model: MlpSurrogate, dataset) -> MlpSurrogate:
    """Attach output adaptation constants from a dataset (or raw design array)."""
    designs = getattr(dataset, "designs", dataset)
    return model.adapt_output(designs)


def save_model(model: MlpSurrogate, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh, indent=2)
        fh.write("\n")


def load_model(path: str | Path) -> MlpSurrogate:
    with open(path) as fh:
        return MlpSurrogate.from_dict(json.load(fh))


class _Optimizer:
    """SGD or Adam over the surrogate parameter list, with optional weight decay."""

    def __init__(self, model: MlpSurrogate, config: TrainConfig):
        self.config = config
        self.t = 0
        if config.optimizer == "adam":
            self.m_w = [np.zeros_like(w) for w in model.weights]
            self.v_w = [np.zeros_like(w) for w in model.weights]
            self.m_b = [np.zeros_like(b) for b in model.biases]
            self.v_b = [np.zeros_like(b) for b in model.biases]

    def step(
        self, model: MlpSurrogate, grads_w: list[np.ndarray], grads_b: list[np.ndarray]
    ) -> None:
        cfg = self.config
        if cfg.weight_decay > 0.0:
            grads_w = [g + cfg.weight_decay * w for g, w in zip(grads_w, model.weights)]
        if cfg.optimizer == "sgd":
            for i in range(3):
                model.weights[i] -= cfg.learning_rate * grads_w[i]
                model.biases[i] -= cfg.learning_rate * grads_b[i]
            return
        self.t += 1
        corr1 = 1.0 - cfg.adam_beta1**self.t
        corr2 = 1.0 - cfg.adam_beta2**self.t
        for i in range(3):
            self.m_w[i] = cfg.adam_beta1 * self.m_w[i] + (1 - cfg.adam_beta1) * grads_w[i]
            self.v_w[i] = cfg.adam_beta2 * self.v_w[i] + (1 - cfg.adam_beta2) * grads_w[i] ** 2
            model.weights[i] -= cfg.learning_rate * (self.m_w[i] / corr1) / (
                np.sqrt(self.v_w[i] / corr2) + cfg.adam_eps
            )
            self.m_b[i] = cfg.adam_beta1 * self.m_b[i] + (1 - cfg.adam_beta1) * grads_b[i]
            self.v_b[i] = cfg.adam_beta2 * self.v_b[i] + (1 - cfg.adam_beta2) * grads_b[i] ** 2
            model.biases[i] -= cfg.learning_rate * (self.m_b[i] / corr1) / (
                np.sqrt(self.v_b[i] / corr2) + cfg.adam_eps
            )
