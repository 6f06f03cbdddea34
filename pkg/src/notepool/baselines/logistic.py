"""L2-regularized logistic regression trained by full-batch gradient descent.

Deterministic: zero initialization, fixed epoch count, no randomness. The
bias is left out of the penalty.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from notepool.errors import ConfigError, ModelError
from notepool.numerics import sigmoid


@dataclass
class LogisticConfig:
    learning_rate: float = 0.01
    epochs: int = 400
    l2: float = 1e-4

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.l2 < 0:
            raise ConfigError(f"l2 must be >= 0, got {self.l2}")


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float
    feature_names: list[str]
    history: list[float] = field(default_factory=list)

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return sigmoid(x @ self.weights + self.bias)

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "bias": float(self.bias),
            "feature_names": list(self.feature_names),
            "history": [float(v) for v in self.history],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LogisticModel":
        return cls(
            weights=np.asarray(data["weights"], dtype=np.float64),
            bias=float(data["bias"]),
            feature_names=list(data["feature_names"]),
            history=[float(v) for v in data.get("history", [])],
        )


def loss_and_grad(weights: np.ndarray, bias: float, x: np.ndarray, y: np.ndarray,
                  l2: float) -> tuple[float, np.ndarray, float]:
    """Mean BCE plus l2*||w||^2 (bias unpenalized), with exact gradients."""
    z = x @ weights + bias
    p = sigmoid(z)
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z)) + l2 * float(weights @ weights)
    resid = p - y
    grad_w = x.T @ resid / x.shape[0] + 2.0 * l2 * weights
    grad_b = float(np.mean(resid))
    return loss, grad_w, grad_b


def train_logistic(data, config: LogisticConfig | None = None) -> LogisticModel:
    config = config or LogisticConfig()
    config.validate()
    data.require_both_classes()
    x, y = data.x, data.y
    w = np.zeros(x.shape[1], dtype=np.float64)
    b = 0.0
    history: list[float] = []
    for _ in range(config.epochs):
        loss, gw, gb = loss_and_grad(w, b, x, y, config.l2)
        if not np.isfinite(loss):
            raise ModelError("training diverged: non-finite loss")
        history.append(loss)
        w = w - config.learning_rate * gw
        b = b - config.learning_rate * gb
    return LogisticModel(weights=w, bias=b, feature_names=list(data.feature_names),
                         history=history)
