"""Small numeric helpers shared by the models."""

from __future__ import annotations

import numpy as np


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Overflow-safe logistic function, elementwise."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logit(p: float) -> float:
    return float(np.log(p / (1.0 - p)))


def binary_logloss(margin: np.ndarray, y: np.ndarray) -> float:
    """Mean negative log-likelihood given pre-sigmoid margins."""
    return float(np.mean(np.logaddexp(0.0, margin) - y * margin))
