"""Loss, simplex projection and the small value types shared by every module."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

PROB_EPS = 1e-7


class DegenerateGradientError(ValueError):
    """A gradient norm is too small for a quantity that divides by it."""


@dataclass(frozen=True)
class SimplexWeights:
    """Two nonnegative weights summing to one (the dual variable of the update search)."""

    mu1: float
    mu2: float

    def __post_init__(self):
        if not (self.mu1 >= 0.0 and self.mu2 >= 0.0):
            raise ValueError(f"simplex weights must be nonnegative, got ({self.mu1}, {self.mu2})")
        if abs(self.mu1 + self.mu2 - 1.0) > 1e-12:
            raise ValueError(f"simplex weights must sum to 1, got {self.mu1 + self.mu2!r}")

    @classmethod
    def uniform(cls) -> "SimplexWeights":
        return cls(0.5, 0.5)

    @classmethod
    def from_first(cls, mu1: float) -> "SimplexWeights":
        mu1 = min(max(float(mu1), 0.0), 1.0)
        return cls(mu1, 1.0 - mu1)

    def as_tuple(self) -> tuple[float, float]:
        return (self.mu1, self.mu2)


class SubsetTag(enum.Enum):
    ORIGINAL = "X_original"
    SYNTH = "X_synth"
    TEST = "test"


@dataclass(frozen=True)
class Batch:
    inputs: np.ndarray  # [n, d]
    labels: np.ndarray  # [n], exactly 0.0 or 1.0
    subset_tag: SubsetTag = SubsetTag.TEST

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.float64)
        if x.ndim != 2:
            raise ValueError("inputs must be a 2-D matrix")
        if y.shape != (x.shape[0],):
            raise ValueError(f"expected {x.shape[0]} labels, got shape {y.shape}")
        if not np.all((y == 0.0) | (y == 1.0)):
            raise ValueError("labels must be exactly 0 or 1")
        if not np.all(np.isfinite(x)):
            raise ValueError("inputs contain non-finite values")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def take(self, idx: np.ndarray) -> "Batch":
        return Batch(self.inputs[idx], self.labels[idx], self.subset_tag)


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def bce_loss_and_grad(logits, labels) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy on logits and its derivative with respect to the logits.

    Probabilities are clamped to ``[PROB_EPS, 1 - PROB_EPS]`` for the loss value.
    The returned gradient is ``(sigmoid(z) - y) / n``, the derivative of the
    unclamped logistic loss; the two agree wherever the clamp is inactive.
    """
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if z.shape != y.shape:
        raise ValueError(f"length mismatch: {z.shape} logits vs {y.shape} labels")
    n = z.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("labels must be exactly 0 or 1")
    p = sigmoid(z)
    pc = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    loss = -float(np.mean(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)))
    return loss, (p - y) / n


def simplex_project(raw) -> SimplexWeights:
    """Euclidean projection of a point in R^2 onto {mu >= 0, mu1 + mu2 = 1}."""
    a, b = (float(v) for v in raw)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError(f"non-finite input to simplex projection: ({a}, {b})")
    if a >= 0.0 and b >= 0.0 and a + b == 1.0:
        return SimplexWeights(a, b)
    # Shift both coordinates equally onto the line, then clip to the segment.
    return SimplexWeights.from_first(0.5 * (1.0 + a - b))
