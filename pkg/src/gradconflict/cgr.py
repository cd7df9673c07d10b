"""Conflict gradient reduction on the projection-layer parameters.

The conflict between the two subset gradients is measured by the negated
cosine ``L_phi = -g1.g2 / (||g1|| ||g2||)``. Its contribution to the projection
gradient uses the diagonal outer-product surrogate ``H ~ tau * g (.) g`` for
each Hessian, which turns the correction into element-wise products::

    grad = g1 + g2 - gamma * (g1*g1*g2 + g2*g2*g1),   gamma = tau / (||g1|| ||g2||)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .numkit import DegenerateGradientError


@dataclass(frozen=True)
class CgrConfig:
    tau: float = 0.01
    eps_norm: float = 1e-12

    def __post_init__(self):
        if not self.tau >= 0:
            raise ValueError(f"tau must be nonnegative, got {self.tau}")
        if not self.eps_norm > 0:
            raise ValueError("eps_norm must be positive")


@dataclass(frozen=True)
class ConflictReport:
    cosine: float
    l_phi: float
    norm_g1: float
    norm_g2: float


def _pair(g1, g2):
    g1 = np.asarray(g1, dtype=np.float64)
    g2 = np.asarray(g2, dtype=np.float64)
    if g1.shape != g2.shape or g1.ndim != 1:
        raise ValueError(f"gradient length mismatch: {g1.shape} vs {g2.shape}")
    return g1, g2


def conflict_cosine(g1, g2, eps_norm: float = 1e-12) -> ConflictReport:
    g1, g2 = _pair(g1, g2)
    n1 = float(np.linalg.norm(g1))
    n2 = float(np.linalg.norm(g2))
    if n1 <= eps_norm or n2 <= eps_norm:
        raise DegenerateGradientError("degenerate gradient for conflict measure")
    cos = float(np.clip((g1 / n1) @ (g2 / n2), -1.0, 1.0))
    return ConflictReport(cos, -cos, n1, n2)


def hessian_diag_approx(g, tau: float) -> np.ndarray:
    g = np.asarray(g, dtype=np.float64)
    return tau * (g * g)


@dataclass(frozen=True)
class CgrResult:
    gradient: np.ndarray
    degenerate: bool = False


def cgr_gradient(g1p, g2p, cfg: CgrConfig) -> CgrResult:
    """Total projection-layer gradient: subset sum plus the conflict-descent correction.

    When either norm is at or below ``eps_norm`` (or their product below
    ``eps_norm**2``) gamma is undefined and the plain sum is returned with the
    degenerate flag set.
    """
    g1p, g2p = _pair(g1p, g2p)
    total = g1p + g2p
    n1 = math.sqrt(float(g1p @ g1p))
    n2 = math.sqrt(float(g2p @ g2p))
    if n1 <= cfg.eps_norm or n2 <= cfg.eps_norm or n1 * n2 < cfg.eps_norm ** 2:
        return CgrResult(total, True)
    if cfg.tau == 0.0:
        return CgrResult(total)
    gamma = cfg.tau / (n1 * n2)
    # H1 g2 + H2 g1 with H_j = tau * g_j (.) g_j; tau is folded into gamma.
    correction = g1p * g1p * g2p + g2p * g2p * g1p
    return CgrResult(total - gamma * correction)


def exact_conflict_grad_fd(
    grad_pair_fn: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
    theta_p,
    h: float = 1e-5,
) -> np.ndarray:
    """Central differences of ``-cos(g1(theta_p), g2(theta_p))`` with respect to theta_p.

    ``grad_pair_fn`` maps projection parameters to the two subset gradients
    restricted to those parameters.
    """
    theta = np.array(theta_p, dtype=np.float64)
    if theta.ndim != 1 or theta.shape[0] > 200:
        raise ValueError("finite-difference oracle is limited to at most 200 parameters")

    def l_phi(t):
        g1, g2 = grad_pair_fn(t)
        return conflict_cosine(g1, g2).l_phi

    out = np.empty_like(theta)
    for i in range(theta.shape[0]):
        tp = theta.copy()
        tm = theta.copy()
        tp[i] += h
        tm[i] -= h
        out[i] = (l_phi(tp) - l_phi(tm)) / (2.0 * h)
    return out
