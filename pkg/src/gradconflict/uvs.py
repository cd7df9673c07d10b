"""Update vector search: the conflict-averse replacement for the summed gradient.

Given per-subset gradients ``g1``, ``g2`` and their sum ``g0``, find the vector
``v`` inside the ball ``||v - g0|| <= c ||g0||`` that maximises
``min(g1 . v, g2 . v)``. Through the Lagrangian dual this reduces to a
one-parameter convex problem over the simplex weights ``mu``::

    psi(mu) = g_w . g0 + c ||g0|| ||g_w||,    g_w = mu1 g1 + mu2 g2

after which ``v* = g0 + c ||g0|| g_w / ||g_w||``.

With two gradients ``psi`` depends on the data only through the 2x2 Gram
matrix, so the dual iterations cost O(1) each once the three inner products
are known.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .numkit import DegenerateGradientError, SimplexWeights


MU_TOL = 1e-12


class Degeneracy(enum.Enum):
    NONE = "none"
    ZERO_G0 = "zero_g0"
    ZERO_GW = "zero_gw"


@dataclass(frozen=True)
class UvsConfig:
    c: float = 0.5
    beta: float = 0.05
    dual_iters: int = 25
    eps_g0: float = 1e-12
    eps_gw: float = 1e-12
    warm_start: bool = True

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.dual_iters < 1:
            raise ValueError(f"dual_iters must be >= 1, got {self.dual_iters}")
        if not (self.eps_g0 > 0 and self.eps_gw > 0):
            raise ValueError("degeneracy thresholds must be positive")


@dataclass(frozen=True)
class UvsSolution:
    v_star: np.ndarray
    mu_star: SimplexWeights
    lambda_star: float
    dual_value: float
    degenerate: Degeneracy = Degeneracy.NONE


def _check_pair(g1, g2) -> tuple[np.ndarray, np.ndarray]:
    g1 = np.asarray(g1, dtype=np.float64)
    g2 = np.asarray(g2, dtype=np.float64)
    if g1.shape != g2.shape or g1.ndim != 1:
        raise ValueError(f"gradient length mismatch: {g1.shape} vs {g2.shape}")
    return g1, g2


def total_gradient(g1, g2) -> np.ndarray:
    g1, g2 = _check_pair(g1, g2)
    return g1 + g2


class _Gram:
    """Inner products of (g1, g2) and the closed-form pieces of psi built from them."""

    __slots__ = ("g11", "g12", "g22", "norm_g0")

    def __init__(self, g11: float, g12: float, g22: float):
        self.g11, self.g12, self.g22 = g11, g12, g22
        self.norm_g0 = math.sqrt(max(g11 + 2.0 * g12 + g22, 0.0))

    @classmethod
    def of(cls, g1: np.ndarray, g2: np.ndarray) -> "_Gram":
        return cls(float(g1 @ g1), float(g1 @ g2), float(g2 @ g2))

    def norm_gw(self, m: float) -> float:
        n = 1.0 - m
        return math.sqrt(max(m * m * self.g11 + 2.0 * m * n * self.g12 + n * n * self.g22, 0.0))

    def psi(self, m: float, c: float) -> float:
        n = 1.0 - m
        gw_dot_g0 = m * (self.g11 + self.g12) + n * (self.g12 + self.g22)
        return gw_dot_g0 + c * self.norm_g0 * self.norm_gw(m)

    def grad(self, m: float, c: float, eps_gw: float) -> tuple[float, float]:
        """(d psi / d mu1, d psi / d mu2) at mu = (m, 1 - m)."""
        n = 1.0 - m
        d1 = self.g11 + self.g12
        d2 = self.g12 + self.g22
        nw = self.norm_gw(m)
        if nw >= eps_gw:
            scale = c * self.norm_g0 / nw
            d1 += scale * (m * self.g11 + n * self.g12)
            d2 += scale * (m * self.g12 + n * self.g22)
        return d1, d2


def dual_objective(mu: SimplexWeights, g1, g2, c: float) -> float:
    g1, g2 = _check_pair(g1, g2)
    g0 = g1 + g2
    gw = mu.mu1 * g1 + mu.mu2 * g2
    return float(gw @ g0) + c * float(np.linalg.norm(g0)) * float(np.linalg.norm(gw))


def _solve_gram(gram: _Gram, cfg: UvsConfig, mu_init: SimplexWeights) -> tuple[float, float]:
    """Projected gradient descent on psi over the simplex.

    The first step is ``beta / (||g1||^2 + ||g2||^2)`` so the iteration is
    invariant to a common rescaling of the gradients. Later steps use the
    Barzilai-Borwein secant length, and every step is backtracked until it
    satisfies an Armijo decrease, up to a rounding-level slack, so psi does not grow.
    Stops early once mu moves by less than ``MU_TOL``.
    """
    # psi and its gradient are inlined on local scalars; this loop runs once per training step.
    c, eps_gw = cfg.c, cfg.eps_gw
    g11, g12, g22 = gram.g11, gram.g12, gram.g22
    a1, a2 = g11 + g12, g12 + g22  # d(g_w . g0)/d mu
    cn0 = c * gram.norm_g0
    scale = g11 + g22

    def nw(m):
        n = 1.0 - m
        return math.sqrt(max(m * m * g11 + 2.0 * m * n * g12 + n * n * g22, 0.0))

    def grad(m, w):
        if w < eps_gw:
            return a1, a2
        k = cn0 / w
        n = 1.0 - m
        return a1 + k * (m * g11 + n * g12), a2 + k * (m * g12 + n * g22)

    eta = cfg.beta / scale
    m = mu_init.mu1
    w = nw(m)
    f = m * a1 + (1.0 - m) * a2 + cn0 * w
    # psi differences below this are rounding noise and must not stall the search
    slack = 8.0 * 2.0 ** -52 * (abs(a1) + abs(a2) + cn0 * (math.sqrt(g11) + math.sqrt(g22)))
    d1, d2 = grad(m, w)
    for _ in range(cfg.dual_iters):
        while True:
            m_new = 0.5 * (1.0 + (m - eta * d1) - ((1.0 - m) - eta * d2))
            m_new = 0.0 if m_new < 0.0 else (1.0 if m_new > 1.0 else m_new)
            w_new = nw(m_new)
            f_new = m_new * a1 + (1.0 - m_new) * a2 + cn0 * w_new
            dm = m_new - m
            if f_new <= f - 1e-4 * dm * dm / eta + slack or eta * scale < 1e-30:
                break
            eta *= 0.5
        if dm == 0.0:
            break
        m, f, w = m_new, f_new, w_new
        if abs(dm) < MU_TOL:
            break
        n1, n2 = grad(m, w)
        # Barzilai-Borwein length |dmu|^2 / (dmu . dgrad) with dmu = (dm, -dm).
        curv = dm * ((n1 - n2) - (d1 - d2))
        eta = 2.0 * dm * dm / curv if curv > 0.0 else 2.0 * eta
        d1, d2 = n1, n2
    return m, f


def solve_dual(g1, g2, cfg: UvsConfig, mu_init: SimplexWeights | None = None) -> tuple[SimplexWeights, float]:
    """Minimise psi over the simplex, starting from ``mu_init`` (uniform by default)."""
    g1, g2 = _check_pair(g1, g2)
    gram = _Gram.of(g1, g2)
    if gram.norm_g0 <= cfg.eps_g0:
        raise DegenerateGradientError("zero_g0: total gradient norm below eps_g0")
    m, f = _solve_gram(gram, cfg, mu_init or SimplexWeights.uniform())
    return SimplexWeights.from_first(m), f


def _norm(x: np.ndarray) -> float:
    return math.sqrt(float(x @ x))


def update_vector(mu_star: SimplexWeights, g1, g2, cfg: UvsConfig) -> UvsSolution:
    g1, g2 = _check_pair(g1, g2)
    return _update_vector(mu_star, g1, g2, g1 + g2, cfg)


def _update_vector(mu_star, g1, g2, g0, cfg, norm_g0=None) -> UvsSolution:
    norm_g0 = _norm(g0) if norm_g0 is None else norm_g0
    gw = mu_star.mu1 * g1 + mu_star.mu2 * g2
    norm_gw = _norm(gw)
    if norm_g0 <= cfg.eps_g0:
        return UvsSolution(np.zeros_like(g0), mu_star, 0.0, 0.0, Degeneracy.ZERO_G0)
    psi = float(gw @ g0) + cfg.c * norm_g0 * norm_gw
    if norm_gw <= cfg.eps_gw:
        return UvsSolution(g0, mu_star, 0.0, psi, Degeneracy.ZERO_GW)
    lam = norm_gw / (2.0 * cfg.c * norm_g0)
    v = g0 + (cfg.c * norm_g0 / norm_gw) * gw
    return UvsSolution(v, mu_star, lam, psi)


def uvs_step(g1, g2, cfg: UvsConfig, prev_mu: SimplexWeights | None = None) -> UvsSolution:
    """Dual solve followed by the closed-form update vector; never raises on degeneracy."""
    g1, g2 = _check_pair(g1, g2)
    start = prev_mu if (cfg.warm_start and prev_mu is not None) else SimplexWeights.uniform()
    g0 = g1 + g2
    norm_g0 = _norm(g0)
    if norm_g0 <= cfg.eps_g0:
        return UvsSolution(np.zeros_like(g1), start, 0.0, 0.0, Degeneracy.ZERO_G0)
    m, _ = _solve_gram(_Gram.of(g1, g2), cfg, start)
    return _update_vector(SimplexWeights.from_first(m), g1, g2, g0, cfg, norm_g0)


def pcgrad_combine(g1, g2) -> np.ndarray:
    """Sum of the two gradients after projecting each off the other when they conflict."""
    g1, g2 = _check_pair(g1, g2)

    def project(gi, gj):
        nj = float(gj @ gj)
        if nj == 0.0:
            return gi
        dot = float(gi @ gj)
        return gi - (min(0.0, dot) / nj) * gj

    return project(g1, g2) + project(g2, g1)


def oracle_grid_mu(g1, g2, c: float, steps: int = 1000) -> tuple[float, float]:
    """Exhaustive scan of psi over mu1 in {0, 1/steps, ..., 1}, evaluated on the raw vectors."""
    g1, g2 = _check_pair(g1, g2)
    g0 = g1 + g2
    t = np.arange(steps + 1) / steps
    gw = t[:, None] * g1[None, :] + (1.0 - t)[:, None] * g2[None, :]
    psi = gw @ g0 + c * np.linalg.norm(g0) * np.linalg.norm(gw, axis=1)
    k = int(np.argmin(psi))
    return float(t[k]), float(psi[k])


def oracle_ball_max_min(g1, g2, c: float, samples: int = 100_000, rng=None) -> tuple[np.ndarray, float]:
    """Sample the feasible ball densely and return the best ``argmax_v min_j g_j . v`` found.

    Samples the boundary sphere (where a linear max-min attains its optimum)
    as well as the interior. Only meant for dimension 2 or 3.
    """
    g1, g2 = _check_pair(g1, g2)
    d = g1.shape[0]
    if d not in (2, 3):
        raise ValueError("ball oracle only runs in dimension 2 or 3")
    g0 = g1 + g2
    radius = c * float(np.linalg.norm(g0))
    if rng is None:
        rng = np.random.default_rng(0)
    if d == 2:
        n_sphere = samples // 2
        ang = np.arange(n_sphere) * (2.0 * np.pi / n_sphere)
        sphere = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    else:
        n_sphere = samples // 2
        sphere = rng.standard_normal((n_sphere, 3))
        sphere /= np.linalg.norm(sphere, axis=1, keepdims=True)
    n_inner = samples - n_sphere
    dirs = rng.standard_normal((n_inner, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    inner = dirs * (rng.uniform(size=(n_inner, 1)) ** (1.0 / d))
    pts = g0 + radius * np.concatenate([sphere, inner])
    rate = np.minimum(pts @ g1, pts @ g2)
    k = int(np.argmax(rate))
    return pts[k], float(rate[k])
