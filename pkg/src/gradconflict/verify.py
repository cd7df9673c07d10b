"""Oracle suites behind ``gradconflict verify``.

Each check compares a production code path against an independent
brute-force computation and reports the worst residual it saw.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .bench import LandscapeId, auc, make_toy_landscape
from .cgr import CgrConfig, cgr_gradient
from .numkit import Batch, LayerSpec, MlpModel, Rng, bce_loss_and_grad, simplex_project
from .uvs import Degeneracy, UvsConfig, oracle_ball_max_min, oracle_grid_mu, uvs_step

LEVELS = {
    "fast": {"dual": 150, "ball": 5, "fd": 5, "simplex": 100, "auc": 100, "cgr": 200},
    "full": {"dual": 1000, "ball": 100, "fd": 100, "simplex": 1000, "auc": 1000, "cgr": 1000},
}


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    tolerance: float
    cases: int

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag}  {self.name:<22s} cases={self.cases:<5d} worst={self.worst:.3e} tol={self.tolerance:.1e}"


def check_dual(n: int, seed: int = 1) -> CheckResult:
    """Update vector on the constraint sphere and dual value at the grid minimum."""
    rng = np.random.default_rng(seed)
    cfg = UvsConfig(c=0.5)
    worst = 0.0
    ok = True
    for k in range(n):
        d = (2, 10, 100)[k % 3]
        g1, g2 = rng.standard_normal(d), rng.standard_normal(d) * rng.uniform(0.1, 3.0)
        sol = uvs_step(g1, g2, cfg)
        if sol.degenerate is not Degeneracy.NONE:
            continue
        g0 = g1 + g2
        r = cfg.c * np.linalg.norm(g0)
        active = abs(np.linalg.norm(sol.v_star - g0) - r) / r
        _, grid = oracle_grid_mu(g1, g2, cfg.c, 1000)
        gap = (sol.dual_value - grid) / (1.0 + abs(sol.dual_value))
        ok &= active < 1e-9 and gap <= 1e-6
        worst = max(worst, active, gap)
    return CheckResult("uvs dual vs grid", ok, worst, 1e-6, n)


def check_ball(n: int, seed: int = 2) -> CheckResult:
    rng = np.random.default_rng(seed)
    cfg = UvsConfig(c=0.5)
    worst = -np.inf
    ok = True
    for _ in range(n):
        g1, g2 = rng.standard_normal(2), rng.standard_normal(2)
        sol = uvs_step(g1, g2, cfg)
        _, best = oracle_ball_max_min(g1, g2, cfg.c, 100_000, rng)
        ours = min(g1 @ sol.v_star, g2 @ sol.v_star)
        tol = 1e-3 * np.linalg.norm(g1 + g2) * max(np.linalg.norm(g1), np.linalg.norm(g2))
        shortfall = (best - ours) / tol
        ok &= shortfall <= 1.0
        worst = max(worst, shortfall)
    return CheckResult("uvs max-min vs ball", ok, worst, 1.0, n)


def check_backprop(n: int, seed: int = 3) -> CheckResult:
    layers = [
        LayerSpec(4, 5, "tanh", "backbone"),
        LayerSpec(5, 4, "tanh", "projection"),
        LayerSpec(4, 1, "linear", "classifier"),
    ]
    worst = 0.0
    h = 1e-5
    for k in range(n):
        rng = Rng(seed * 1000 + k)
        model = MlpModel.init(rng, layers)
        model.set_params(model.params + 0.1 * rng.normals(model.n_params))
        x = rng.normals(6 * 4).reshape(6, 4)
        y = np.array([float(rng.below(2)) for _ in range(6)])
        batch = Batch(x, y)
        _, g = model.loss_and_grad(batch)
        theta = model.params.copy()
        probe = model.copy()
        for i in range(model.n_params):
            if abs(g[i]) <= 1e-8:
                continue
            tp, tm = theta.copy(), theta.copy()
            tp[i] += h
            tm[i] -= h
            probe.set_params(tp)
            lp = bce_loss_and_grad(probe.forward(x)[0], y)[0]
            probe.set_params(tm)
            lm = bce_loss_and_grad(probe.forward(x)[0], y)[0]
            fd = (lp - lm) / (2 * h)
            worst = max(worst, abs(fd - g[i]) / abs(g[i]))
    return CheckResult("mlp backprop vs fd", worst < 1e-4, worst, 1e-4, n)


def check_landscapes(seed: int = 4) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    h = 1e-6
    cases = 0
    for lid in LandscapeId:
        ls = make_toy_landscape(lid)
        for _ in range(50):
            t = rng.uniform(-2, 2, size=2)
            for f, gf in ((ls.loss1, ls.grad1), (ls.loss2, ls.grad2)):
                g = gf(t)
                fd = np.array([(f(t + h * e) - f(t - h * e)) / (2 * h) for e in np.eye(2)])
                worst = max(worst, float(np.linalg.norm(fd - g) / max(np.linalg.norm(g), 1.0)))
                cases += 1
    return CheckResult("landscape grads vs fd", worst < 1e-6, worst, 1e-6, cases)


def check_simplex(n: int, seed: int = 5) -> CheckResult:
    rng = np.random.default_rng(seed)
    grid = np.arange(1001) / 1000.0
    pts = np.stack([grid, 1.0 - grid], axis=1)
    worst = -np.inf
    for _ in range(n):
        raw = rng.uniform(-2, 3, size=2)
        mu = np.array(simplex_project(raw).as_tuple())
        ours = np.linalg.norm(mu - raw)
        best = np.min(np.linalg.norm(pts - raw, axis=1))
        worst = max(worst, ours - best)
    return CheckResult("simplex vs grid", worst <= 1e-12, max(worst, 0.0), 1e-12, n)


def check_auc(n: int, seed: int = 6) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        m = int(rng.integers(2, 30))
        y = rng.integers(0, 2, size=m).astype(float)
        y[0], y[1] = 0.0, 1.0
        s = np.round(rng.uniform(size=m), 1)  # coarse values force ties
        pos, neg = s[y == 1], s[y == 0]
        wins = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p, q in itertools.product(pos, neg))
        worst = max(worst, abs(auc(s, y) - wins / (len(pos) * len(neg))))
    return CheckResult("auc vs pair counting", worst <= 1e-12, worst, 1e-12, n)


def check_cgr(n: int, seed: int = 7) -> CheckResult:
    rng = np.random.default_rng(seed)
    cfg = CgrConfig(tau=0.01)
    worst = 0.0
    for _ in range(n):
        d = int(rng.integers(1, 50))
        a, b = rng.standard_normal(d), rng.standard_normal(d)
        na, nb = np.sqrt(sum(x * x for x in a)), np.sqrt(sum(x * x for x in b))
        gamma = cfg.tau / (na * nb)
        ref = [a[i] + b[i] - gamma * (a[i] * a[i] * b[i] + b[i] * b[i] * a[i]) for i in range(d)]
        worst = max(worst, float(np.max(np.abs(cgr_gradient(a, b, cfg).gradient - ref))))
    return CheckResult("cgr formula", worst <= 1e-12, worst, 1e-12, n)


def run_checks(level: str = "fast") -> list[CheckResult]:
    if level not in LEVELS:
        raise ValueError(f"level must be one of {sorted(LEVELS)}")
    n = LEVELS[level]
    return [
        check_dual(n["dual"]),
        check_ball(n["ball"]),
        check_backprop(n["fd"]),
        check_landscapes(),
        check_simplex(n["simplex"]),
        check_auc(n["auc"]),
        check_cgr(n["cgr"]),
    ]
