"""Dual-stream training loop with pluggable gradient-combination strategies.

Every step draws one batch from each training subset, computes the two
subset losses and their flat gradients with one backward pass each, combines
them according to the strategy and applies plain gradient descent.

Parameter partition used by the conflict-aware strategies:

* ``shared`` is backbone + classifier, ``proj`` is the projection layer.
* UVS-only replaces the summed gradient by the update vector on all
  parameters.
* CGR-only keeps the summed gradient on ``shared`` and applies the conflict
  corrected gradient on ``proj``.
* CS-DFD runs the update search on the ``shared`` restriction of (g1, g2) and
  the CGR rule on ``proj``, so the projection layer is only updated once.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .bench import BenchDatasets, ToyLandscape, auc
from .cgr import CgrConfig, cgr_gradient
from .numkit import Batch, MlpModel, Rng, SimplexWeights, bce_loss_and_grad, default_layers, sigmoid
from .uvs import Degeneracy, UvsConfig, pcgrad_combine, uvs_step

log = logging.getLogger(__name__)


class Strategy(enum.Enum):
    ORIGINAL_ONLY = "original-only"
    SYNTH_ONLY = "synth-only"
    NAIVE_JOINT = "naive"
    PCGRAD = "pcgrad"
    UVS_ONLY = "uvs-only"
    CGR_ONLY = "cgr-only"
    CS_DFD = "cs-dfd"

    @classmethod
    def parse(cls, name: str) -> "Strategy":
        key = name.strip().lower().replace("_", "-")
        aliases = {
            "originalonly": "original-only",
            "synthonly": "synth-only",
            "naivejoint": "naive",
            "naive-joint": "naive",
            "uvsonly": "uvs-only",
            "cgronly": "cgr-only",
            "csdfd": "cs-dfd",
        }
        key = aliases.get(key.replace("-", ""), key)
        for s in cls:
            if s.value == key:
                return s
        raise ValueError(f"unknown strategy {name!r}; expected one of {[s.value for s in cls]}")

    @property
    def uses_uvs(self) -> bool:
        return self in (Strategy.UVS_ONLY, Strategy.CS_DFD)

    @property
    def uses_cgr(self) -> bool:
        return self in (Strategy.CGR_ONLY, Strategy.CS_DFD)


ALL_STRATEGIES = tuple(Strategy)


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 0.01
    steps: int = 2000
    batch_size: int = 32
    uvs: UvsConfig = field(default_factory=UvsConfig)
    cgr: CgrConfig = field(default_factory=CgrConfig)
    seed: int = 42
    eval_every: int = 0
    log_window: int = 100

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.log_window < 1:
            raise ValueError("log_window must be >= 1")


@dataclass(frozen=True)
class StepRecord:
    step: int
    loss1: float
    loss2: float
    cosine: float
    norm_g1: float
    norm_g2: float
    mu1: float | None
    degenerate: str


LOG_COLUMNS = ("step", "loss1", "loss2", "cosine", "norm_g1", "norm_g2", "mu1", "degenerate")


@dataclass
class RunReport:
    strategy: Strategy
    config: TrainConfig
    rows: list[StepRecord]
    auc_source: float | None = None
    auc_target: float | None = None
    loss_source: float | None = None
    loss_target: float | None = None
    evals: list[dict] = field(default_factory=list)
    trajectory: list[tuple] = field(default_factory=list)

    def window(self, name: str) -> np.ndarray:
        vals = np.array([getattr(r, name) for r in self.rows[-self.config.log_window:]], dtype=np.float64)
        return vals

    @property
    def oscillation(self) -> dict[str, float]:
        """Standard deviation of each subset loss over the final log window."""
        return {"loss1": float(np.std(self.window("loss1"))), "loss2": float(np.std(self.window("loss2")))}

    @property
    def final_cosine(self) -> float:
        return float(np.mean(self.window("cosine")))

    def log_rows(self) -> list[tuple]:
        return [tuple(getattr(r, c) for c in LOG_COLUMNS) for r in self.rows]

    def metrics(self) -> dict:
        osc = self.oscillation
        return {
            "strategy": self.strategy.value,
            "steps": len(self.rows),
            "auc_source": self.auc_source,
            "auc_target": self.auc_target,
            "loss_source": self.loss_source,
            "loss_target": self.loss_target,
            "final_window_cosine": self.final_cosine,
            "oscillation_loss1": osc["loss1"],
            "oscillation_loss2": osc["loss2"],
            "final_loss1": self.rows[-1].loss1,
            "final_loss2": self.rows[-1].loss2,
            "config": config_dict(self.config),
        }


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int, record: dict):
        super().__init__(f"non-finite loss at step {step}: {record}")
        self.step = step
        self.record = record


def config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)


# ----------------------------------------------------------------- problems


class _BatchStream:
    """Epoch-wise reshuffled minibatches drawn from one training subset."""

    def __init__(self, data: Batch, batch_size: int, rng: Rng):
        self.data = data
        self.batch_size = batch_size
        self.rng = rng
        self.order = np.empty(0, dtype=np.int64)
        self.pos = 0

    def next(self) -> Batch | None:
        n = len(self.data)
        if n == 0:
            return None
        idx = []
        need = self.batch_size
        while need > 0:
            if self.pos >= self.order.shape[0]:
                self.order = self.rng.permutation(n)
                self.pos = 0
            take = self.order[self.pos:self.pos + need]
            idx.append(take)
            self.pos += take.shape[0]
            need -= take.shape[0]
        return self.data.take(np.concatenate(idx))


class _MlpProblem:
    def __init__(self, model: MlpModel, data: BenchDatasets, cfg: TrainConfig):
        self.model = model
        root = Rng(cfg.seed)
        self.streams = (
            _BatchStream(data.subset_X, cfg.batch_size, root.spawn(2)),
            _BatchStream(data.subset_Xp, cfg.batch_size, root.spawn(3)),
        )
        p = model.partition
        self.proj = p["projection"]
        n = model.n_params
        mask = np.ones(n, dtype=bool)
        mask[self.proj] = False
        self.shared = np.flatnonzero(mask)

    @property
    def n_params(self) -> int:
        return self.model.n_params

    def losses_and_grads(self):
        out = []
        for stream in self.streams:
            batch = stream.next()
            if batch is None:
                out.append((0.0, np.zeros(self.model.n_params)))
            else:
                out.append(self.model.loss_and_grad(batch))
        (l1, g1), (l2, g2) = out
        return l1, l2, g1, g2

    def apply(self, update: np.ndarray, alpha: float) -> None:
        self.model.step(update, alpha)


class _ToyProblem:
    def __init__(self, landscape: ToyLandscape, theta0, projection: tuple[int, ...]):
        self.landscape = landscape
        self.theta = np.array(theta0 if theta0 is not None else landscape.start, dtype=np.float64)
        self.proj = np.array(sorted(projection), dtype=np.int64)
        self.shared = np.array([i for i in range(self.theta.shape[0]) if i not in set(projection)], dtype=np.int64)

    @property
    def n_params(self) -> int:
        return self.theta.shape[0]

    def losses_and_grads(self):
        t = self.theta
        ls = self.landscape
        return float(ls.loss1(t)), float(ls.loss2(t)), ls.grad1(t), ls.grad2(t)

    def apply(self, update: np.ndarray, alpha: float) -> None:
        self.theta = self.theta - alpha * update


# --------------------------------------------------------------- combination


def combine_gradients(strategy: Strategy, g1, g2, cfg: TrainConfig, shared, proj, prev_mu=None):
    """Map the two subset gradients to the parameter update for one step.

    Returns ``(update, mu1, flags)``; ``mu1`` is None for strategies without
    the update search.
    """
    flags: list[str] = []
    mu1 = None
    if strategy is Strategy.ORIGINAL_ONLY:
        return g1.copy(), mu1, flags
    if strategy is Strategy.SYNTH_ONLY:
        return g2.copy(), mu1, flags
    if strategy is Strategy.PCGRAD:
        return pcgrad_combine(g1, g2), mu1, flags

    update = g1 + g2
    if strategy.uses_uvs:
        # With CGR active the projection block is owned by CGR, so UVS sees only the shared block.
        idx = shared if strategy.uses_cgr else slice(None)
        sol = uvs_step(g1[idx], g2[idx], cfg.uvs, prev_mu)
        mu1 = sol.mu_star.mu1
        if sol.degenerate is not Degeneracy.NONE:
            flags.append(sol.degenerate.value)
        update[idx] = sol.v_star
    if strategy.uses_cgr and _size(proj) > 0:
        res = cgr_gradient(g1[proj], g2[proj], cfg.cgr)
        if res.degenerate:
            flags.append("cgr_degenerate")
        update[proj] = res.gradient
    return update, mu1, flags


def _size(idx) -> int:
    if isinstance(idx, slice):
        return max(0, idx.stop - idx.start)
    return len(idx)


def _cosine(g1: np.ndarray, g2: np.ndarray) -> float | None:
    n1 = math.sqrt(float(g1 @ g1))
    n2 = math.sqrt(float(g2 @ g2))
    if n1 <= 1e-12 or n2 <= 1e-12:
        return None
    return min(1.0, max(-1.0, float(g1 @ g2) / n1 / n2))


def _run(problem, cfg: TrainConfig, strategy: Strategy, on_step=None) -> list[StepRecord]:
    rows: list[StepRecord] = []
    prev_mu: SimplexWeights | None = None
    for step in range(cfg.steps):
        l1, l2, g1, g2 = problem.losses_and_grads()
        if not (math.isfinite(l1) and math.isfinite(l2)):
            raise TrainingDiverged(step, {"loss1": l1, "loss2": l2, "strategy": strategy.value})
        if on_step is not None:
            on_step(step, l1, l2)
        update, mu1, flags = combine_gradients(strategy, g1, g2, cfg, problem.shared, problem.proj, prev_mu)
        if mu1 is not None:
            prev_mu = SimplexWeights.from_first(mu1)
        cos = _cosine(g1, g2)
        if cos is None:
            flags.append("zero_grad")
            cos = 0.0
        # A zero_g0 step carries a zero update block, so applying it is a no-op there.
        problem.apply(update, cfg.alpha)
        rows.append(
            StepRecord(
                step, l1, l2, cos, math.sqrt(float(g1 @ g1)), math.sqrt(float(g2 @ g2)), mu1,
                "|".join(flags) if flags else "none",
            )
        )
    return rows


# --------------------------------------------------------------- front doors


def init_model(cfg: TrainConfig, input_dim: int = 16) -> MlpModel:
    return MlpModel.init(Rng(cfg.seed).spawn(1), default_layers(input_dim))


def evaluate(model: MlpModel, test: Batch) -> tuple[float, float]:
    """AUC of sigmoid scores and mean BCE loss on a test set."""
    logits, _ = model.forward(test.inputs)
    loss, _ = bce_loss_and_grad(logits, test.labels)
    return auc(sigmoid(logits), test.labels), loss


def train(cfg: TrainConfig, data: BenchDatasets, strategy: Strategy, model: MlpModel | None = None):
    model = model if model is not None else init_model(cfg, data.subset_X.dim)
    problem = _MlpProblem(model, data, cfg)
    evals: list[dict] = []

    def on_step(step, l1, l2):
        if cfg.eval_every and step > 0 and step % cfg.eval_every == 0:
            a_s, _ = evaluate(model, data.source_test)
            a_t, _ = evaluate(model, data.target_test)
            evals.append({"step": step, "auc_source": a_s, "auc_target": a_t})

    rows = _run(problem, cfg, strategy, on_step)
    report = RunReport(strategy, cfg, rows, evals=evals)
    report.auc_source, report.loss_source = evaluate(model, data.source_test)
    report.auc_target, report.loss_target = evaluate(model, data.target_test)
    log.info("%s: auc_source=%.4f auc_target=%.4f", strategy.value, report.auc_source, report.auc_target)
    return model, report


def train_toy(cfg: TrainConfig, landscape: ToyLandscape, strategy: Strategy, theta0=None, projection=()):
    """Run a strategy on a two-parameter landscape.

    ``projection`` lists the coordinates treated as the projection block;
    by default there is none, so CGR-based strategies leave every coordinate
    on the shared path.
    """
    problem = _ToyProblem(landscape, theta0, tuple(projection))
    trajectory = []
    theta_hist = []

    def on_step(step, l1, l2):
        theta_hist.append(problem.theta.copy())

    rows = _run(problem, cfg, strategy, on_step)
    for r, th in zip(rows, theta_hist):
        trajectory.append((r.step, float(th[0]), float(th[1]), r.loss1, r.loss2, r.cosine))
    return problem.theta, RunReport(strategy, cfg, rows, trajectory=trajectory)


def run_ablation_suite(base_cfg: TrainConfig, data: BenchDatasets, strategies=ALL_STRATEGIES) -> dict[Strategy, RunReport]:
    """Train every strategy from the same seed and data; returns reports keyed by strategy."""
    reports = {}
    for s in strategies:
        _, reports[s] = train(base_cfg, data, s)
    return reports


ABLATION_COLUMNS = (
    "strategy", "auc_source", "auc_target", "final_window_cosine",
    "oscillation_loss1", "oscillation_loss2", "final_loss1", "final_loss2",
)


def ablation_table(reports: dict[Strategy, RunReport]) -> list[tuple]:
    rows = []
    for s, rep in reports.items():
        m = rep.metrics()
        rows.append(tuple([s.value] + [m[c] for c in ABLATION_COLUMNS[1:]]))
    return rows
