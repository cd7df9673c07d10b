"""Synthetic workloads with engineered gradient conflict, plus the AUC metric.

Two kinds of workload live here:

* closed-form two-loss landscapes on R^2 for trajectory studies, and
* a generated binary classification benchmark split into the two training
  subsets ``[real, original-style fakes]`` and ``[real, synthesized-style
  fakes]`` together with a source test set and a shifted target test set.

The classification benchmark plants one shared cue on feature 0 whose sign
flips between the two fake types, so the per-subset gradients on the weights
attached to that feature point in opposite directions.
"""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.stats import rankdata

from .numkit import ALGORITHM_ID, Batch, Rng, SubsetTag
from .reporting import write_csv

# ---------------------------------------------------------------- landscapes


class LandscapeId(enum.Enum):
    SPLIT_QUADRATIC = "SplitQuadratic"
    BANANA_PAIR = "BananaPair"

    @classmethod
    def parse(cls, name: str) -> "LandscapeId":
        for member in cls:
            if member.value.lower() == name.lower() or member.name.lower() == name.lower():
                return member
        raise ValueError(f"unknown landscape {name!r}; expected one of {[m.value for m in cls]}")


Fn = Callable[[np.ndarray], float]
GradFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ToyLandscape:
    id: LandscapeId
    loss1: Fn
    loss2: Fn
    grad1: GradFn
    grad2: GradFn
    start: tuple[float, float]


SPLIT_KAPPA = 0.8
BANANA_CURVATURE = 5.0


def make_toy_landscape(landscape_id: LandscapeId | str) -> ToyLandscape:
    """Build a two-loss landscape on R^2.

    SplitQuadratic::

        L1 = (t1 - 1)^2 + t2^2 + k t1 t2
        L2 = (t1 + 1)^2 + t2^2 - k t1 t2,   k = 0.8

    BananaPair, two Rosenbrock valleys mirrored through t1 = 0 that share the
    parabola t2 = t1^2 but bottom out at t1 = +1 and t1 = -1::

        L1 = (1 - t1)^2 + b (t2 - t1^2)^2
        L2 = (1 + t1)^2 + b (t2 - t1^2)^2,   b = 5
    """
    if isinstance(landscape_id, str):
        landscape_id = LandscapeId.parse(landscape_id)
    k = SPLIT_KAPPA
    b = BANANA_CURVATURE
    if landscape_id is LandscapeId.SPLIT_QUADRATIC:
        return ToyLandscape(
            landscape_id,
            lambda t: (t[0] - 1.0) ** 2 + t[1] ** 2 + k * t[0] * t[1],
            lambda t: (t[0] + 1.0) ** 2 + t[1] ** 2 - k * t[0] * t[1],
            lambda t: np.array([2.0 * (t[0] - 1.0) + k * t[1], 2.0 * t[1] + k * t[0]]),
            lambda t: np.array([2.0 * (t[0] + 1.0) - k * t[1], 2.0 * t[1] - k * t[0]]),
            start=(0.5, 2.0),
        )
    if landscape_id is LandscapeId.BANANA_PAIR:

        def valley_grad(t):
            r = t[1] - t[0] ** 2
            return np.array([-4.0 * b * t[0] * r, 2.0 * b * r])

        return ToyLandscape(
            landscape_id,
            lambda t: (1.0 - t[0]) ** 2 + b * (t[1] - t[0] ** 2) ** 2,
            lambda t: (1.0 + t[0]) ** 2 + b * (t[1] - t[0] ** 2) ** 2,
            lambda t: np.array([-2.0 * (1.0 - t[0]), 0.0]) + valley_grad(t),
            lambda t: np.array([2.0 * (1.0 + t[0]), 0.0]) + valley_grad(t),
            start=(0.3, -1.0),
        )
    raise ValueError(f"unknown landscape {landscape_id!r}")


# ------------------------------------------------------------ synthetic data


@dataclass(frozen=True)
class SynthBenchConfig:
    dim: int = 16
    n_per_class: int = 512
    conflict_strength: float = 1.0
    noise_sigma: float = 0.5
    seed: int = 42
    target_shift: float = 0.5
    method_offset: float = 1.0
    blend_offset: float = 1.0
    novel_offset: float = 1.0

    def __post_init__(self):
        if self.dim < 13:
            # features 0..12 carry the cue, method, blend and novel offsets
            raise ValueError(f"dim must be at least 13, got {self.dim}")
        if not 0.0 <= self.conflict_strength <= 1.0:
            raise ValueError(f"conflict_strength must lie in [0, 1], got {self.conflict_strength}")
        if self.n_per_class < 1:
            raise ValueError("n_per_class must be >= 1")
        if not self.noise_sigma > 0:
            raise ValueError("noise_sigma must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def offsets(self) -> dict[str, list[float]]:
        d = self.dim
        cue = np.zeros(d)
        cue[0] = self.conflict_strength
        method = np.zeros(d)
        method[1:5] = self.method_offset
        blend = np.zeros(d)
        blend[5:9] = self.blend_offset
        target = np.zeros(d)
        target[5:9] = self.blend_offset + self.target_shift
        target[9:13] = self.novel_offset
        return {
            "fake_original": (cue + method).tolist(),
            "fake_synth": (-cue + blend).tolist(),
            "fake_target": target.tolist(),
        }


@dataclass(frozen=True)
class BenchDatasets:
    subset_X: Batch
    subset_Xp: Batch
    source_test: Batch
    target_test: Batch
    config: SynthBenchConfig = field(default_factory=SynthBenchConfig)

    SPLITS = ("subset_X", "subset_Xp", "source_test", "target_test")

    def splits(self) -> dict[str, Batch]:
        return {name: getattr(self, name) for name in self.SPLITS}


def gen_synth_bench(cfg: SynthBenchConfig) -> BenchDatasets:
    rng = Rng(cfg.seed)
    n, d = cfg.n_per_class, cfg.dim
    off = {k: np.array(v) for k, v in cfg.offsets().items()}

    def draw(mean: np.ndarray | None) -> np.ndarray:
        x = cfg.noise_sigma * rng.normals(n * d).reshape(n, d)
        return x if mean is None else x + mean

    def stack(parts, labels, tag):
        return Batch(np.vstack(parts), np.concatenate([np.full(n, y, dtype=np.float64) for y in labels]), tag)

    subset_X = stack([draw(None), draw(off["fake_original"])], [0.0, 1.0], SubsetTag.ORIGINAL)
    subset_Xp = stack([draw(None), draw(off["fake_synth"])], [0.0, 1.0], SubsetTag.SYNTH)
    source_test = stack(
        [draw(None), draw(off["fake_original"]), draw(off["fake_synth"])], [0.0, 1.0, 1.0], SubsetTag.TEST
    )
    target_test = stack([draw(None), draw(off["fake_target"])], [0.0, 1.0], SubsetTag.TEST)
    return BenchDatasets(subset_X, subset_Xp, source_test, target_test, cfg)


def save_bench(data: BenchDatasets, path: str | Path) -> tuple[Path, Path]:
    """Write ``<path>.bin`` (column-major little-endian float64) and ``<path>.json``.

    Each split is stored as its input matrix in column-major order followed by
    its label vector. The sidecar records byte offsets and shapes per split.
    """
    path = Path(path)
    bin_path = path.with_suffix(".bin")
    meta_path = path.with_suffix(".json")
    splits_meta = {}
    offset = 0
    with open(bin_path, "wb") as fh:
        for name, batch in data.splits().items():
            x = np.asfortranarray(batch.inputs).astype("<f8", copy=False)
            y = batch.labels.astype("<f8", copy=False)
            fh.write(x.tobytes(order="F"))
            fh.write(y.tobytes())
            splits_meta[name] = {
                "rows": int(x.shape[0]),
                "cols": int(x.shape[1]),
                "offset": offset,
                "tag": batch.subset_tag.value,
            }
            offset += x.nbytes + y.nbytes
    cfg = data.config
    meta = {
        "format": "column-major float64 little-endian; per split: inputs[rows x cols] then labels[rows]",
        "dims": cfg.dim,
        "seed": cfg.seed,
        "algorithm_id": ALGORITHM_ID,
        "config": asdict(cfg),
        "offsets": cfg.offsets(),
        "splits": splits_meta,
    }
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return bin_path, meta_path


def load_bench(path: str | Path) -> BenchDatasets:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    raw = path.with_suffix(".bin").read_bytes()
    batches = {}
    for name in BenchDatasets.SPLITS:
        m = meta["splits"][name]
        r, c, o = m["rows"], m["cols"], m["offset"]
        x = np.frombuffer(raw, dtype="<f8", count=r * c, offset=o).reshape((r, c), order="F")
        y = np.frombuffer(raw, dtype="<f8", count=r, offset=o + 8 * r * c)
        batches[name] = Batch(np.ascontiguousarray(x, dtype=np.float64), y.astype(np.float64), SubsetTag(m["tag"]))
    return BenchDatasets(config=SynthBenchConfig(**meta["config"]), **batches)


# -------------------------------------------------------------------- metric


def auc(scores, labels) -> float:
    """Mann-Whitney estimate of ROC AUC; tied scores count one half."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if s.shape != y.shape:
        raise ValueError("scores and labels must have the same length")
    n_pos = int(np.sum(y == 1.0))
    n_neg = int(np.sum(y == 0.0))
    if n_pos + n_neg != y.shape[0]:
        raise ValueError("labels must be 0 or 1")
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs at least one positive and one negative label")
    ranks = rankdata(s)
    u = float(np.sum(ranks[y == 1.0])) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


# --------------------------------------------------------------- trajectory

TRAJECTORY_COLUMNS = ("step", "theta1", "theta2", "loss1", "loss2", "cosine")


def trajectory_dump(landscape: ToyLandscape, optimizer_tag, steps: int, alpha: float, out=None, **kwargs):
    """Run a strategy on a toy landscape and write one CSV row per visited point.

    Returns the list of rows. ``out`` may be a path or a writable text stream.
    """
    from .trainer import Strategy, TrainConfig, train_toy  # trainer depends on this module

    strategy = Strategy.parse(optimizer_tag) if isinstance(optimizer_tag, str) else optimizer_tag
    cfg = kwargs.pop("cfg", None) or TrainConfig(alpha=alpha, steps=steps)
    _, report = train_toy(cfg, landscape, strategy, **kwargs)
    rows = report.trajectory
    if out is not None:
        write_csv(out, TRAJECTORY_COLUMNS, rows)
    return rows
