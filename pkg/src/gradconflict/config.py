"""Experiment configuration files.

The format is INI (``configparser``) with one section per component::

    [train]       alpha, steps, batch_size, seed, eval_every, log_window
    [uvs]         c, beta, dual_iters, eps_g0, eps_gw, warm_start
    [cgr]         tau, eps_norm
    [bench]       dim, n_per_class, conflict_strength, noise_sigma, seed,
                  target_shift, method_offset, blend_offset, novel_offset
    [experiment]  strategies, out, emit_bench

Parsing is strict: unknown sections or keys are rejected, and a committed
config must spell out alpha, c, tau and conflict_strength.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field
from pathlib import Path

from .bench import SynthBenchConfig
from .cgr import CgrConfig
from .trainer import ALL_STRATEGIES, Strategy, TrainConfig
from .uvs import UvsConfig

REQUIRED = {("train", "alpha"), ("uvs", "c"), ("cgr", "tau"), ("bench", "conflict_strength")}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    bench: SynthBenchConfig = field(default_factory=SynthBenchConfig)
    strategies: tuple[Strategy, ...] = ALL_STRATEGIES
    out: str = "results"
    emit_bench: bool = True

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return dataclasses.replace(
            self,
            train=dataclasses.replace(self.train, seed=seed),
            bench=dataclasses.replace(self.bench, seed=seed),
        )

    def to_dict(self) -> dict:
        return {
            "train": {k: v for k, v in dataclasses.asdict(self.train).items() if k not in ("uvs", "cgr")},
            "uvs": dataclasses.asdict(self.train.uvs),
            "cgr": dataclasses.asdict(self.train.cgr),
            "bench": dataclasses.asdict(self.bench),
            "experiment": {
                "strategies": [s.value for s in self.strategies],
                "out": self.out,
                "emit_bench": self.emit_bench,
            },
        }

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        for section, values in self.to_dict().items():
            cp[section] = {k: _fmt(v) for k, v in values.items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ", ".join(str(x) for x in v)
    return str(v)


def _convert(section: str, key: str, raw: str, default):
    try:
        if isinstance(default, bool):
            low = raw.strip().lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw.strip()
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from None


def _section(cp, name: str, default_obj) -> dict:
    if not cp.has_section(name):
        return {}
    allowed = {f.name for f in dataclasses.fields(default_obj)} - {"uvs", "cgr"}
    out = {}
    for key, raw in cp.items(name):
        if key not in allowed:
            raise ConfigError(f"unknown key '{key}' in section [{name}]")
        out[key] = _convert(name, key, raw, getattr(default_obj, key))
    return out


def parse_config(text: str, require_explicit: bool = True) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    known = {"train", "uvs", "cgr", "bench", "experiment"}
    for name in cp.sections():
        if name not in known:
            raise ConfigError(f"unknown section [{name}]")

    base = ExperimentConfig()
    sections = {
        "uvs": _section(cp, "uvs", base.train.uvs),
        "cgr": _section(cp, "cgr", base.train.cgr),
        "train": _section(cp, "train", base.train),
        "bench": _section(cp, "bench", base.bench),
    }
    if require_explicit:
        missing = [f"{s}.{k}" for s, k in sorted(REQUIRED) if k not in sections[s]]
        if missing:
            raise ConfigError(f"config must set {', '.join(missing)} explicitly")
    try:
        uvs = UvsConfig(**sections["uvs"])
        cgr = CgrConfig(**sections["cgr"])
        train = TrainConfig(uvs=uvs, cgr=cgr, **sections["train"])
        bench = SynthBenchConfig(**sections["bench"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    kwargs = {}
    if cp.has_section("experiment"):
        for key, raw in cp.items("experiment"):
            if key == "strategies":
                try:
                    kwargs[key] = tuple(Strategy.parse(s) for s in raw.split(",") if s.strip())
                except ValueError as exc:
                    raise ConfigError(f"[experiment] strategies: {exc}") from None
            elif key == "out":
                kwargs[key] = raw.strip()
            elif key == "emit_bench":
                kwargs[key] = _convert("experiment", key, raw, True)
            else:
                raise ConfigError(f"unknown key '{key}' in section [experiment]")
    return ExperimentConfig(train=train, bench=bench, **kwargs)


def load_config(path: str | Path, require_explicit: bool = True) -> ExperimentConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"), require_explicit)
