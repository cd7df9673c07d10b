"""Command-line front end: ``gradconflict {bench,toy,verify,ablate}``.

Exit codes: 0 success, 1 a check failed, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .bench import TRAJECTORY_COLUMNS, LandscapeId, gen_synth_bench, make_toy_landscape, save_bench
from .config import ConfigError, ExperimentConfig, load_config
from .numkit import ALGORITHM_ID
from .reporting import write_csv
from .trainer import (
    ABLATION_COLUMNS,
    LOG_COLUMNS,
    Strategy,
    TrainingDiverged,
    ablation_table,
    train,
    train_toy,
)
from .verify import run_checks

log = logging.getLogger("gradconflict")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


def _provenance(cfg: ExperimentConfig) -> dict:
    return {"algorithm_id": ALGORITHM_ID, "version": __version__, "config": cfg.to_dict()}


def _resolve(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "strategy", None):
        cfg = dataclasses.replace(cfg, strategies=(Strategy.parse(args.strategy),))
    if args.out:
        cfg = dataclasses.replace(cfg, out=args.out)
    return cfg


def _run_matrix(cfg: ExperimentConfig, out: Path) -> dict:
    data = gen_synth_bench(cfg.bench)
    if cfg.emit_bench:
        save_bench(data, out / "bench")
    reports = {}
    for strategy in cfg.strategies:
        _, rep = train(cfg.train, data, strategy)
        run_dir = out / "runs" / strategy.value
        run_dir.mkdir(parents=True, exist_ok=True)
        write_csv(run_dir / "log.csv", LOG_COLUMNS, rep.log_rows())
        _dump_json(run_dir / "metrics.json", {**rep.metrics(), **_provenance(cfg)})
        reports[strategy] = rep
    return reports


def cmd_bench(args) -> int:
    cfg = _resolve(args)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    reports = _run_matrix(cfg, out)
    write_csv(out / "summary.csv", ABLATION_COLUMNS, ablation_table(reports))
    metrics = {s.value: {k: v for k, v in r.metrics().items() if k != "config"} for s, r in reports.items()}
    _dump_json(out / "metrics.json", {"runs": metrics, **_provenance(cfg)})
    print(f"wrote {len(reports)} runs to {out}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _resolve(args)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    reports = _run_matrix(cfg, out)
    rows = ablation_table(reports)
    write_csv(out / "ablation.csv", ABLATION_COLUMNS, rows)
    lines = [f"{'strategy':<14s} {'auc_src':>8s} {'auc_tgt':>8s} {'cos':>7s} {'std_L1':>8s} {'std_L2':>8s}"]
    for r in rows:
        lines.append(f"{r[0]:<14s} {r[1]:8.4f} {r[2]:8.4f} {r[3]:+7.3f} {r[4]:8.4f} {r[5]:8.4f}")
    text = "\n".join(lines) + "\n"
    (out / "ablation.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


def cmd_toy(args) -> int:
    landscape = make_toy_landscape(LandscapeId.parse(args.landscape))
    strategy = Strategy.parse(args.strategy_name)
    cfg = _resolve(args)
    default_out = Path("toy") / f"{landscape.id.value}_{strategy.value}"
    out = Path(args.out) if args.out else default_out
    out.mkdir(parents=True, exist_ok=True)
    _, rep = train_toy(cfg.train, landscape, strategy)
    write_csv(out / "trajectory.csv", TRAJECTORY_COLUMNS, rep.trajectory)
    print(f"wrote {out / 'trajectory.csv'} ({len(rep.trajectory)} rows)")
    return EXIT_OK


def cmd_verify(args) -> int:
    results = run_checks(args.level)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_FAIL if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gradconflict", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, strategy_flag=True):
        sp.add_argument("--config", metavar="PATH")
        sp.add_argument("--out", metavar="DIR")
        sp.add_argument("--seed", type=int, metavar="U64")
        if strategy_flag:
            sp.add_argument("--strategy", metavar="NAME")

    sp = sub.add_parser("bench", help="generate the synthetic bench and run the strategy matrix")
    common(sp)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("ablate", help="run the seven-strategy comparison and print a table")
    common(sp)
    sp.set_defaults(func=cmd_ablate)

    sp = sub.add_parser("toy", help="write a trajectory on a two-parameter landscape")
    sp.add_argument("landscape", help="SplitQuadratic or BananaPair")
    sp.add_argument("strategy_name", metavar="strategy")
    common(sp, strategy_flag=False)
    sp.set_defaults(func=cmd_toy)

    sp = sub.add_parser("verify", help="run the oracle suites")
    sp.add_argument("level", nargs="?", choices=("fast", "full"), default="fast")
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
