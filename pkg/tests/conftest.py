import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gradconflict.bench import SynthBenchConfig, gen_synth_bench  # noqa: E402
from gradconflict.trainer import TrainConfig, run_ablation_suite  # noqa: E402


@pytest.fixture(scope="session")
def default_bench():
    return gen_synth_bench(SynthBenchConfig(seed=42, conflict_strength=1.0))


@pytest.fixture(scope="session")
def timed_reports(default_bench):
    """All seven strategies on the seed-42 default bench (2000 steps, alpha 0.01, c 0.5, tau 0.01)."""
    start = time.perf_counter()
    reports = run_ablation_suite(TrainConfig(), default_bench)
    return reports, time.perf_counter() - start


@pytest.fixture(scope="session")
def default_reports(timed_reports):
    return timed_reports[0]


def pytest_terminal_summary(terminalreporter):
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            for name, value in getattr(rep, "user_properties", []):
                if name == "criterion":
                    lines.append(value)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
