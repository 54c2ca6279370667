import time
from pathlib import Path

import pytest

from dodwda.harness import load_config, run_scenario

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"
REFERENCE_CONFIG = SCENARIOS / "paper_fig1.json"
ACCEPTANCE_SEEDS = tuple(range(10))

_criterion_lines: list[str] = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion."""

    def record(number, passed: bool, detail: str):
        line = f"CRITERION {number}: {'PASS' if passed else 'FAIL'} - {detail}"
        print(line)
        _criterion_lines.append(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _criterion_lines:
        terminalreporter.section("acceptance criteria")
        for line in _criterion_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def reference_config():
    return load_config(REFERENCE_CONFIG)


@pytest.fixture(scope="session")
def reference_runs(reference_config):
    """Reference scenario for every acceptance seed, with wall-clock time per run."""
    runs = {}
    for seed in ACCEPTANCE_SEEDS:
        start = time.perf_counter()
        result = run_scenario(reference_config, seed)
        runs[seed] = (result, time.perf_counter() - start)
    return runs
