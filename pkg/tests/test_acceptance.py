"""Acceptance criteria, one shipped configuration each.

Each run prints a single ``PASS`` or ``FAIL`` line. The lines are also
collected and repeated in the terminal summary, so they show without ``-s``.
"""

from pathlib import Path

import pytest

from conftest import ACCEPTANCE_LINES
from kgmlimit.harness.config import load_config
from kgmlimit.harness.experiments import run_experiment

CONFIGS = sorted((Path(__file__).resolve().parent.parent / "configs").glob("c[0-9][0-9]_*.ini"))


def test_all_twelve_criteria_are_configured():
    assert [int(p.name[1:3]) for p in CONFIGS] == list(range(1, 13))


@pytest.mark.parametrize("path", CONFIGS, ids=[p.stem for p in CONFIGS])
def test_criterion(path, tmp_path):
    cfg = load_config(path).with_overrides(out=str(tmp_path / path.stem))
    res = run_experiment(cfg)
    n = int(path.name[1:3])
    line = f"{'PASS' if res.passed else 'FAIL'} criterion {n}: {res.name}: {res.summary}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert res.passed, line
