"""Acceptance gate: every criterion at its stated tolerance and full scale.

One PASS/FAIL line per criterion is printed in the terminal summary.
"""

import pytest

from rwre.checks import run_criterion

RESULTS: dict[int, str] = {}


@pytest.mark.slow
@pytest.mark.parametrize("criterion", range(1, 13))
def test_criterion(criterion):
    run = run_criterion(criterion, scale="full")
    RESULTS[criterion] = run.line()
    print(run.line())
    metrics = run.outcome.metric_map
    failed = {v.name: [(n, metrics[n].value, metrics[n].sigma) for n in v.violations(metrics)]
              for v in run.outcome.verdicts if not v.passed}
    assert run.passed, f"{run.line()}\nout of bounds (name, value, sigma): {failed}"
