"""Acceptance matrix: every criterion at its stated tolerance and runtime budget.

Each criterion prints one ``PASS``/``FAIL`` line (visible with ``pytest -s``
and in the terminal summary).  Monte Carlo checks use 3σ with one retry at
``seed + 7919``; a check fails only if both runs fail.
"""

import pytest

from polyaprod.validation import CRITERIA, run_criterion

SEED = 42


@pytest.mark.acceptance
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    res = run_criterion(number, seed=SEED)
    with capsys.disabled():
        print("\n" + res.line())
    failing = [c for c in res.checks if not c.passed]
    assert res.passed, "\n".join(str(c) for c in failing)
