"""Every acceptance criterion at its stated threshold and time budget.

One PASS/FAIL line per criterion is printed in the terminal summary.
"""
import pytest

from feskl import acceptance

RESULTS: list = []


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(acceptance.CRITERIA))
def test_criterion(number):
    result = acceptance.run_criterion(number)
    RESULTS.append(result)
    assert result.passed, result.line
