"""End-to-end acceptance gate.

Runs each numbered criterion from the selftest suite and prints its
pass/fail line; a criterion failure fails the corresponding test.  The
details string shows every clause so a failure is diagnosable from the
pytest output alone.
"""

import pytest

from riccilab import acceptance


@pytest.mark.parametrize("number", range(1, 11))
def test_criterion(number, capsys):
    result = acceptance.run_one(number)
    line = "PASS" if result.passed else "FAIL"
    with capsys.disabled():
        print(f"\ncriterion {result.number:2d} [{line}] {result.name} ({result.elapsed:.2f} s)")
    if not result.passed:
        pytest.fail(
            f"criterion {result.number} ({result.name}) failed:\n{result.details}",
            pytrace=False,
        )
