"""Acceptance criteria 1-11, one PASS/FAIL line each.

Run under pytest or directly: ``python3 tests/test_acceptance.py [numbers...]``.
"""
import sys

import pytest

from wavetrap.acceptance import CRITERIA, run_criterion

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:          # running as a script from elsewhere
    ACCEPTANCE_LINES = []

SLOW = {7}


@pytest.mark.parametrize("number", [pytest.param(n, marks=pytest.mark.slow) if n in SLOW else n
                                    for n in sorted(CRITERIA)])
def test_criterion(number):
    res = run_criterion(number)
    line = res.line()
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert res.passed, line


if __name__ == "__main__":
    sel = [int(a) for a in sys.argv[1:]] or sorted(CRITERIA)
    failed = 0
    for n in sel:
        r = run_criterion(n)
        print(r.line(), flush=True)
        failed += not r.passed
    sys.exit(1 if failed else 0)
