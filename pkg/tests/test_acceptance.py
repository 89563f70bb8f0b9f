"""Acceptance suite: one test per criterion at its stated tolerance.

Each test prints the criterion's pass/fail line, and the failing checks with
their deltas, regardless of outcome.
"""

import time

import pytest

from trimoment import acceptance as ac
from trimoment import moments as mo

_CACHE: dict[int, ac.CriterionResult] = {}


def _result(i):
    if i not in _CACHE:
        _CACHE[i] = ac.run_criterion(i, "default")
    return _CACHE[i]


@pytest.mark.parametrize("i", sorted(ac.CRITERIA))
def test_criterion(i, capsys):
    r = _result(i)
    with capsys.disabled():
        print("\n" + r.line())
        for c in r.failures():
            print(f"    {c.name}: value={c.value:.12g} target={c.target:.12g} delta={c.delta:.6g}"
                  + (f"  ({c.note})" if c.note else ""))
    assert r.checks, "criterion ran no checks"
    if not r.passed:
        pytest.fail(r.line(), pytrace=False)


def _wrong_normalizer(k, ms):
    # (alpha k + 2) in place of (alpha k + 1)
    a = ms.alpha
    return mo.limit_moment(k, ms) * (a * k + 1) / (a * k + 2)


@pytest.mark.parametrize("crit", [ac.c3_moment_formulas, ac.c4_semicircle])
def test_wrong_predictor_is_caught(crit):
    r = crit("quick", predictor=_wrong_normalizer)
    assert not r.passed
    assert all(abs(c.delta) > c.tol for c in r.failures())
    assert "delta=" in r.line()


def test_quick_scale_budget():
    t0 = time.perf_counter()
    results = ac.run_all("quick")
    assert time.perf_counter() - t0 < 60
    assert [r.id for r in results] == sorted(ac.CRITERIA)


def test_unknown_scale():
    with pytest.raises(ValueError):
        ac.run_criterion(1, "huge")
