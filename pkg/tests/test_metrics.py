import numpy as np
import pytest
from hypothesis import given, strategies as st

from mage.metrics import pass_at_k, success_by_index, wilson_interval


def brute_pass(m, k):
    hits = 0
    for row in m:
        for j in range(k):
            if row[j]:
                hits += 1
                break
    return hits / len(m)


def test_examples():
    m = [[False, True, False]]
    assert [pass_at_k(m, k) for k in (1, 2, 3)] == [0, 1, 1]
    zeros = np.zeros((5, 3), dtype=bool)
    assert all(pass_at_k(zeros, k) == 0 for k in (1, 2, 3))


def test_matches_brute_force_scan():
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        rows, n = int(rng.integers(1, 20)), int(rng.integers(1, 6))
        m = rng.random((rows, n)) < rng.random()
        k = int(rng.integers(1, n + 1))
        assert pass_at_k(m, k) == brute_pass(m.tolist(), k)


@given(st.lists(st.lists(st.booleans(), min_size=3, max_size=3), min_size=1, max_size=30))
def test_monotone_in_k(m):
    vals = [pass_at_k(m, k) for k in (1, 2, 3)]
    assert vals == sorted(vals)
    assert vals[0] == success_by_index(m)[0]


def test_bad_k():
    with pytest.raises(ValueError):
        pass_at_k([[True]], 2)
    with pytest.raises(ValueError):
        pass_at_k(np.zeros((0, 3)), 1)


def test_wilson_interval():
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi and hi - lo == pytest.approx(0.1925, abs=1e-3)
    assert wilson_interval(0, 10)[0] == 0.0
    assert wilson_interval(10, 10)[1] == 1.0
    assert wilson_interval(0, 0) == (0.0, 1.0)
