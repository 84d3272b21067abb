import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from nsclab.lp import INFEASIBLE, OPTIMAL, UNBOUNDED, linprog_max


def test_textbook():
    # max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
    r = linprog_max([3, 5], [[1, 0], [0, 2], [3, 2]], [4, 12, 18])
    assert r.status == OPTIMAL
    np.testing.assert_allclose(r.x, [2, 6], atol=1e-12)
    assert r.value == pytest.approx(36)


def test_infeasible_and_unbounded():
    assert linprog_max([1, 0], [[1, 1]], [-1]).status == INFEASIBLE
    assert linprog_max([1, 1], [[1, -1]], [1]).status == UNBOUNDED
    assert linprog_max([1], A_eq=[[1]], b_eq=[2]).value == pytest.approx(2)


def test_degenerate_cycling_example():
    # Beale's example cycles under the textbook rule; Bland's rule terminates
    c = [0.75, -150, 0.02, -6]
    A = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
    r = linprog_max(c, A, [0, 0, 1])
    assert r.status == OPTIMAL and r.value == pytest.approx(0.05)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 4), st.integers(1, 6), st.integers(0, 2))
def test_matches_scipy(seed, n, m_ub, m_eq):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(n)
    A_ub = rng.standard_normal((m_ub, n))
    b_ub = rng.standard_normal(m_ub)
    A_eq = rng.standard_normal((m_eq, n)) if m_eq else None
    b_eq = rng.standard_normal(m_eq) if m_eq else None
    ours = linprog_max(c, A_ub, b_ub, A_eq, b_eq)
    ref = linprog(-c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * n, method="highs")
    expected = {0: OPTIMAL, 2: INFEASIBLE, 3: UNBOUNDED}[ref.status]
    assert ours.status == expected
    if expected == OPTIMAL:
        assert ours.value == pytest.approx(-ref.fun, rel=1e-8, abs=1e-8)
        assert np.all(ours.x >= -1e-10)
        assert np.all(A_ub @ ours.x <= b_ub + 1e-8)
