import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from nsclab.errors import TooLarge, WrongDimension, ZeroVector
from nsclab.linalg import NullSpaceBasis, null_space_basis
from nsclab.matgen import gaussian
from nsclab.nsc import (NscConfig, NscQuery, Prepared, Status, nsc_estimate, nsc_exact_d1, nsc_exact_l1_enum,
                        nsc_grid_d2, nsc_l0, nsc_multistart, theta, top_k_support)
from nsclab.spark import SparkResult, compute_spark


def vertex_oracle_l1(A, k):
    """gamma(l1, A, k) from the null vectors with d-1 zeros (vertices of ker A cut by the l1 ball)."""
    B = null_space_basis(A).basis
    N, d = B.shape
    best = 0.0
    for T in combinations(range(N), d - 1):
        sub = B[list(T)]
        _, s, vt = np.linalg.svd(sub) if d > 1 else (None, np.zeros(0), np.eye(1))
        if d > 1 and s.size == d - 1 and s[-1] < 1e-12:
            continue
        z = B @ vt[-1]
        z[list(T)] = 0.0
        best = max(best, theta(1.0, z, top_k_support(z, k)))
    return best


def circle_oracle(B, p, k, n=200_000):
    """Dense angle scan plus every null vector with a zero coordinate (where the cusps sit)."""
    phi = np.linspace(0.0, np.pi, n, endpoint=False)
    Z = np.stack([np.cos(phi), np.sin(phi)], axis=1) @ B.T
    kinks = []
    for row in B:
        if np.linalg.norm(row) > 1e-14:
            z = B @ np.array([-row[1], row[0]])
            z[np.abs(z) < 1e-12 * np.abs(z).max()] = 0.0
            kinks.append(z)
    Z = np.vstack([Z, kinks])
    a = np.abs(Z)
    P = np.where(a > 1e-9 * a.max(axis=1, keepdims=True), 1.0, 0.0) if p == 0 else a ** p
    P = -np.sort(-P, axis=1)
    return float(np.max(P[:, :k].sum(axis=1) / P[:, k:].sum(axis=1)))


# -- theta / supports -------------------------------------------------------------

@pytest.mark.parametrize("p", [0.0, 0.3, 1.0])
def test_theta_symmetric(p):
    assert theta(p, [1.0, -1.0], (0,)) == 1.0


def test_theta_examples():
    assert theta(1.0, [2.0, -1.0], (0,)) == 2.0
    assert theta(0.0, [3.0, 0.0, -1.0, 2.0], (0, 1)) == 0.5
    assert theta(0.5, [1.0, 0.0], (0,)) == math.inf
    assert theta(0.5, [0.0, 1.0], (0,)) == 0.0


def test_theta_zero_vector():
    with pytest.raises(ZeroVector):
        theta(0.5, [0.0, 0.0], (0,))


def test_top_k_support():
    assert top_k_support([3, 1, 1, 1], 1) == (0,)
    assert top_k_support([1, -2, 2], 2) == (1, 2)
    assert top_k_support([1, 1], 1) == (0,)
    with pytest.raises(ValueError):
        top_k_support([1, 2], 3)


vectors = st.lists(st.floats(-10, 10, allow_nan=False, allow_subnormal=False), min_size=2, max_size=8)


@settings(max_examples=100, deadline=None)
@given(vectors, st.floats(0.05, 1.0), st.floats(1e-3, 1e3), st.data())
def test_theta_scale_and_sign_invariant(z, p, c, data):
    z = np.array(z)
    assume(np.abs(z).max() > 1e-3)
    k = data.draw(st.integers(1, len(z) - 1))
    S = top_k_support(z, k)
    t = theta(p, z, S)
    assert theta(p, c * z, S) == pytest.approx(t, rel=1e-9)
    assert theta(p, -z, S) == t


@settings(max_examples=100, deadline=None)
@given(vectors, st.floats(0.05, 1.0), st.data())
def test_top_k_maximizes_theta_over_supports(z, p, data):
    z = np.array(z)
    assume(np.abs(z).max() > 1e-3)
    k = data.draw(st.integers(1, len(z) - 1))
    best = theta(p, z, top_k_support(z, k))
    for S in combinations(range(len(z)), k):
        assert theta(p, z, S) <= best * (1 + 1e-12) or math.isinf(best)


@settings(max_examples=100, deadline=None)
@given(vectors, st.floats(0.05, 1.0))
def test_norm_comparison(z, p):
    # ||z||_p <= N^(1/p - 1/2) ||z||_2 on R^N
    z = np.array(z)
    assume(np.abs(z).max() > 1e-3)
    N = z.size
    lhs = np.sum(np.abs(z) ** p) ** (1 / p)
    assert lhs <= N ** (1 / p - 0.5) * np.linalg.norm(z) * (1 + 1e-9)


# -- closed forms -------------------------------------------------------------------

def _spark5():
    A = gaussian(4, 8, 0).data
    return A, compute_spark(A)


def test_l0_closed_form():
    A, sp = _spark5()
    assert sp.spark == 5
    assert nsc_l0(A, sp, 2).value == pytest.approx(2 / 3, abs=0)
    assert nsc_l0(A, sp, 4).value == 4.0
    est = nsc_l0(A, sp, 5)
    assert est.status is Status.INFINITE and est.certificate is None


def test_l0_certificate_attains_value():
    A, sp = _spark5()
    for k in range(1, 5):
        est = nsc_l0(A, sp, k)
        c = est.certificate
        assert theta(0.0, c.z, c.S) == est.value
        np.testing.assert_allclose(A @ c.z, 0.0, atol=1e-10)


def test_d1_examples(row12, equal_magnitude, d1_3111):
    assert nsc_exact_d1(null_space_basis(d1_3111), 0.5, 1).value == pytest.approx(3 ** 0.5 / 3, abs=1e-15)
    for p in (0.0, 0.3, 0.9):
        assert nsc_exact_d1(null_space_basis(equal_magnitude), p, 1).value == pytest.approx(0.5, abs=1e-15)
    assert nsc_exact_d1(null_space_basis(row12), 1.0, 1).value == pytest.approx(2.0, abs=1e-15)
    with pytest.raises(WrongDimension):
        nsc_exact_d1(null_space_basis(gaussian(2, 4, 0).data), 0.5, 1)


def test_l1_enum_examples(row12, counterexample, d1_3111):
    assert nsc_exact_l1_enum(null_space_basis(row12), 1).value == pytest.approx(2.0, abs=1e-12)
    assert nsc_exact_l1_enum(null_space_basis(counterexample), 1).value == pytest.approx(1.0, abs=1e-12)
    assert nsc_exact_l1_enum(null_space_basis(d1_3111), 1).value == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("shape,seed", [((4, 6), 0), ((4, 6), 1), ((3, 6), 2), ((4, 7), 3), ((5, 8), 4)])
def test_l1_enum_matches_vertex_oracle(shape, seed):
    A = gaussian(*shape, seed).data
    B = null_space_basis(A)
    for k in range(1, shape[0] // 2 + 2):
        est = nsc_exact_l1_enum(B, k)
        assert est.value == pytest.approx(vertex_oracle_l1(A, k), rel=1e-9)
        assert est.certificate.theta_value == est.value


def test_l1_enum_limits():
    with pytest.raises(TooLarge):
        nsc_exact_l1_enum(null_space_basis(gaussian(2, 8, 0).data), 1)


@pytest.mark.parametrize("p", [0.0, 0.2, 0.5, 0.8, 1.0])
@pytest.mark.parametrize("seed", [0, 5])
def test_grid_d2_matches_dense_scan(p, seed):
    A = gaussian(4, 6, seed).data
    B = null_space_basis(A)
    for k in (1, 2):
        est = nsc_grid_d2(B, p, k)
        ref = circle_oracle(B.basis, p, k)
        assert est.value == pytest.approx(ref, rel=1e-8)
        assert est.value >= ref * (1 - 1e-12)
        assert est.status is Status.EXACT
        if p == 0.0:
            assert est.value == pytest.approx(k / (5 - k), rel=1e-12)


def test_grid_d2_matches_l1_oracle():
    A = gaussian(4, 6, 9).data
    B = null_space_basis(A)
    for k in (1, 2, 3):
        assert nsc_grid_d2(B, 1.0, k).value == pytest.approx(nsc_exact_l1_enum(B, k).value, rel=1e-10)


def test_grid_d2_wrong_dimension():
    with pytest.raises(WrongDimension):
        nsc_grid_d2(null_space_basis(gaussian(4, 7, 0).data), 0.5, 1)


# -- estimator ----------------------------------------------------------------------

def test_estimate_examples(counterexample, row12, equal_magnitude):
    est = nsc_estimate(counterexample, NscQuery(0.7, 1))
    assert est.value == pytest.approx(1.0, abs=1e-12) and est.status is Status.EXACT
    assert nsc_estimate(row12, NscQuery(0.5, 1)).value == pytest.approx(math.sqrt(2), abs=1e-12)
    assert nsc_estimate(equal_magnitude, NscQuery(0.25, 1)).value == pytest.approx(0.5, abs=1e-15)


def test_estimate_routing():
    A6 = gaussian(4, 6, 0).data
    A8 = gaussian(4, 8, 0).data
    assert nsc_estimate(A8, NscQuery(0.0, 2)).method == "l0_closed_form"
    assert nsc_estimate(A8, NscQuery(0.3, 5)).status is Status.INFINITE
    assert nsc_estimate(gaussian(3, 4, 0).data, NscQuery(0.3, 1)).method == "d1_closed_form"
    assert nsc_estimate(A8, NscQuery(1.0, 1)).method == "l1_lp_enum"
    assert nsc_estimate(A6, NscQuery(0.5, 1)).method.startswith("grid")
    est = nsc_estimate(A8, NscQuery(0.5, 1), NscConfig(restarts=8))
    assert est.method == "multistart" and est.status is Status.LOWER_BOUND
    est = nsc_estimate(np.eye(3), NscQuery(0.5, 1))
    assert est.value == 0.0 and est.status is Status.EXACT and est.certificate is None


@pytest.mark.parametrize("seed", range(3))
def test_multistart_sound_against_exact(seed):
    A = gaussian(4, 8, seed).data
    prep = Prepared.from_matrix(A)
    cfg = NscConfig(force="multistart", restarts=32)
    for k in (1, 2):
        exact = nsc_exact_l1_enum(prep.basis, k)
        est = nsc_estimate(A, NscQuery(1.0, k), cfg, prep)
        assert est.value <= exact.value * (1 + 1e-12)
        assert est.value == pytest.approx(exact.value, rel=1e-6)


@pytest.mark.parametrize("p", [0.0, 0.4, 1.0])
def test_certificate_attains_value_and_is_null(p):
    A = gaussian(4, 8, 3).data
    for k in (1, 2, 3):
        est = nsc_estimate(A, NscQuery(p, k), NscConfig(restarts=16))
        c = est.certificate
        assert c.S == top_k_support(c.z, k)
        assert theta(p, c.z, c.S) == pytest.approx(est.value, rel=1e-12)
        np.testing.assert_allclose(A @ c.z, 0.0, atol=1e-10)
        assert np.linalg.norm(c.z) == pytest.approx(1.0)


def test_exhaustive_supports_not_worse():
    A = gaussian(4, 8, 1).data
    prep = Prepared.from_matrix(A)
    plain = nsc_estimate(A, NscQuery(0.5, 2), NscConfig(restarts=8), prep)
    full = nsc_estimate(A, NscQuery(0.5, 2), NscConfig(restarts=8, exhaustive_supports=True), prep)
    assert full.value >= plain.value * (1 - 1e-9)


def test_multistart_deterministic():
    A = gaussian(4, 8, 2).data
    cfg = NscConfig(force="multistart", restarts=8, seed=3)
    a = nsc_estimate(A, NscQuery(0.5, 2), cfg)
    b = nsc_estimate(A, NscQuery(0.5, 2), cfg)
    assert a.value == b.value
    np.testing.assert_array_equal(a.certificate.z, b.certificate.z)


@pytest.mark.parametrize("kw", [dict(p=-0.1, k=1), dict(p=1.1, k=1), dict(p=0.5, k=0), dict(p=0.5, k=1.5)])
def test_query_validation(kw):
    with pytest.raises(ValueError):
        NscQuery(**kw)


def test_config_validation():
    with pytest.raises(ValueError):
        NscConfig(force="magic")
    with pytest.raises(ValueError):
        NscConfig(restarts=0)
    with pytest.raises(ValueError):
        nsc_estimate(gaussian(4, 6, 0).data, NscQuery(0.5, 1), NscConfig(force="l1enum"))


def test_trivial_basis_multistart():
    est = nsc_multistart(NullSpaceBasis((2, 2), np.zeros((2, 0)), 2), 0.5, 1)
    assert est.value == 0.0
