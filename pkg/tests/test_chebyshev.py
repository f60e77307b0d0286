import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import chebyshev as npcheb

from mmx import chebyshev as C


@pytest.mark.parametrize("n", [0, 1, 2, 5, 17, 40])
def test_cheb_eval_matches_numpy_and_cosine_form(n):
    x = np.linspace(-1, 1, 101)
    coef = np.zeros(n + 1)
    coef[n] = 1.0
    assert np.allclose(C.cheb_eval(n, x), npcheb.chebval(x, coef), atol=1e-10)
    assert np.allclose(C.cheb_eval(n, x), np.cos(n * np.arccos(x)), atol=1e-10)


def test_roots_are_zeros_of_shifted_polynomial():
    r = C.cheb_roots_shifted(7, 1.0, 300.0)
    assert np.all(np.diff(r) < 0)
    assert np.allclose(C.cheb_eval_shifted(7, r, 1.0, 300.0), 0.0, atol=1e-12)


def test_t2_roots_example():
    r = C.bilinear_roots(2, 1.0, 300.0)
    c = math.cos(math.pi / 4)
    assert np.allclose(r, [150.5 + 149.5 * c, 150.5 - 149.5 * c])


def test_quadratic_roots_are_nonzero_roots_of_odd_polynomial():
    rho = C.quadratic_roots(3, 2.0)
    assert rho.size == 6 and np.all(rho != 0)
    assert np.allclose(C.cheb_eval(7, rho / 2.0), 0.0, atol=1e-12)
    assert np.allclose(C.quadratic_roots(1, 1.0), [math.sqrt(3) / 2, -math.sqrt(3) / 2])


def _mp_rate(T, m, M):
    mpmath.mp.dps = 60
    x = mpmath.mpf(M + m) / (M - m)
    return float(1 / mpmath.cosh(T * mpmath.acosh(x)))


@pytest.mark.parametrize("kappa", [2.0, 10.0, 300.0])
def test_extremal_rate_forms_agree(kappa):
    for T in range(1, 65):
        direct = 1.0 / abs(C.cheb_eval(T, C.to_unit_interval(0.0, 1.0, kappa)))
        rate = C.extremal_rate_bilinear(T, 1.0, kappa)
        assert abs(rate - direct) <= 1e-12 * rate
        assert rate == pytest.approx(_mp_rate(T, 1.0, kappa), rel=1e-12)


def test_extremal_rate_large_T_does_not_overflow():
    r = C.extremal_rate_bilinear(5000, 1.0, 300.0, check=False)
    assert 0.0 <= r < 1e-100
    assert C.extremal_rate_bilinear(1, 1.0, 4.0) == pytest.approx(0.6)
    assert C.extremal_rate_bilinear(3, 2.0, 2.0) == 0.0


def test_extremal_rate_quadratic():
    assert C.extremal_rate_quadratic(4, 3.0) == pytest.approx(3.0 / 9.0)
    with pytest.raises(ValueError):
        C.extremal_rate_quadratic(0, 1.0)


@pytest.mark.parametrize("T,kappa", [(1, 4.0), (3, 10.0), (8, 100.0)])
def test_induced_polynomial_max_equals_rate(T, kappa):
    p = C.InducedPolynomial(C.bilinear_roots(T, 1.0, kappa))
    assert p(0.0) == 1.0
    _, val = C.induced_polynomial_max(p, 1.0, kappa)
    assert val == pytest.approx(C.extremal_rate_bilinear(T, 1.0, kappa), rel=1e-9)


@pytest.mark.parametrize("T", [1, 2, 5, 10])
def test_quadratic_weighted_max_is_l_over_2t_plus_1(T):
    L = 1.5
    p = C.InducedPolynomial(C.quadratic_roots(T, L))
    _, val = C.weighted_polynomial_max(p, -L, L)
    assert val == pytest.approx(L / (2 * T + 1), rel=1e-9)


def test_log_max_matches_direct_max():
    p = C.InducedPolynomial(C.bilinear_roots(6, 1.0, 50.0))
    _, v = C.induced_polynomial_max(p, 1.0, 50.0)
    _, lv = C.induced_polynomial_logmax(p, 1.0, 50.0)
    assert math.exp(lv) == pytest.approx(v, rel=1e-9)


def _lebedev_brute(T):
    # independent recursion written on index pairs
    if T == 1:
        return [0]
    prev = _lebedev_brute(T // 2)
    out = []
    for a in prev:
        out += [a, T - 1 - a]
    return out


def test_lebedev_small_cases():
    assert C.lebedev_order(1) == [0]
    assert C.lebedev_order(2) == [0, 1]
    assert C.lebedev_order(4) == [0, 3, 1, 2]
    assert C.lebedev_order(8) == [0, 7, 3, 4, 1, 6, 2, 5]
    with pytest.raises(ValueError):
        C.lebedev_order(6)


@pytest.mark.parametrize("k", range(1, 10))
def test_lebedev_is_permutation_with_recursive_structure(k):
    T = 2**k
    s = C.lebedev_order(T)
    assert sorted(s) == list(range(T))
    assert s == _lebedev_brute(T)
    # consecutive entries pair up to T - 1
    assert all(s[2 * i] + s[2 * i + 1] == T - 1 for i in range(T // 2))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 30), st.floats(1.0, 1e4))
def test_rate_in_unit_interval_and_decreasing(T, kappa):
    r1 = C.extremal_rate_bilinear(T, 1.0, 1.0 + kappa, check=False)
    r2 = C.extremal_rate_bilinear(T + 1, 1.0, 1.0 + kappa, check=False)
    assert 0.0 < r2 <= r1 < 1.0
