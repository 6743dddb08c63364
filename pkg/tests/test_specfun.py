import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from curvedlayer.specfun import (EULER_GAMMA, LN2_MINUS_GAMMA, bessel_i0, bessel_k0, bessel_k0k1_scaled,
                                 bessel_k1, interp_f, interp_g, k0_log_remainder)

mp.mp.dps = 40

POINTS = [1e-300, 1e-12, 1e-3, 0.1, 0.5, 1.0, 1.9, 2.0, 2.1, 5.0, 17.3, 100.0, 600.0]


@pytest.mark.parametrize("x", POINTS)
def test_k0_k1_against_mpmath(x):
    assert bessel_k0(x) == pytest.approx(float(mp.besselk(0, x)), rel=2e-15)
    assert bessel_k1(x) == pytest.approx(float(mp.besselk(1, x)), rel=2e-15)


@pytest.mark.parametrize("x", [1e-8, 0.3, 3.0, 29.0, 31.0, 200.0, 700.0])
def test_i0_against_mpmath(x):
    assert bessel_i0(x) == pytest.approx(float(mp.besseli(0, x)), rel=1e-14)


def test_scaled_pair_large_argument():
    k0s, k1s = bessel_k0k1_scaled(1e4)
    assert k0s == pytest.approx(float(mp.besselk(0, 1e4) * mp.e ** 10000), rel=1e-14)
    assert k1s == pytest.approx(float(mp.besselk(1, 1e4) * mp.e ** 10000), rel=1e-14)


def test_k0_underflow_is_zero():
    assert bessel_k0(800.0) == 0.0


@pytest.mark.parametrize("bad", [0.0, -1.0, np.inf, np.nan])
def test_k0_rejects_invalid(bad):
    with pytest.raises(ValueError):
        bessel_k0(bad)


def test_constants():
    assert EULER_GAMMA == float(mp.euler)
    assert LN2_MINUS_GAMMA == pytest.approx(float(mp.log(2) - mp.euler), abs=1e-16)


@pytest.mark.parametrize("z", [1e-9, 1e-4, 0.05, 1.0, 1.99, 2.01, 8.0])
def test_log_remainder_against_mpmath(z):
    exact = mp.besselk(0, z) + mp.log(mp.mpf(z) / 2) + mp.euler
    assert k0_log_remainder(z) == pytest.approx(float(exact), rel=1e-13, abs=1e-300)


def test_log_remainder_zero_at_origin():
    assert k0_log_remainder(0.0) == 0.0


@pytest.mark.parametrize("u", [1e-3, 0.2, 1.0, 4.0, 12.0])
def test_interpolants_against_mpmath(u):
    e = mp.exp(-mp.mpf(u) ** 2)
    f = -e * mp.besseli(0, u) - (1 - e) * mp.besselk(0, u)
    g = e * mp.besseli(0, u) * mp.log(u) + (1 + (1 - e) * mp.log(u)) * mp.besselk(0, u)
    assert interp_f(u) == pytest.approx(float(f), rel=1e-13, abs=1e-300)
    assert interp_g(u) == pytest.approx(float(g), rel=1e-12, abs=1e-300)


@given(st.floats(min_value=1e-3, max_value=30.0))
def test_decomposition_property(u):
    k0 = bessel_k0(u)
    assert interp_f(u) * math.log(u) + interp_g(u) == pytest.approx(k0, rel=1e-12)


@given(st.floats(min_value=1e-6, max_value=600.0), st.floats(min_value=1e-6, max_value=1.0))
def test_k0_positive_and_decreasing(x, dx):
    a, b = bessel_k0(x), bessel_k0(x + dx)
    assert a > 0 and b <= a


@given(st.floats(min_value=1e-3, max_value=300.0))
def test_wronskian(x):
    # I0 K1 + I1 K0 = 1/x with I1 = I0' estimated from K-side identity K0' = -K1
    k0s, k1s = bessel_k0k1_scaled(x)
    i1 = float(mp.besseli(1, x) * mp.e ** (-x))
    i0 = float(mp.besseli(0, x) * mp.e ** (-x))
    assert i0 * k1s + i1 * k0s == pytest.approx(1.0 / x, rel=1e-13)
