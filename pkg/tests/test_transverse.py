import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from curvedlayer.transverse import build_basis, overlap_sums


@pytest.mark.parametrize("j", [1, 2, 3, 4, 6])
def test_overlap_closed_form_sympy(j):
    # substitute t = pi (u + a) / (2a) so the integrand is polynomial times trig on (0, pi)
    t = sp.symbols("t")
    a = sp.Rational(13, 10)
    u = 2 * a * t / sp.pi - a
    integrand = sp.sin(t) * u * sp.sin(j * t) / a * (2 * a / sp.pi)
    exact = sp.integrate(sp.expand(sp.expand_trig(integrand)), (t, 0, sp.pi))
    basis = build_basis(1.3, 8)
    assert basis.T[j - 1] == pytest.approx(float(exact), abs=1e-14)


def test_u_moment_sympy():
    u = sp.symbols("u")
    a = sp.Rational(7, 10)
    chi1 = sp.sin(sp.pi * (u + a) / (2 * a)) / sp.sqrt(a)
    exact = float(sp.integrate(u ** 2 * chi1 ** 2, (u, -a, a)))
    assert build_basis(0.7, 4).u_moment == pytest.approx(exact, rel=1e-14)


def test_kappa_and_orthonormality():
    b = build_basis(0.9, 12)
    assert b.kappa[2] == pytest.approx(3 * math.pi / 1.8)
    u, w = b.gauss_nodes(60)
    C = b.chi_matrix(u)
    assert np.allclose((C * w) @ C.T, np.eye(12), atol=1e-13)


def test_value_for_unit_half_width():
    assert build_basis(1.0, 4).T[1] == pytest.approx(-32 / (9 * math.pi ** 2), rel=1e-15)


@pytest.mark.parametrize("a,N", [(0.0, 8), (-1.0, 8), (1.0, 1)])
def test_invalid_basis(a, N):
    with pytest.raises(ValueError):
        build_basis(a, N)


@given(st.floats(min_value=0.05, max_value=20.0))
def test_overlap_sums_converge(a):
    s = overlap_sums(build_basis(a, 256))
    # sum T^2 completes ||u chi1||^2 (T1 = 0) and sum T^2 k^2 -> 1
    assert s.S0 == pytest.approx(s.S0_target, rel=1e-9)
    assert 0 < s.S2_deficit < 1e-5
    assert s.S0_deficit >= -1e-15


@given(st.floats(min_value=0.1, max_value=5.0), st.integers(min_value=2, max_value=40))
def test_odd_overlaps_vanish(a, N):
    T = build_basis(a, N).T
    assert np.all(T[0::2] == 0.0)
    assert np.all(T[1::2] < 0.0)
