import math
import warnings

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from curvedlayer.geometry import (build_surface_jet, central_weights, curvature_derivatives,
                                  curvatures, effective_potentials, inverse_metric, layer_constants,
                                  mean_curvature_fields, metric, total_gauss_curvature)
from curvedlayer.grid import Grid2D
from curvedlayer.surfaces import gaussian_bump, make_surface, parabolic_cylinder, plane, ripple

X_, Y_ = sp.symbols("x y")
EPS = 0.7


def _sym_surface():
    return sp.exp(-X_ ** 2 / 2 - Y_ ** 2 / (2 * sp.Rational(9, 4)))


def _fundamental_forms(f, eps):
    r = sp.Matrix([X_, Y_, eps * f])
    rx, ry = r.diff(X_), r.diff(Y_)
    E, F, G = rx.dot(rx), rx.dot(ry), ry.dot(ry)
    n = rx.cross(ry)
    n = n / sp.sqrt(n.dot(n))
    L, M, N = r.diff(X_, 2).dot(n), r.diff(X_, Y_).dot(n), r.diff(Y_, 2).dot(n)
    det = E * G - F * F
    return (L * N - M * M) / det, (E * N - 2 * F * M + G * L) / (2 * det), sp.Matrix([[E, F], [F, G]])


@pytest.fixture(scope="module")
def anisotropic():
    grid = Grid2D.square(2.0, 0.2)
    jet = build_surface_jet(gaussian_bump(1.0, 1.0, 1.5), grid)
    i, j = 13, 8  # node (0.6, -0.4)
    return grid, jet, (i, j), {X_: grid.x[i], Y_: grid.y[j]}


def test_curvatures_against_fundamental_forms(anisotropic):
    grid, jet, (i, j), at = anisotropic
    K, H, _ = _fundamental_forms(_sym_surface(), EPS)
    b = curvatures(jet, EPS)
    assert b.K[i, j] == pytest.approx(float(K.subs(at)), rel=1e-13)
    assert b.M[i, j] == pytest.approx(float(H.subs(at)), rel=1e-13)
    k1, k2 = b.kappa_principal
    assert k1[i, j] + k2[i, j] == pytest.approx(2 * b.M[i, j], rel=1e-13)
    assert k1[i, j] * k2[i, j] == pytest.approx(b.K[i, j], rel=1e-12)


def test_metric_inverse(anisotropic):
    grid, jet, (i, j), at = anisotropic
    _, _, gmat = _fundamental_forms(_sym_surface(), EPS)
    g = metric(jet, EPS)[:, :, i, j]
    assert np.allclose(g, np.array(gmat.subs(at), dtype=float), rtol=1e-14)
    assert np.allclose(inverse_metric(jet, EPS)[:, :, i, j] @ g, np.eye(2), atol=1e-14)


def test_effective_potentials_against_sympy(anisotropic):
    grid, jet, (i, j), at = anisotropic
    f = _sym_surface()
    K, H, gmat = _fundamental_forms(f, EPS)
    u = sp.Rational(3, 10)
    Fsym = u ** 2 * K - 2 * u * H
    ginv = gmat.inv()
    sqrtg = sp.sqrt(gmat.det())
    xs = (X_, Y_)
    grad = [Fsym.diff(v) for v in xs]
    norm_sq = sum(ginv[a, c] * grad[a] * grad[c] for a in range(2) for c in range(2))
    lap = sum((sqrtg * ginv[a, c] * grad[c]).diff(xs[a]) for a in range(2) for c in range(2)) / sqrtg
    den = 1 - 2 * H * u + K * u ** 2
    v1 = -norm_sq / (4 * den ** 2) + lap / (2 * den)
    V2 = (K - H ** 2) / den ** 2
    v1_val = float(v1.subs(at).evalf(30))
    V2_val = float(V2.subs(at).evalf(30))
    b = curvatures(jet, EPS)
    fields = effective_potentials(jet, b, 0.5, EPS, np.array([0.3]))
    assert fields.v1[i, j, 0] == pytest.approx(v1_val, rel=1e-11)
    assert fields.V2[i, j, 0] == pytest.approx(V2_val, rel=1e-12)


def test_central_weights_exact_on_polynomials():
    for order in range(1, 5):
        w = central_weights(order)
        k = np.arange(-4, 5)
        for p in range(0, 8):
            exact = math.factorial(p) if p == order else 0.0
            assert float(np.dot(w, k.astype(float) ** p)) == pytest.approx(exact, abs=1e-9)


def test_sampled_jet_matches_analytic():
    grid = Grid2D.square(8.0, 0.05)
    s = gaussian_bump()
    exact = build_surface_jet(s, grid)
    sampled = build_surface_jet(s(grid.x, grid.y), grid)
    inner = (slice(8, -8), slice(8, -8))
    assert np.max(np.abs(sampled.d(1, 1) - exact.d(1, 1))[inner]) < 1e-6
    assert np.max(np.abs(sampled.d(1, 1, 2, 2) - exact.d(1, 1, 2, 2))[inner]) < 1e-4
    assert sampled.mode == "sampled" and exact.mode == "analytic"


def test_flat_layer_constants():
    grid = Grid2D.square(2.0, 0.25)
    c = layer_constants(curvatures(build_surface_jet(plane(), grid), 0.3), 1.0)
    assert (c.c_minus, c.c_plus, c.C_minus, c.C_plus, c.sigma_minus, c.sigma_plus) == (1, 1, 1, 1, 1, 1)


def test_diffeomorphism_violation():
    grid = Grid2D.square(2.0, 0.25)
    with pytest.raises(ValueError, match="diffeomorphism"):
        layer_constants(curvatures(build_surface_jet(parabolic_cylinder(2.0), grid), 1.0), 0.6)


@given(st.floats(0.01, 0.5), st.floats(0.05, 0.4))
def test_layer_constant_ordering(eps, a):
    grid = Grid2D.square(5.0, 0.25)
    b = curvatures(build_surface_jet(gaussian_bump(), grid), eps)
    c = layer_constants(b, a)
    assert c.c_minus <= 1 <= c.c_plus and 0 < c.C_minus <= 1 <= c.C_plus
    assert c.sigma_minus >= 1 >= c.sigma_plus > 0
    assert c.sigma_plus ** 2 == pytest.approx(c.c_minus ** 3 * c.C_minus ** 2 / (c.c_plus ** 2 * c.C_plus))


@given(st.floats(0.01, 1.5), st.floats(0.6, 2.0), st.floats(0.6, 2.0))
def test_gauss_curvature_integrals_vanish(eps, w1, w2):
    # int k0 = 0, and the total curvature of a decaying graph is zero
    grid = Grid2D.square(10.0 * max(w1, w2), 0.1 * min(w1, w2))
    jet = build_surface_jet(gaussian_bump(1.0, w1, w2), grid)
    b = curvatures(jet, eps)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tc = total_gauss_curvature(b, jet)
    scale = float(grid.integrate(np.abs(b.K)))
    assert abs(tc.total) <= 1e-9 * scale
    assert abs(tc.integral_k0) <= 1e-9 * float(grid.integrate(np.abs(b.k0)))


def test_untrusted_boundary_warns():
    grid = Grid2D.square(2.0, 0.1)
    jet = build_surface_jet(gaussian_bump(), grid)
    with pytest.warns(RuntimeWarning):
        assert not total_gauss_curvature(curvatures(jet, 0.1), jet).trusted


@given(st.floats(0.0, 0.6), st.floats(-0.2, 0.2))
def test_V2_nonpositive(eps, u):
    grid = Grid2D.square(3.0, 0.25)
    jet = build_surface_jet(ripple(0.7, 1.3, 1.0), grid)
    b = curvatures(jet, eps)
    f = effective_potentials(jet, b, 0.25, eps, np.array([u]))
    assert np.all(f.V2 <= 1e-15)


def test_bracket_potentials_zero_at_eps_zero():
    grid = Grid2D.square(3.0, 0.25)
    jet = build_surface_jet(gaussian_bump(), grid)
    f = effective_potentials(jet, curvatures(jet, 0.0), 0.5, 0.0, np.array([0.1]))
    assert not f.V_plus.any() and not f.V_minus.any()


def test_bracket_potential_ordering():
    # the v1 prefactor of V+ dominates that of V-
    grid = Grid2D.square(6.0, 0.1)
    jet = build_surface_jet(gaussian_bump(), grid)
    c = layer_constants(curvatures(jet, 0.2), 0.5)
    assert c.C_plus / c.C_minus ** 2 >= c.C_minus / c.C_plus ** 2


def test_mean_curvature_fields_gaussian():
    grid = Grid2D.square(10.0, 0.1)
    mf = mean_curvature_fields(build_surface_jet(gaussian_bump(), grid))
    # m0 = (r^2/2 - 1) e^{-r^2/2}, ||m0||^2 = pi/2
    assert grid.integrate(mf.m0 ** 2) == pytest.approx(math.pi / 2, rel=1e-12)


def test_curvature_derivative_convergence():
    errs = []
    for h in (0.1, 0.05):
        grid = Grid2D.square(5.0, h)
        jet = build_surface_jet(gaussian_bump(1.0, 1.0, 1.3), grid)
        cd = curvature_derivatives(jet, 0.4)
        gx, _ = grid.gradient(cd.K)
        errs.append(np.max(np.abs(gx - cd.grad_K[0])[3:-3, 3:-3]))
    assert errs[1] < errs[0] / 10


def test_surface_registry():
    assert make_surface("gaussian_bump", width=2.0).params["width"] == 2.0
    with pytest.raises(ValueError):
        make_surface("nope")
