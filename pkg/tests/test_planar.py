import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import exp1

from curvedlayer.grid import Grid2D
from curvedlayer.kernels import k0_table
from curvedlayer.planar import double_integral, expansion_w, fourier_mode_term, k0_form, log_form
from curvedlayer.potentials import (compact_bump, dipole_uv, gaussian_well, make_potential,
                                    project_potential)
from curvedlayer.specfun import EULER_GAMMA
from curvedlayer.transverse import build_basis

A = math.pi / 2


def _well_exact_w(lam, tilt, basis, N):
    """Closed form for V = -exp(-r^2/2)(1 + tilt u/a).

    V11 = -exp(-r^2/2), V1j = -tilt T_j / a exp(-r^2/2), and
    iint e^{-r^2/2} K0(k|x-x'|) e^{-r'^2/2} = 2 pi^2 e^{k^2} E1(k^2).
    """
    first = -lam
    log_term = 2 * math.pi ** 2 * EULER_GAMMA
    modes = 0.0
    for j in range(2, N + 1):
        c = basis.kappa[j - 1] ** 2 - basis.kappa1 ** 2
        modes += (tilt * basis.T[j - 1] / basis.a) ** 2 * 2 * math.pi ** 2 * math.exp(c) * exp1(c)
    return first + (lam / (2 * math.pi)) ** 2 * (log_term - modes)


@pytest.fixture(scope="module")
def well():
    basis = build_basis(A, 8)
    grid = Grid2D.square(7.0, 0.1)
    return basis, grid, project_potential(gaussian_well(A, tilt=0.5), basis, grid)


def test_expansion_closed_form(well):
    basis, grid, proj = well
    r = expansion_w(0.3, proj, N=8)
    assert r.first == pytest.approx(-0.3, rel=1e-10)
    assert r.log_term == pytest.approx(2 * math.pi ** 2 * EULER_GAMMA, rel=1e-5)
    assert r.w == pytest.approx(_well_exact_w(0.3, 0.5, basis, 8), rel=1e-7)
    assert r.bound_state and r.verdict == "bound state"


def test_fourier_mode_term_matches_real_space(well):
    basis, grid, proj = well
    v = proj.V[0, 1]
    k = float(basis.k_higher[1])
    # real-space quadrature is O(h^4), the Fourier route is spectral
    assert fourier_mode_term(grid, v, k) == pytest.approx(k0_form(grid, v, k), rel=5e-6)


def test_direct_and_fft_double_sums_agree():
    grid = Grid2D.square(2.0, 0.25)
    rng = np.random.default_rng(3)
    phi, psi = rng.standard_normal((2,) + grid.shape)
    t = k0_table(1.3, 0.25, grid.shape)
    assert double_integral(grid, t, phi, psi, "direct") == pytest.approx(
        double_integral(grid, t, phi, psi, "fft"), rel=1e-12)
    with pytest.raises(ValueError):
        double_integral(grid, t, phi, psi, "magic")


def test_log_form_is_limit_of_k0_form():
    # for zero-mean v the constant part of -ln k drops out
    grid = Grid2D.square(6.0, 0.1)
    X, Y = grid.mesh()
    v = (X * X + Y * Y - 2.0) * np.exp(-(X * X + Y * Y) / 2)
    assert log_form(grid, v) == pytest.approx(k0_form(grid, v, 1e-3), rel=1e-5)


def test_repulsive_verdict():
    basis = build_basis(A, 4)
    proj = project_potential(compact_bump(A), basis, Grid2D.square(3.0, 0.1))
    r = expansion_w(0.1, proj)
    assert r.mean > 0 and not r.bound_state and "repulsive" in r.verdict


def test_zero_mean_branch():
    basis = build_basis(A, 8)
    proj = project_potential(dipole_uv(A), basis, Grid2D.square(6.0, 0.1))
    r = expansion_w(0.2, proj)
    assert abs(r.first) < 1e-15 and r.second < 0 and r.bound_state


def test_vanishing_potential():
    basis = build_basis(A, 4)
    proj = project_potential(gaussian_well(A, depth=0.0), basis, Grid2D.square(2.0, 0.25))
    r = expansion_w(0.1, proj)
    assert not r.bound_state and "vanishes" in r.verdict


def test_stop_rule_uses_available_modes(well):
    r = expansion_w(0.1, well[2])
    assert r.modes_used <= 8


def test_projection_checks():
    basis = build_basis(A, 6)
    grid = Grid2D.square(2.0, 0.25)
    with pytest.raises(ValueError):
        project_potential(gaussian_well(A), basis, grid, nu=5)
    proj = project_potential(gaussian_well(A, tilt=0.3), basis, grid)
    assert proj.is_symmetric
    assert proj.truncate(3).N == 3
    assert np.allclose(proj.scaled(2.0).V, 2 * proj.V)
    s = proj.sample(np.array([0.0, 10.0]), np.array([0.0]))
    assert s[0, 0, 0, 0] == pytest.approx(proj.V11[8, 8]) and s[0, 0, 1, 0] == 0.0
    with pytest.raises(ValueError):
        make_potential("nope", A)


@settings(max_examples=15)
@given(st.floats(0.01, 1.0), st.floats(-0.9, 0.9))
def test_first_order_linear_in_lambda(lam, tilt):
    basis = build_basis(A, 4)
    proj = project_potential(gaussian_well(A, tilt=tilt), basis, Grid2D.square(8.0, 0.25))
    r = expansion_w(lam, proj, N=4, method="fft")
    assert r.first == pytest.approx(-lam, rel=1e-9)
    # second-order part is quadratic in lambda
    r2 = expansion_w(2 * lam, proj, N=4, method="fft")
    assert r2.second == pytest.approx(4 * r.second, rel=1e-12)
