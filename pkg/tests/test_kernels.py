import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from curvedlayer.grid import Grid2D
from curvedlayer.kernels import (LATTICE_LOG_CONSTANT, Convolver, dense_matrix, k0_diagonal, k0_table,
                                 log_diagonal, log_table, regular_k0_diagonal, regular_k0_table)
from curvedlayer.specfun import bessel_k0


def _brute_lattice_k0_sum(kappa, radius):
    n = np.arange(-radius, radius + 1)
    r = np.hypot(*np.meshgrid(n, n, indexing="ij"))
    r[radius, radius] = np.inf
    return float(np.sum(bessel_k0(kappa * np.where(np.isinf(r), 1.0, r)) * np.isfinite(r)))


def test_lattice_constant_closed_form():
    c = 2 * mp.log(mp.gamma(0.25)) - mp.log(4 * mp.pi) / 2
    assert LATTICE_LOG_CONSTANT == pytest.approx(float(c), abs=1e-15)


@pytest.mark.parametrize("kappa", [0.1, 0.3, 1.0, 2.4, 2.6, 4.0])
def test_k0_diagonal_moment_matching(kappa):
    # the corrected lattice sum must reproduce int K0 = 2 pi / kappa^2 (unit spacing)
    radius = int(45 / kappa) + 3
    total = k0_diagonal(kappa) + _brute_lattice_k0_sum(kappa, radius)
    assert total == pytest.approx(2 * math.pi / kappa ** 2, rel=1e-12)


def test_k0_diagonal_rejects_nonpositive():
    with pytest.raises(ValueError):
        k0_diagonal(0.0)


def test_series_branch_continuity():
    a, b = k0_diagonal(2.5 - 1e-9), k0_diagonal(2.5 + 1e-9)
    assert a == pytest.approx(b, abs=1e-9)


def test_regular_diagonal_consistent():
    k, h = 0.7, 0.1
    assert regular_k0_diagonal(k, h) == pytest.approx(k0_diagonal(k * h) + math.log(k), abs=1e-13)
    assert regular_k0_diagonal(1e-12, h) == pytest.approx(log_diagonal(h), abs=1e-12)


def _gauss_form_exact(k):
    # iint exp(-|x|^2/2) K0(k|x - x'|) exp(-|x'|^2/2) = 2 pi^2 e^{k^2} E1(k^2)
    return float(2 * mp.pi ** 2 * mp.e ** (k * k) * mp.e1(k * k))


def test_k0_form_fourth_order():
    k = 1.0
    errs = []
    for h in (0.2, 0.1, 0.05):
        g = Grid2D.square(7.0, h)
        X, Y = g.mesh()
        phi = np.exp(-(X * X + Y * Y) / 2)
        val = Convolver(k0_table(k, h, g.shape), g.shape, h).quadratic_form(phi)
        errs.append(abs(val - _gauss_form_exact(k)))
    rates = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert errs[-1] < 1e-6
    assert min(rates) > 3.7


def test_log_form_matches_regular_limit():
    # iint phi (-ln(r/2) - gamma) phi for a Gaussian: exact via small-k limit of the K0 form
    h = 0.1
    g = Grid2D.square(7.0, h)
    X, Y = g.mesh()
    phi = np.exp(-(X * X + Y * Y) / 2)
    val = Convolver(log_table(h, g.shape), g.shape, h).quadratic_form(phi)
    k = 1e-4
    mass = 2 * math.pi
    exact = _gauss_form_exact(k) + math.log(k) * mass ** 2
    assert val == pytest.approx(exact, rel=1e-6)


def test_regular_table_limits():
    h = 0.2
    shape = (9, 9)
    reg = regular_k0_table(1e-9, h, shape)
    assert np.allclose(reg, log_table(h, shape), atol=1e-12)


def test_convolver_matches_dense():
    rng = np.random.default_rng(0)
    shape, h = (7, 9), 0.3
    phi = rng.standard_normal(shape)
    psi = rng.standard_normal(shape)
    table = k0_table(0.8, h, shape)
    A = dense_matrix(table, shape, h)
    conv = Convolver(table, shape, h)
    assert np.allclose(conv.apply(psi).ravel(), A @ psi.ravel(), atol=1e-13)
    assert conv.quadratic_form(phi, psi) == pytest.approx(h * h * phi.ravel() @ A @ psi.ravel(), rel=1e-12)


@given(st.floats(min_value=0.05, max_value=3.0), st.floats(min_value=0.05, max_value=0.5))
def test_k0_table_symmetric_and_positive(k, h):
    t = k0_table(k, h, (12, 12))
    assert np.array_equal(t, t[::-1, ::-1])
    assert np.array_equal(t, t.T)
    assert np.all(t > 0)


@given(st.integers(min_value=3, max_value=10), st.integers(min_value=3, max_value=10))
def test_convolver_operator_symmetric(nx, ny):
    rng = np.random.default_rng(nx * 31 + ny)
    table = log_table(0.4, (nx, ny))
    conv = Convolver(table, (nx, ny), 0.4)
    a, b = rng.standard_normal((2, nx, ny))
    assert conv.quadratic_form(a, b) == pytest.approx(conv.quadratic_form(b, a), rel=1e-10, abs=1e-12)
