import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from scipy.sparse.linalg import eigsh

from curvedlayer.direct import (Mesh1D, ResourceError, _Preconditioner, assemble, bracket_layer_energy,
                                implied_w, lowest_eigenvalue, refinement_ladder)
from curvedlayer.geometry import build_surface_jet
from curvedlayer.grid import Grid2D
from curvedlayer.potentials import gaussian_well, project_potential
from curvedlayer.surfaces import gaussian_bump, plane
from curvedlayer.transverse import build_basis

A = math.pi / 2


def _box_ground(L, h):
    n1 = 2 * L / h  # interior nodes + 1
    return 2 * (4 / h ** 2) * math.sin(math.pi / (2 * n1)) ** 2


@pytest.mark.parametrize("method", ["shift-invert", "lobpcg"])
def test_free_operator_box_spectrum(method):
    basis = build_basis(A, 2)
    m = Mesh1D.uniform_mesh(4.0, 0.25)
    op = assemble(gaussian_well(A), 0.0, m, m, basis)
    r = lowest_eigenvalue(op, tol=1e-11, method=method)
    assert r.value == pytest.approx(1.0 + _box_ground(4.0, 0.25), rel=1e-10)
    assert not r.below_threshold


def test_single_mode_reduces_to_2d_schroedinger():
    basis = build_basis(A, 4)
    m = Mesh1D.uniform_mesh(5.0, 0.25)
    spec = gaussian_well(A, tilt=0.5)
    op = assemble(spec, 2.0, m, m, basis, N=1)
    n = m.n
    D = sp.diags([-1, 2, -1], [-1, 0, 1], shape=(n, n)) / 0.25 ** 2
    lap = sp.kron(D, sp.identity(n)) + sp.kron(sp.identity(n), D)
    X, Y = np.meshgrid(m.nodes, m.nodes, indexing="ij")
    V11 = -np.exp(-(X * X + Y * Y) / 2)
    H = lap + sp.identity(n * n) + 2.0 * sp.diags(V11.ravel())
    ref = eigsh(H.tocsc(), k=1, sigma=0.0, which="LM")[0][0]
    assert lowest_eigenvalue(op, tol=1e-11).value == pytest.approx(ref, rel=1e-10)


def test_operator_symmetric():
    basis = build_basis(A, 3)
    m = Mesh1D.uniform_mesh(2.0, 0.25)
    op = assemble(gaussian_well(A, tilt=0.7), 1.0, m, m, basis)
    S = op.sparse()
    assert abs(S - S.T).max() == 0.0
    assert op.is_symmetric()
    x = np.random.default_rng(0).standard_normal(op.size)
    assert np.allclose(S @ x, op.matvec(x), atol=1e-12)


def test_solvers_agree_and_projected_source():
    basis = build_basis(A, 3)
    m = Mesh1D.uniform_mesh(6.0, 0.2)
    spec = gaussian_well(A, tilt=0.5)
    op = assemble(spec, 1.5, m, m, basis, support=5.0)
    a = lowest_eigenvalue(op, tol=1e-11, method="shift-invert")
    b = lowest_eigenvalue(op, tol=1e-11, method="lobpcg")
    assert a.value == pytest.approx(b.value, abs=1e-9)
    assert a.below_threshold and a.gap > 0
    # a projected potential on the same nodes reproduces the exact projection
    proj = project_potential(spec, basis, Grid2D.square(5.8, 0.2))
    c = lowest_eigenvalue(assemble(proj, 1.5, m, m, basis), tol=1e-11)
    assert c.value == pytest.approx(a.value, abs=1e-8)


def test_preconditioner_inverts_free_operator():
    basis = build_basis(A, 2)
    for m in (Mesh1D.uniform_mesh(2.0, 0.25), Mesh1D.stretched_mesh(1.0, 0.25, 4.0, 1.2)):
        op = assemble(gaussian_well(A), 0.0, m, m, basis)
        pre = _Preconditioner(op, 0.5)
        x = np.random.default_rng(2).standard_normal(op.size)
        assert np.allclose(pre(op.matvec(x) - 0.5 * x), x, atol=1e-10)


def test_stretched_mesh_properties():
    m = Mesh1D.stretched_mesh(3.0, 0.1, 50.0, 1.1)
    assert m.nodes[0] == pytest.approx(-m.nodes[-1])
    assert np.all(np.diff(m.nodes) > 0)
    assert np.allclose(np.diff(m.nodes)[m.n // 2 - 20: m.n // 2 + 20], 0.1)
    assert m.nodes[-1] < 50.0
    uni = Mesh1D.stretched_mesh(2.0, 0.25, 4.0, 1.0)
    assert np.allclose(uni.nodes, Mesh1D.uniform_mesh(4.0, 0.25).nodes)
    with pytest.raises(ValueError):
        Mesh1D.uniform_mesh(1.0, 0.3)


def test_stretched_mesh_converges_to_uniform():
    basis = build_basis(A, 1 + 1)
    spec = gaussian_well(A)
    uni = Mesh1D.uniform_mesh(12.0, 0.2)
    st_ = Mesh1D.stretched_mesh(5.0, 0.2, 12.0, 1.05)
    Eu = lowest_eigenvalue(assemble(spec, 2.0, uni, uni, basis, N=1)).value
    Es = lowest_eigenvalue(assemble(spec, 2.0, st_, st_, basis, N=1)).value
    assert Es == pytest.approx(Eu, abs=2e-4)


def test_second_order_in_h():
    basis = build_basis(A, 2)
    spec = gaussian_well(A)
    E = []
    for h in (0.2, 0.1, 0.05):
        m = Mesh1D.uniform_mesh(8.0, h)
        E.append(lowest_eigenvalue(assemble(spec, 3.0, m, m, basis, N=1), tol=1e-12).value)
    slope = math.log2((E[0] - E[1]) / (E[1] - E[2]))
    assert abs(slope - 2) <= 0.3


def test_monotone_in_box_and_modes():
    basis = build_basis(A, 4)
    spec = gaussian_well(A, tilt=0.8)
    rows, extrap = refinement_ladder(spec, 1.0, basis, [4.0, 6.0, 8.0], [0.25], [1, 2, 4],
                                     support=5.0)
    E = {(r.L, r.N): r.E for r in rows}
    for N in (1, 2, 4):
        assert E[(4.0, N)] >= E[(6.0, N)] >= E[(8.0, N)]
    for L in (4.0, 6.0, 8.0):
        assert E[(L, 1)] >= E[(L, 2)] >= E[(L, 4)]
    assert extrap is None


def test_ladder_richardson():
    basis = build_basis(A, 2)
    rows, extrap = refinement_ladder(gaussian_well(A), 3.0, basis, [8.0], [0.2, 0.1], [1])
    assert extrap == pytest.approx((4 * rows[1].E - rows[0].E) / 3)


@settings(max_examples=6)
@given(st.floats(0.1, 6.0))
def test_eigenvalue_between_form_bounds(lam):
    # kappa_1^2 + lambda min eig V(x) <= E <= kappa_1^2 + free box ground energy
    basis = build_basis(A, 2)
    m = Mesh1D.uniform_mesh(8.0, 0.25)
    op = assemble(gaussian_well(A, tilt=0.5), lam, m, m, basis)
    r = lowest_eigenvalue(op, tol=1e-10)
    assert op.lower_bound() <= r.value <= 1.0 + _box_ground(8.0, 0.25)
    assert op.lower_bound() >= 1.0 - 1.5 * lam


def test_deep_well_finds_ground_state():
    # a well deep enough to hold excited states: shift-invert must not land on one
    basis = build_basis(A, 2)
    m = Mesh1D.uniform_mesh(5.0, 0.25)
    op = assemble(gaussian_well(A), 20.0, m, m, basis)
    a = lowest_eigenvalue(op, tol=1e-11, method="shift-invert").value
    full = np.linalg.eigvalsh(op.sparse().toarray())[0]
    assert a == pytest.approx(full, abs=1e-9)


def test_memory_rejection():
    basis = build_basis(A, 8)
    m = Mesh1D.uniform_mesh(40.0, 0.05)
    with pytest.raises(ResourceError, match="GB"):
        assemble(gaussian_well(A), 0.5, m, m, basis)


def test_implied_w():
    assert implied_w(1.0 - math.exp(-12.0), 1.0) == pytest.approx(-1 / 6)
    assert math.isnan(implied_w(1.2, 1.0))


def test_bracket_flat_surface():
    jet = build_surface_jet(plane(), Grid2D.square(4.0, 0.25))
    r = bracket_layer_energy(jet, A, 0.3)
    assert r.verdict == "no bound state"


def test_bracket_degrades_for_tiny_gap():
    jet = build_surface_jet(gaussian_bump(), Grid2D.square(8.0, 0.1))
    r = bracket_layer_energy(jet, 0.25, 0.05)
    assert r.verdict == "asymptotics-only" and r.log_gap_predicted < -25
    assert math.isnan(r.E_minus)


def test_bracket_ordering_moderate_eps():
    jet = build_surface_jet(gaussian_bump(1.0, 3.0), Grid2D.square(12.0, 0.5))
    r = bracket_layer_energy(jet, A, 2.5, N=2, h=0.5, L=24.0)
    assert r.E_minus <= r.E_plus
    # both sit below the free ground state of the box
    assert r.E_plus < 1.0 + _box_ground(24.0, 0.5) * 1.05
    assert r.verdict in ("bracketed", "lower bracket only", "no bound state")
