r"""Differential geometry of a Monge patch ``(x, eps f(x))`` and of the layer over it.

The quantities follow the standard small-deformation bookkeeping:

* metric determinant :math:`g = 1 + \varepsilon^2 |\nabla f|^2`;
* Gauss curvature :math:`K = \varepsilon^2 g^{-2} k_0`,
  :math:`k_0 = f_{,11} f_{,22} - f_{,12}^2`;
* mean curvature :math:`M = \varepsilon g^{-3/2}(m_0 + \varepsilon^2 m_1)`;
* effective potentials of the straightened layer Hamiltonian,
  :math:`V_2 = (K - M^2)/(1 - 2Mu + Ku^2)^2` and the gradient term
  :math:`v_1` built from :math:`\nabla_g` and :math:`\Delta_g` of ``K``, ``M``.

Derivatives of ``K`` and ``M`` are obtained exactly from the fourth-order jet
of ``f`` using :class:`Jet2`, a small second-order forward-mode arithmetic.
"""

import warnings
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .grid import Grid2D

_FD_HALF = 4
_DECAY_WARN = 1e-8


# ---------------------------------------------------------------- surface jets

def _key(idx):
    return tuple(sorted(idx))


@dataclass
class SurfaceJet:
    """Partial derivatives of ``f`` of orders 0..4 on a grid.

    ``jet.d(1, 2, 2)`` returns ``f_{,122}``; index order is irrelevant.
    """

    grid: Grid2D
    fields: dict = field(repr=False)
    mode: str = "analytic"
    boundary_f: float = 0.0
    boundary_grad: float = 0.0

    def d(self, *idx):
        if not idx:
            return self.fields[()]
        return self.fields[_key(idx)]


def _all_indices():
    for order in range(1, 5):
        for idx in combinations_with_replacement((1, 2), order):
            yield idx


def _boundary_diagnostics(grid, f, f1, f2):
    ring = _FD_HALF
    return grid.ring_max(f, ring), grid.ring_max(np.hypot(f1, f2), ring)


def central_weights(order, half=_FD_HALF):
    """Central finite-difference weights for ``d^order/dt^order`` on ``2 half + 1`` points."""
    k = np.arange(-half, half + 1, dtype=float)
    n = k.size
    a = np.vander(k, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[order] = float(np.prod(np.arange(1, order + 1)))
    return np.linalg.solve(a, rhs)


def _apply_stencil(v, w, h, order, axis):
    half = (len(w) - 1) // 2
    v = np.moveaxis(v, axis, 0)
    out = np.zeros_like(v)
    n = v.shape[0]
    for s, ws in enumerate(w):
        out[half:n - half] += ws * v[s:n - 2 * half + s]
    return np.moveaxis(out / h ** order, 0, axis)


def build_surface_jet(surface, grid):
    """Sample the derivative jet of ``f``.

    Parameters
    ----------
    surface : SeparableSurface or array_like
        Either an analytic profile (exact derivatives at the nodes) or the
        sampled values of ``f`` on ``grid``.  Sampled input is differentiated
        with the widest central stencils fitting a 9-point footprint (order 8
        for first and second derivatives, order 6 for third and fourth); the
        outer ring of 4 nodes is set to zero.
    grid : Grid2D
    """
    if hasattr(surface, "derivative"):
        x, y = grid.x, grid.y
        fields = {(): surface(x, y)}
        for idx in _all_indices():
            m = idx.count(1)
            fields[idx] = surface.derivative(m, len(idx) - m, x, y)
        mode = "analytic"
    else:
        f = np.asarray(surface, dtype=float)
        if f.shape != grid.shape:
            raise ValueError(f"sampled f has shape {f.shape}, grid is {grid.shape}")
        if min(grid.shape) < 2 * _FD_HALF + 1:
            raise ValueError("sampled mode needs at least 9 nodes per axis")
        if not np.all(np.isfinite(f)):
            raise ValueError("sampled f contains non-finite values")
        weights = {n: central_weights(n) for n in range(1, 5)}
        fields = {(): f.copy()}
        for idx in _all_indices():
            m = idx.count(1)
            n = len(idx) - m
            v = f
            if m:
                v = _apply_stencil(v, weights[m], grid.hx, m, 0)
            if n:
                v = _apply_stencil(v, weights[n], grid.hy, n, 1)
            v[:_FD_HALF, :] = v[-_FD_HALF:, :] = 0.0
            v[:, :_FD_HALF] = v[:, -_FD_HALF:] = 0.0
            fields[idx] = v
        mode = "sampled"
    bf, bg = _boundary_diagnostics(grid, fields[()], fields[(1,)], fields[(2,)])
    return SurfaceJet(grid, fields, mode, bf, bg)


# ------------------------------------------------------- second-order jets

class Jet2:
    """Scalar field with its gradient and Hessian, closed under + - * and powers."""

    __slots__ = ("v", "g1", "g2", "h11", "h12", "h22")

    def __init__(self, v, g1, g2, h11, h12, h22):
        self.v, self.g1, self.g2 = v, g1, g2
        self.h11, self.h12, self.h22 = h11, h12, h22

    @classmethod
    def constant(cls, c, like):
        z = np.zeros_like(like)
        return cls(z + c, z, z, z, z, z)

    @classmethod
    def from_jet(cls, jet, *idx):
        """Jet of the partial derivative ``f_{,idx}`` (needs order ``len(idx) + 2 <= 4``)."""
        i = tuple(idx)
        return cls(jet.d(*i), jet.d(*i, 1), jet.d(*i, 2),
                   jet.d(*i, 1, 1), jet.d(*i, 1, 2), jet.d(*i, 2, 2))

    def _lift(self, other):
        return other if isinstance(other, Jet2) else Jet2.constant(other, self.v)

    def __add__(self, o):
        o = self._lift(o)
        return Jet2(self.v + o.v, self.g1 + o.g1, self.g2 + o.g2,
                    self.h11 + o.h11, self.h12 + o.h12, self.h22 + o.h22)

    __radd__ = __add__

    def __neg__(self):
        return Jet2(-self.v, -self.g1, -self.g2, -self.h11, -self.h12, -self.h22)

    def __sub__(self, o):
        return self + (-self._lift(o))

    def __rsub__(self, o):
        return self._lift(o) - self

    def __mul__(self, o):
        if not isinstance(o, Jet2):
            return Jet2(o * self.v, o * self.g1, o * self.g2,
                        o * self.h11, o * self.h12, o * self.h22)
        return Jet2(self.v * o.v,
                    self.g1 * o.v + self.v * o.g1,
                    self.g2 * o.v + self.v * o.g2,
                    self.h11 * o.v + 2 * self.g1 * o.g1 + self.v * o.h11,
                    self.h12 * o.v + self.g1 * o.g2 + self.g2 * o.g1 + self.v * o.h12,
                    self.h22 * o.v + 2 * self.g2 * o.g2 + self.v * o.h22)

    __rmul__ = __mul__

    def __pow__(self, p):
        d0 = self.v ** p
        d1 = p * self.v ** (p - 1)
        d2 = p * (p - 1) * self.v ** (p - 2)
        return Jet2(d0, d1 * self.g1, d1 * self.g2,
                    d2 * self.g1 ** 2 + d1 * self.h11,
                    d2 * self.g1 * self.g2 + d1 * self.h12,
                    d2 * self.g2 ** 2 + d1 * self.h22)

    @property
    def laplacian(self):
        return self.h11 + self.h22


# ------------------------------------------------------------ curvatures

@dataclass
class CurvatureBundle:
    """Curvature fields of the surface at a given ``eps``.

    ``kappa_principal`` holds the two eigenvalue fields of the Weingarten
    tensor, ordered ``k1 <= k2`` pointwise.
    """

    grid: Grid2D
    eps: float
    k0: np.ndarray
    m0: np.ndarray
    m1: np.ndarray
    g: np.ndarray
    K: np.ndarray
    M: np.ndarray
    kappa_principal: tuple
    grad_sq: np.ndarray = field(repr=False)


def _weingarten(jet, eps):
    f1, f2 = jet.d(1), jet.d(2)
    th = np.array([[jet.d(1, 1), jet.d(1, 2)], [jet.d(1, 2), jet.d(2, 2)]])
    eta_t = np.array([[f2 * f2, -f1 * f2], [-f1 * f2, f1 * f1]])
    g = 1.0 + eps ** 2 * (f1 * f1 + f2 * f2)
    prod = np.einsum("ab...,bc...->ac...", th, eta_t)
    return eps * g ** -1.5 * (th + eps ** 2 * prod)


def principal_curvatures(jet, eps):
    """Eigenvalues of ``h_mu^nu`` computed from the explicit 2x2 tensor."""
    h = _weingarten(jet, eps)
    half_tr = 0.5 * (h[0, 0] + h[1, 1])
    # the Weingarten map is self-adjoint w.r.t. g, so the discriminant is >= 0
    disc = np.sqrt(np.maximum(0.25 * (h[0, 0] - h[1, 1]) ** 2 + h[0, 1] * h[1, 0], 0.0))
    return half_tr - disc, half_tr + disc


def curvatures(jet, eps):
    """Curvature fields of ``Sigma_eps`` from the jet of ``f``."""
    eps = float(eps)
    if not np.isfinite(eps) or eps < 0:
        raise ValueError("eps must be finite and >= 0")
    f1, f2 = jet.d(1), jet.d(2)
    f11, f12, f22 = jet.d(1, 1), jet.d(1, 2), jet.d(2, 2)
    grad_sq = f1 * f1 + f2 * f2
    g = 1.0 + eps ** 2 * grad_sq
    k0 = f11 * f22 - f12 * f12
    m0 = 0.5 * (f11 + f22)
    m1 = 0.5 * (f1 * f1 * f22 + f2 * f2 * f11 - 2.0 * f1 * f2 * f12)
    K = eps ** 2 * k0 / g ** 2
    M = eps * g ** -1.5 * (m0 + eps ** 2 * m1)
    kp = principal_curvatures(jet, eps)
    return CurvatureBundle(jet.grid, eps, k0, m0, m1, g, K, M, kp, grad_sq)


def inverse_metric(jet, eps):
    """``g^{mu nu}`` as a (2, 2, nx, ny) array."""
    f1, f2 = jet.d(1), jet.d(2)
    g = 1.0 + eps ** 2 * (f1 * f1 + f2 * f2)
    return np.array([[1.0 + eps ** 2 * f2 * f2, -eps ** 2 * f1 * f2],
                     [-eps ** 2 * f1 * f2, 1.0 + eps ** 2 * f1 * f1]]) / g


def metric(jet, eps):
    f1, f2 = jet.d(1), jet.d(2)
    return np.array([[1.0 + eps ** 2 * f1 * f1, eps ** 2 * f1 * f2],
                     [eps ** 2 * f1 * f2, 1.0 + eps ** 2 * f2 * f2]])


@dataclass(frozen=True)
class LayerConstants:
    a: float
    eps: float
    eta_inf: float
    rho_m_inv: float
    c_minus: float
    c_plus: float
    C_minus: float
    C_plus: float
    sigma_minus: float
    sigma_plus: float


def layer_constants(bundle, a):
    """Ellipticity and layer-metric bounds from grid maxima.

    Raises
    ------
    ValueError
        If ``a * rho_m_inv >= 1`` (the layer map is not a diffeomorphism) or
        if ``c_-`` is not positive.
    """
    a = float(a)
    if not a > 0:
        raise ValueError("half-width a must be > 0")
    eta_inf = float(np.max(bundle.grad_sq))
    rho = float(max(np.max(np.abs(bundle.kappa_principal[0])),
                    np.max(np.abs(bundle.kappa_principal[1]))))
    if a * rho >= 1.0:
        raise ValueError(f"diffeomorphism condition violated: a*rho_m_inv = {a * rho:.4g} >= 1")
    e2 = bundle.eps ** 2 * eta_inf
    c_m, c_p = 1.0 - e2, 1.0 + e2
    if c_m <= 0:
        raise ValueError("metric not uniformly elliptic: eps^2 eta_inf >= 1")
    C_m, C_p = (1.0 - a * rho) ** 2, (1.0 + a * rho) ** 2
    s_p = np.sqrt(c_m ** 3 * C_m ** 2 / (c_p ** 2 * C_p))
    s_m = np.sqrt(c_p ** 3 * C_p ** 2 / (c_m ** 2 * C_m))
    return LayerConstants(a, bundle.eps, eta_inf, rho, c_m, c_p, C_m, C_p, float(s_m), float(s_p))


# ------------------------------------------------------ effective potentials

@dataclass
class CurvatureDerivatives:
    """``K``, ``M`` with metric gradients and Laplace-Beltrami images."""

    K: np.ndarray
    M: np.ndarray
    grad_K: tuple
    grad_M: tuple
    lap_g_K: np.ndarray
    lap_g_M: np.ndarray
    ginv: np.ndarray


def curvature_derivatives(jet, eps):
    """Compute ``grad K``, ``grad M``, ``Delta_g K`` and ``Delta_g M`` exactly."""
    f1 = Jet2.from_jet(jet, 1)
    f2 = Jet2.from_jet(jet, 2)
    f11 = Jet2.from_jet(jet, 1, 1)
    f12 = Jet2.from_jet(jet, 1, 2)
    f22 = Jet2.from_jet(jet, 2, 2)
    e2 = eps * eps
    g = 1.0 + e2 * (f1 * f1 + f2 * f2)
    k0 = f11 * f22 - f12 * f12
    m0 = 0.5 * (f11 + f22)
    m1 = 0.5 * (f1 * f1 * f22 + f2 * f2 * f11 - 2.0 * f1 * f2 * f12)
    K = e2 * k0 * g ** -2
    M = eps * (m0 + e2 * m1) * g ** -1.5
    # g^{1/2} g^{mu nu} = g^{-1/2} (delta + eps^2 eta~)
    gm = g ** -0.5
    a11 = gm * (1.0 + e2 * f2 * f2)
    a12 = gm * (-e2 * f1 * f2)
    a22 = gm * (1.0 + e2 * f1 * f1)
    ginv = np.array([[a11.v, a12.v], [a12.v, a22.v]]) / g.v ** 0.5
    # d_mu (g^{1/2} g^{mu nu}) for nu = 1, 2
    div1 = a11.g1 + a12.g2
    div2 = a12.g1 + a22.g2
    sqrt_g = g.v ** 0.5

    def lap_g(F):
        second = ginv[0, 0] * F.h11 + 2 * ginv[0, 1] * F.h12 + ginv[1, 1] * F.h22
        return second + (div1 * F.g1 + div2 * F.g2) / sqrt_g

    return CurvatureDerivatives(K.v, M.v, (K.g1, K.g2), (M.g1, M.g2),
                                lap_g(K), lap_g(M), ginv)


@dataclass
class EffectivePotentialField:
    """Effective potentials sampled on ``grid x u_nodes`` (last axis is ``u``)."""

    grid: Grid2D
    u_nodes: np.ndarray
    v1: np.ndarray = field(repr=False)
    V2: np.ndarray = field(repr=False)
    V_plus: np.ndarray = field(repr=False)
    V_minus: np.ndarray = field(repr=False)
    constants: LayerConstants = None


def _resample(grid, values, sigma):
    """Evaluate ``values(x / sigma)`` bilinearly, zero outside the grid."""
    if sigma == 1.0:
        return values.copy()
    interp = RegularGridInterpolator((grid.x, grid.y), values, method="linear",
                                     bounds_error=False, fill_value=0.0)
    X, Y = grid.mesh()
    return interp(np.stack([X / sigma, Y / sigma], axis=-1))


def effective_potentials(jet, bundle, a, eps, u_nodes, constants=None):
    """Curvature-induced potentials ``v1``, ``V2`` and the bracket potentials ``V_+-``.

    ``V_+-`` are divided by ``eps`` so they stay finite as ``eps -> 0``; at
    ``eps = 0`` they are returned as zero.
    """
    u = np.asarray(u_nodes, dtype=float)
    if np.any(np.abs(u) >= a):
        raise ValueError("u_nodes must lie inside (-a, a)")
    cd = curvature_derivatives(jet, eps)
    K = cd.K[..., None]
    M = cd.M[..., None]
    den = 1.0 - 2.0 * M * u + K * u * u
    if np.any(den <= 0.0):
        raise ValueError("1 - 2Mu + Ku^2 <= 0 somewhere: layer map degenerates")
    w1 = u * u * cd.grad_K[0][..., None] - 2.0 * u * cd.grad_M[0][..., None]
    w2 = u * u * cd.grad_K[1][..., None] - 2.0 * u * cd.grad_M[1][..., None]
    gi = cd.ginv[..., None]
    norm_sq = gi[0, 0] * w1 * w1 + 2 * gi[0, 1] * w1 * w2 + gi[1, 1] * w2 * w2
    lap = u * u * cd.lap_g_K[..., None] - 2.0 * u * cd.lap_g_M[..., None]
    v1 = -norm_sq / (4.0 * den ** 2) + lap / (2.0 * den)
    V2 = (K - M * M) / den ** 2
    if constants is None:
        constants = layer_constants(bundle, a)
    if eps == 0.0:
        vp = np.zeros_like(v1)
        vm = np.zeros_like(v1)
    else:
        cp, cm = constants.C_plus, constants.C_minus
        base_p = (cp / cm ** 2) * v1 + V2
        base_m = (cm / cp ** 2) * v1 + V2
        vp = np.empty_like(v1)
        vm = np.empty_like(v1)
        for k in range(u.size):
            vp[..., k] = _resample(jet.grid, base_p[..., k], constants.sigma_plus) / eps
            vm[..., k] = _resample(jet.grid, base_m[..., k], constants.sigma_minus) / eps
    return EffectivePotentialField(jet.grid, u, v1, V2, vp, vm, constants)


# ----------------------------------------------------- integrated curvature

@dataclass(frozen=True)
class TotalCurvature:
    total: float
    integral_k0: float
    boundary_diagnostic: float
    trusted: bool


def total_gauss_curvature(bundle, jet=None, threshold=_DECAY_WARN):
    """``int K g^{1/2} dx`` and ``int k0 dx`` by the trapezoid rule.

    A warning is issued when the boundary ring diagnostic (max of ``|K|`` and
    ``|k0|`` on the outer ring, and ``|f|``, ``|grad f|`` if ``jet`` is
    given) exceeds ``threshold``.
    """
    grid = bundle.grid
    total = float(grid.integrate(bundle.K * np.sqrt(bundle.g)))
    ik0 = float(grid.integrate(bundle.k0))
    diag = max(grid.ring_max(bundle.k0), grid.ring_max(bundle.K))
    if jet is not None:
        diag = max(diag, jet.boundary_f, jet.boundary_grad)
    trusted = diag <= threshold
    if not trusted:
        warnings.warn(f"surface not decayed at grid boundary ({diag:.2e}); "
                      "total curvature untrusted", RuntimeWarning, stacklevel=2)
    return TotalCurvature(total, ik0, diag, trusted)


# ------------------------------------------- fields used by the asymptotics

@dataclass
class MeanCurvatureFields:
    """``m0``, its gradient and Laplacian, ``k0`` and ``Delta k0`` (exact from the jet)."""

    grid: Grid2D
    m0: np.ndarray
    grad_m0: tuple
    lap_m0: np.ndarray
    k0: np.ndarray
    lap_k0: np.ndarray


def mean_curvature_fields(jet):
    f11 = Jet2.from_jet(jet, 1, 1)
    f12 = Jet2.from_jet(jet, 1, 2)
    f22 = Jet2.from_jet(jet, 2, 2)
    m0 = 0.5 * (f11 + f22)
    k0 = f11 * f22 - f12 * f12
    return MeanCurvatureFields(jet.grid, m0.v, (m0.g1, m0.g2), m0.laplacian,
                               k0.v, k0.laplacian)
