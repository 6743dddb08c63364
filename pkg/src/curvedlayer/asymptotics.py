r"""Leading weak-curvature coefficient ``w1`` and the map from ``w`` to energies.

For a layer of half-width ``a`` over ``(x, eps f(x))`` the ground state sits
at :math:`E = \kappa_1^2 - e^{2/w}` with :math:`w = \varepsilon^2 w_1 + o(\varepsilon^2)`
and

.. math::
    w_1 = -\sum_{j\ge2} T_j^2 k_j^4
          \int \frac{|\hat m_0(\omega)|^2}{|\omega|^2 + k_j^2}\,d\omega,
    \qquad k_j^2 = \kappa_j^2 - \kappa_1^2,

where :math:`\hat m_0(\omega) = (2\pi)^{-3/2}\int m_0 e^{-i\omega x}dx`.
Three equivalent routes are provided: real-space convolution with
:math:`G_k = K_0(k|x|)/2\pi`, the Fourier integral above, and the
intermediate form that keeps :math:`k_0`, :math:`\nabla m_0` and
:math:`\Delta m_0` explicit.

Mode-sum truncation
-------------------
Using :math:`k^4/(\omega^2+k^2) = k^2 - \omega^2 + \omega^4/(\omega^2+k^2)`
each mode term splits into :math:`T_j^2(k_j^2\|m_0\|^2 - \|\nabla m_0\|^2)`
plus a remainder of order :math:`T_j^2 k_j^{-2}`.  The first two sums are
known in closed form (they add up to ``1`` and ``||u chi_1||^2``), so the
modes beyond ``N`` are restored exactly at those two orders when
``tail_correction`` is on.  What is left decays like ``N^-7``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft

from .kernels import Convolver, k0_table
from .transverse import overlap_sums

_TWO_PI = 2.0 * math.pi


@dataclass
class SpectralResult:
    """A ``w`` value with its per-mode breakdown and diagnostics.

    ``per_mode`` lists ``(j, S_j)`` with ``w = -sum S_j`` (plus the tail
    correction when applied).
    """

    w: float
    per_mode: list = field(default_factory=list)
    tail: float = 0.0
    S2_deficit: float = 0.0
    S0_deficit: float = 0.0
    identity_residual: float = 0.0
    gamma: float = 1.0
    route: str = ""
    diagnostics: dict = field(default_factory=dict)

    @property
    def E(self):
        return energy_from_w(self.w, self.diagnostics.get("kappa1", 1.0))[0]


def order_exponent(delta):
    """Error exponent ``gamma = min(1, delta / 2)`` for decay exponent ``delta``."""
    if delta <= 0:
        raise ValueError("decay exponent must be > 0")
    return min(1.0, 0.5 * delta)


@dataclass(frozen=True)
class FieldNorms:
    m0_sq: float
    grad_sq: float
    lap_sq: float


def _norms(grid, m0, grad=None, lap=None):
    m0_sq = float(grid.integrate(m0 * m0))
    if grad is None:
        grad = grid.gradient(m0)
    grad_sq = float(grid.integrate(grad[0] ** 2 + grad[1] ** 2))
    if lap is None:
        lap = grid.laplacian(m0)
    lap_sq = float(grid.integrate(lap * lap))
    return FieldNorms(m0_sq, grad_sq, lap_sq)


def _check_grid(grid):
    if not grid.is_square_spacing:
        raise ValueError("convolution routes need hx == hy")


def _even_modes(basis):
    j = np.arange(1, basis.N + 1)
    k2 = basis.kappa ** 2 - basis.kappa[0] ** 2
    sel = (j >= 2) & (basis.T != 0.0)
    return j[sel], k2[sel], basis.T[sel] ** 2


def _finish(route, basis, grid, m0, terms, modes, norms, tail_correction, delta, flag_tol):
    sums = overlap_sums(basis)
    tail = 0.0
    if tail_correction:
        tail = -(sums.S2_deficit * norms.m0_sq - sums.S0_deficit * norms.grad_sq) / _TWO_PI
    w = -float(np.sum(terms)) + tail
    res = SpectralResult(
        w=w, per_mode=list(zip(modes.tolist(), terms.tolist())), tail=tail,
        S2_deficit=sums.S2_deficit, S0_deficit=sums.S0_deficit,
        identity_residual=sums.S2 - 1.0, gamma=order_exponent(delta), route=route,
        diagnostics={"kappa1": basis.kappa1, "N": basis.N, "m0_norm_sq": norms.m0_sq,
                     "boundary": grid.ring_max(m0)},
    )
    if norms.m0_sq > 0 and w >= -flag_tol * norms.m0_sq:
        res.diagnostics["inconsistent"] = True
    return res


def w1_realspace(grid, m0, basis, grad_m0=None, lap_m0=None, tail_correction=True,
                 delta=2.0, flag_tol=1e-14):
    r"""``w1`` from real-space quadratic forms ``(m0, G_k * m0)``.

    Each mode term is :math:`S_j = (2\pi)^{-1} T_j^2 k_j^4 (m_0, G_{k_j} * m_0)`
    with the convolution done on the grid with the moment-matched origin
    weight of :mod:`curvedlayer.kernels`.
    """
    _check_grid(grid)
    m0 = np.asarray(m0, dtype=float)
    norms = _norms(grid, m0, grad_m0, lap_m0)
    modes, k2, t2 = _even_modes(basis)
    terms = np.zeros(modes.size)
    if norms.m0_sq > 0:
        for i, (kk, tt) in enumerate(zip(k2, t2)):
            k = math.sqrt(kk)
            conv = Convolver(k0_table(k, grid.hx, grid.shape), grid.shape, grid.hx)
            form = conv.quadratic_form(m0) / _TWO_PI
            terms[i] = tt * kk * kk * form / _TWO_PI
    return _finish("realspace", basis, grid, m0, terms, modes, norms,
                   tail_correction, delta, flag_tol)


def fourier_power(grid, field_values, pad=2):
    """Return ``(|hat F|^2, |omega|^2, d omega)`` on the half-spectrum of a padded rFFT.

    ``hat F = (2 pi)^{-3/2} int F e^{-i omega x} dx``; the half-spectrum
    array already carries the Hermitian doubling weights in ``|hat F|^2``.
    """
    _check_grid(grid)
    if pad < 2:
        raise ValueError("zero-padding factor must be >= 2")
    h = grid.hx
    px = sfft.next_fast_len(int(pad * grid.nx))
    py = sfft.next_fast_len(int(pad * grid.ny), real=True)
    spec = sfft.rfft2(np.asarray(field_values, dtype=float), s=(px, py))
    power = (h * h) ** 2 * np.abs(spec) ** 2 / _TWO_PI ** 3
    wx = _TWO_PI * sfft.fftfreq(px, h)
    wy = _TWO_PI * sfft.rfftfreq(py, h)
    om2 = wx[:, None] ** 2 + wy[None, :] ** 2
    weight = np.full(wy.size, 2.0)
    weight[0] = 1.0
    if py % 2 == 0:
        weight[-1] = 1.0
    power *= weight[None, :]
    dom = (_TWO_PI / (px * h)) * (_TWO_PI / (py * h))
    return power, om2, dom


def _mode_integrals(power, om2, dom, k2_values, chunk=16):
    out = np.empty(len(k2_values))
    p = power.ravel()
    o = om2.ravel()
    for start in range(0, len(k2_values), chunk):
        kk = np.asarray(k2_values[start:start + chunk])[:, None]
        out[start:start + chunk] = dom * (p[None, :] / (o[None, :] + kk)).sum(axis=1)
    return out


def w1_fourier(grid, m0, basis, pad=2, grad_m0=None, lap_m0=None, tail_correction=True,
               delta=2.0, flag_tol=1e-14):
    r"""``w1`` from the Fourier integrals of :math:`|\hat m_0|^2/(|\omega|^2+k_j^2)`."""
    m0 = np.asarray(m0, dtype=float)
    norms = _norms(grid, m0, grad_m0, lap_m0)
    modes, k2, t2 = _even_modes(basis)
    power, om2, dom = fourier_power(grid, m0, pad)
    integrals = _mode_integrals(power, om2, dom, k2)
    terms = t2 * k2 * k2 * integrals
    return _finish("fourier", basis, grid, m0, terms, modes, norms,
                   tail_correction, delta, flag_tol)


def w1_intermediate(fields, basis):
    r"""Intermediate form keeping :math:`k_0`, :math:`\nabla m_0`, :math:`\Delta m_0`.

    .. math::
        \frac{1}{2\pi}\Big[\int(k_0 - m_0^2)
        + \|u\chi_1\|^2\int(\tfrac12\Delta k_0 - |\nabla m_0|^2 - 2 m_0\Delta m_0)
        - \frac{1}{2\pi}\sum_j T_j^2 \iint \Delta m_0\,K_0(k_j|x-x'|)\,\Delta m_0\Big]

    ``fields`` is a :class:`curvedlayer.geometry.MeanCurvatureFields`.  The
    mode sum (the only truncated part) decays like ``T_j^2 / k_j^2``.
    """
    grid = fields.grid
    _check_grid(grid)
    m0, lap = fields.m0, fields.lap_m0
    g1, g2 = fields.grad_m0
    first = float(grid.integrate(fields.k0 - m0 * m0))
    second = basis.u_moment * float(grid.integrate(
        0.5 * fields.lap_k0 - (g1 * g1 + g2 * g2) - 2.0 * m0 * lap))
    modes, k2, t2 = _even_modes(basis)
    third = 0.0
    for kk, tt in zip(k2, t2):
        conv = Convolver(k0_table(math.sqrt(kk), grid.hx, grid.shape), grid.shape, grid.hx)
        third += tt * conv.quadratic_form(lap)
    return (first + second - third / _TWO_PI) / _TWO_PI


@dataclass(frozen=True)
class ThinLayer:
    leading: float
    d2_term: float
    full: float = float("nan")


def w1_thin(grid, m0, d, basis=None, grad_m0=None, lap_m0=None, pad=2):
    r"""Thin-layer expansion ``-||m0||^2/2pi + (pi^2-6) d^2 ||grad m0||^2 / (24 pi^3)``.

    With a ``basis`` (whose width must equal ``d``) the complete expression
    including :math:`-\sum_j T_j^2\int|\widehat{\Delta m_0}|^2/(|\omega|^2+k_j^2)`
    is also returned as ``full``.
    """
    m0 = np.asarray(m0, dtype=float)
    norms = _norms(grid, m0, grad_m0, lap_m0)
    leading = -norms.m0_sq / _TWO_PI
    d2 = (math.pi ** 2 - 6.0) * d * d * norms.grad_sq / (24.0 * math.pi ** 3)
    full = float("nan")
    if basis is not None:
        if not math.isclose(basis.d, d, rel_tol=1e-12):
            raise ValueError("basis width does not match d")
        lap = grid.laplacian(m0) if lap_m0 is None else lap_m0
        modes, k2, t2 = _even_modes(basis)
        power, om2, dom = fourier_power(grid, lap, pad)
        third = float(np.sum(t2 * _mode_integrals(power, om2, dom, k2)))
        full = leading + d2 - third
    return ThinLayer(leading, d2, full)


def convolution_identity(grid, m0, lap_m0, grad_m0, k):
    """Both sides of ``(Lm, G_k*Lm) = k^4 (m, G_k*m) - k^2||m||^2 + ||grad m||^2``."""
    conv = Convolver(k0_table(k, grid.hx, grid.shape), grid.shape, grid.hx)
    lhs = conv.quadratic_form(lap_m0) / _TWO_PI
    norms = _norms(grid, m0, grad_m0, lap_m0)
    rhs = k ** 4 * conv.quadratic_form(m0) / _TWO_PI - k * k * norms.m0_sq + norms.grad_sq
    return lhs, rhs


class NoBoundState(ValueError):
    """Raised when the data predict no eigenvalue below the threshold."""


def energy_from_w(w, kappa1):
    """Map ``w < 0`` to ``(E, gap)`` with ``gap = exp(2 / w)``.

    The logarithm of the gap is ``2 / w`` (see :func:`log_gap`); when the gap
    underflows ``E`` equals ``kappa1^2`` to double precision.

    Raises
    ------
    NoBoundState
        If ``w >= 0``.
    """
    w = float(w)
    if not w < 0.0:
        raise NoBoundState(f"no bound state: w = {w!r} is not negative")
    lg = 2.0 / w
    gap = math.exp(lg) if lg > -745.0 else 0.0
    return kappa1 * kappa1 - gap, gap


def log_gap(w):
    if not w < 0.0:
        raise NoBoundState(f"no bound state: w = {w!r} is not negative")
    return 2.0 / w
