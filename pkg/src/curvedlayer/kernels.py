r"""Discrete convolution kernels for logarithmically singular Green functions.

All double integrals :math:`\iint \phi(x) G(|x-x'|) \psi(x')\,dx\,dx'` in this
package are evaluated with the trapezoid rule on a uniform square lattice of
spacing ``h``.  The kernel is sampled at every lattice offset except the
origin, where the log singularity sits; the origin weight is chosen so that
the lattice sum of the sampled kernel reproduces its exact integral
(moment matching):

.. math::
    W_0(\kappa) = \frac{2\pi}{\kappa^2} - {\sum_{n\neq 0}} K_0(\kappa|n|),
    \qquad \kappa = k h.

For :math:`\kappa < 2\pi` the lattice sum has the closed form

.. math::
    W_0(\kappa) = c_\ast - \ln\frac{\kappa}{2} - \gamma_E
      + \sum_{n\ge1} (-1)^{n+1} \frac{Z(n+1)}{2\pi}
        \Big(\frac{\kappa}{2\pi}\Big)^{2n},

with :math:`c_\ast = \ln(\Gamma(1/4)^2 / 2\sqrt{\pi})` (the regularised
lattice sum of :math:`\ln|n|`) and :math:`Z(s) = 4\zeta(s)\beta(s)` the
Epstein zeta function of the square lattice.  The same constant gives the
origin weight of the bare log kernel.  With this correction the quadrature
error is :math:`O(h^4)` instead of the :math:`O(h^2 \ln h)` of a punctured
rule.
"""

import math
from functools import lru_cache

import numpy as np
from scipy import fft as sfft
from scipy.special import zeta

from .specfun import EULER_GAMMA, bessel_k0, k0_log_remainder

LATTICE_LOG_CONSTANT = 2.0 * math.lgamma(0.25) - 0.5 * math.log(4.0 * math.pi)

_SERIES_KAPPA_MAX = 2.5
_SERIES_ORDER = 40
_TABLE_CUTOFF = 1e-18
_DECAY_ARGUMENT = 42.0


def _dirichlet_beta(s):
    return 4.0 ** (-s) * (zeta(s, 0.25) - zeta(s, 0.75))


@lru_cache(maxsize=None)
def _epstein_coefficients():
    n = np.arange(1, _SERIES_ORDER + 1)
    z = 4.0 * zeta(n + 1.0) * _dirichlet_beta(n + 1.0)
    return (-1.0) ** (n + 1) * z / (2.0 * math.pi)


def _diag_smooth_part(kappa):
    """W0(kappa) - (c* - ln(kappa/2) - gamma) for kappa < 2 pi."""
    coef = _epstein_coefficients()
    t = (kappa / (2.0 * math.pi)) ** 2
    return float(np.polynomial.polynomial.polyval(t, np.concatenate([[0.0], coef])))


def _lattice_sum_k0(kappa):
    radius = int(math.ceil(_DECAY_ARGUMENT / kappa)) + 2
    n = np.arange(0, radius + 1)
    i, j = np.meshgrid(n, n, indexing="ij")
    r = np.hypot(i, j)
    mult = np.where(i == 0, 1.0, 2.0) * np.where(j == 0, 1.0, 2.0)
    mask = r > 0
    return float(np.sum(mult[mask] * bessel_k0(kappa * r[mask])))


def k0_diagonal(kappa):
    r"""Moment-matched origin weight :math:`W_0(\kappa)` for :math:`K_0(k|x|)`.

    Parameters
    ----------
    kappa : float
        Dimensionless product ``k * h`` (> 0).
    """
    kappa = float(kappa)
    if not kappa > 0.0:
        raise ValueError("kappa must be > 0")
    if kappa < _SERIES_KAPPA_MAX:
        return (LATTICE_LOG_CONSTANT - math.log(0.5 * kappa) - EULER_GAMMA
                + _diag_smooth_part(kappa))
    return 2.0 * math.pi / kappa ** 2 - _lattice_sum_k0(kappa)


def log_diagonal(h):
    """Origin weight of the kernel ``-ln(r/2) - gamma`` on a lattice of spacing h."""
    return LATTICE_LOG_CONSTANT - math.log(0.5 * h) - EULER_GAMMA


def regular_k0_diagonal(k, h):
    """Origin weight of ``K0(k r) + ln k``; finite as ``k -> 0``."""
    kappa = k * h
    if kappa < _SERIES_KAPPA_MAX:
        return log_diagonal(h) + _diag_smooth_part(kappa)
    return k0_diagonal(kappa) + math.log(k)


def _offset_radius(shape, h, max_offset=None):
    nx, ny = shape
    mx, my = nx - 1, ny - 1
    if max_offset is not None:
        mx, my = min(mx, max_offset), min(my, max_offset)
    i = np.arange(-mx, mx + 1)
    j = np.arange(-my, my + 1)
    ii, jj = np.meshgrid(i, j, indexing="ij")
    return h * np.hypot(ii, jj)


def _crop_support(table, values_abs, scale):
    """Shrink a centred offset table to the square holding non-negligible values."""
    nx, ny = table.shape
    cx, cy = nx // 2, ny // 2
    keep = values_abs > _TABLE_CUTOFF * scale
    if not keep.any():
        return table[cx:cx + 1, cy:cy + 1]
    ix = np.nonzero(keep.any(axis=1))[0]
    iy = np.nonzero(keep.any(axis=0))[0]
    rx = max(cx - ix[0], ix[-1] - cx)
    ry = max(cy - iy[0], iy[-1] - cy)
    return table[cx - rx:cx + rx + 1, cy - ry:cy + ry + 1]


def k0_table(k, h, shape):
    """Offset table of ``K0(k |x_p - x_q|)`` with the corrected origin entry.

    The table is centred (origin at the middle index) and cropped to the
    offsets where the kernel exceeds ``1e-18`` of its origin value.
    """
    if k <= 0.0:
        raise ValueError("k must be > 0")
    # K0(z) < 1e-19 beyond z = 42, so those offsets are never evaluated
    r = _offset_radius(shape, h, int(math.ceil(_DECAY_ARGUMENT / (k * h))) + 1)
    cx, cy = (r.shape[0] - 1) // 2, (r.shape[1] - 1) // 2
    r[cx, cy] = 1.0
    table = bessel_k0(k * r)
    table[cx, cy] = k0_diagonal(k * h)
    return _crop_support(table, np.abs(table), abs(table[cx, cy]) + 1.0)


def log_table(h, shape):
    """Offset table of ``-ln(r/2) - gamma`` with the corrected origin entry."""
    r = _offset_radius(shape, h)
    cx, cy = shape[0] - 1, shape[1] - 1
    r[cx, cy] = 1.0
    table = -np.log(0.5 * r) - EULER_GAMMA
    table[cx, cy] = log_diagonal(h)
    return table


def regular_k0_table(k, h, shape):
    """Offset table of ``K0(k r) + ln k`` (the log-regularised resolvent kernel)."""
    r = _offset_radius(shape, h)
    cx, cy = shape[0] - 1, shape[1] - 1
    r[cx, cy] = 1.0
    table = -np.log(0.5 * r) - EULER_GAMMA + k0_log_remainder(k * r)
    table[cx, cy] = regular_k0_diagonal(k, h)
    return table


class Convolver:
    """Repeated discrete convolutions ``h^2 sum_q T(p - q) phi(q)`` on one grid.

    The kernel FFT is computed once; :meth:`apply` accepts arrays whose last
    two axes match ``shape`` and convolves each slice.
    """

    def __init__(self, table, shape, h):
        self.shape = tuple(shape)
        self.h = float(h)
        self.table = np.asarray(table, dtype=float)
        tx, ty = self.table.shape
        self._pad = (sfft.next_fast_len(shape[0] + tx - 1, real=True),
                     sfft.next_fast_len(shape[1] + ty - 1, real=True))
        self._off = ((tx - 1) // 2, (ty - 1) // 2)
        self._kernel_hat = sfft.rfft2(self.table, s=self._pad)

    def apply(self, phi):
        phi = np.asarray(phi, dtype=float)
        spec = sfft.rfft2(phi, s=self._pad, axes=(-2, -1))
        full = sfft.irfft2(spec * self._kernel_hat, s=self._pad, axes=(-2, -1))
        ox, oy = self._off
        nx, ny = self.shape
        return self.h ** 2 * full[..., ox:ox + nx, oy:oy + ny]

    def quadratic_form(self, phi, psi=None):
        """Return ``h^4 sum_pq phi_p T(p-q) psi_q``."""
        psi = phi if psi is None else psi
        return self.h ** 2 * float(np.sum(phi * self.apply(psi)))


def dense_matrix(table, shape, h):
    """Dense matrix ``h^2 T(p - q)`` over row-major node indices (small grids)."""
    nx, ny = shape
    tx, ty = table.shape
    cx, cy = (tx - 1) // 2, (ty - 1) // 2
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    i = i.ravel()
    j = j.ravel()
    di = i[:, None] - i[None, :]
    dj = j[:, None] - j[None, :]
    inside = (np.abs(di) <= cx) & (np.abs(dj) <= cy)
    out = np.zeros(di.shape)
    out[inside] = table[(di + cx)[inside], (dj + cy)[inside]]
    return h ** 2 * out
