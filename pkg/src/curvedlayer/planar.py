r"""Two-term weak-coupling expansion for ``-Delta - d_u^2 + lambda V`` on the planar layer.

.. math::
    w(\lambda) = \frac{\lambda}{2\pi}\int V_{11}
      + \Big(\frac{\lambda}{2\pi}\Big)^2\Big[
        \iint V_{11}(x)\big(\gamma_E + \ln\tfrac{|x-x'|}{2}\big)V_{11}(x')
        - \sum_{j\ge2}\iint V_{1j}(x) K_0(k_j|x-x'|) V_{j1}(x')\Big]

with :math:`k_j = \sqrt{\kappa_j^2 - \kappa_1^2}`; the bound state has energy
:math:`\kappa_1^2 - e^{2/w}`.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import Convolver, k0_table, log_table
from .asymptotics import fourier_power

_TWO_PI = 2.0 * math.pi
DIRECT_MAX_NODES = 64 * 64
_CHUNK = 256
_MIN_MODES = 8
_STOP_REL = 1e-6


def _direct_form(table, phi, psi, h):
    """``h^4 sum_pq phi_p T(p - q) psi_q`` by explicit row blocks."""
    nx, ny = phi.shape
    tx, ty = table.shape
    cx, cy = (tx - 1) // 2, (ty - 1) // 2
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    i, j = i.ravel(), j.ravel()
    a = phi.ravel()
    b = psi.ravel()
    total = 0.0
    for s in range(0, a.size, _CHUNK):
        di = i[s:s + _CHUNK, None] - i[None, :]
        dj = j[s:s + _CHUNK, None] - j[None, :]
        inside = (np.abs(di) <= cx) & (np.abs(dj) <= cy)
        vals = np.where(inside, table[np.clip(di + cx, 0, tx - 1), np.clip(dj + cy, 0, ty - 1)], 0.0)
        total += float(a[s:s + _CHUNK] @ (vals @ b))
    return h ** 4 * total


def double_integral(grid, table, phi, psi=None, method="auto"):
    """Quadrature of ``iint phi(x) T(x - x') psi(x')`` with an offset table.

    ``method`` is ``"direct"`` (explicit double sum), ``"fft"`` or ``"auto"``
    (direct up to 64 x 64 nodes).
    """
    if not grid.is_square_spacing:
        raise ValueError("double integrals need hx == hy")
    psi = phi if psi is None else psi
    if method == "auto":
        method = "direct" if grid.size <= DIRECT_MAX_NODES else "fft"
    if method == "direct":
        return _direct_form(table, np.asarray(phi, float), np.asarray(psi, float), grid.hx)
    if method == "fft":
        return Convolver(table, grid.shape, grid.hx).quadratic_form(phi, psi)
    raise ValueError(f"unknown method {method!r}")


def log_form(grid, v, method="auto"):
    """``iint v(x) (-ln(|x-x'|/2) - gamma) v(x')``."""
    return double_integral(grid, log_table(grid.hx, grid.shape), v, method=method)


def k0_form(grid, v, k, method="auto"):
    """``iint v(x) K0(k |x-x'|) v(x')``."""
    return double_integral(grid, k0_table(k, grid.hx, grid.shape), v, method=method)


def fourier_mode_term(grid, v, k, pad=2):
    r"""``(2 pi)^2 int |hat v|^2 / (|omega|^2 + k^2) d omega``, equal to ``iint v K0 v``."""
    if not k > 0:
        raise ValueError("k must be > 0")
    power, om2, dom = fourier_power(grid, v, pad)
    return _TWO_PI ** 2 * dom * float(np.sum(power / (om2 + k * k)))


@dataclass
class ExpansionResult:
    """Two-term expansion value and its pieces.

    ``w = first + second`` where ``second = (lambda/2pi)^2 (log_term - mode_sum)``.
    """

    w: float
    first: float
    second: float
    log_term: float
    mode_terms: list = field(default_factory=list)
    mean: float = 0.0
    bound_state: bool = True
    verdict: str = ""
    modes_used: int = 0


def expansion_w(lam, proj, N=None, method="auto"):
    """Evaluate the weak-coupling expansion and the existence verdict.

    Parameters
    ----------
    lam : float
        Coupling constant (> 0).
    proj : ModeProjectedPotential
    N : int, optional
        Use exactly the modes ``2..N``.  By default the sum stops once two
        consecutive terms fall below ``1e-6`` of the running sum with at
        least 8 modes, or when the projected modes run out.
    """
    if not lam > 0:
        raise ValueError("lambda must be > 0")
    grid = proj.grid
    basis = proj.basis
    V11 = proj.V11
    mean = float(grid.integrate(V11))
    first = lam / _TWO_PI * mean
    # iint V11 (gamma + ln(r/2)) V11 is minus the log-kernel form
    log_term = -log_form(grid, V11, method)
    k = basis.k_higher
    nmax = proj.N if N is None else int(N)
    if nmax > proj.N:
        raise ValueError(f"requested {nmax} modes, projection has {proj.N}")
    terms = []
    running = 0.0
    for j in range(2, nmax + 1):
        v = proj.V[0, j - 1]
        t = k0_form(grid, v, float(k[j - 1]), method) if np.any(v) else 0.0
        terms.append((j, t))
        running += t
        if N is None and j >= _MIN_MODES and len(terms) >= 2:
            if all(abs(tt) <= _STOP_REL * abs(running) for _, tt in terms[-2:]):
                break
    mode_sum = sum(t for _, t in terms)
    second = (lam / _TWO_PI) ** 2 * (log_term - mode_sum)
    w = first + second
    # zero-mean V11 is only zero up to rounding, so measure against all of V
    scale = float(np.max(grid.integrate(np.abs(proj.V)))) + 1e-300
    if mean > 1e-12 * scale:
        ok, verdict = False, "no weak-coupling bound state (repulsive in the mean)"
    elif not np.any(proj.V):
        ok, verdict = False, "no bound state (V vanishes)"
    else:
        ok = w < 0
        verdict = "bound state" if ok else "no bound state at this order"
    return ExpansionResult(w, first, second, log_term, terms, mean, ok, verdict,
                           len(terms) + 1)
