"""Dirichlet eigenbasis of the interval (-a, a) and its dipole overlaps.

The modes are ``chi_j(u) = a^{-1/2} sin(j pi (u + a) / (2a))`` with
eigenvalues ``kappa_j^2 = (j pi / 2a)^2``.  The overlaps
``T_j = (chi_1, u chi_j)`` have the closed form

    T_j = -(16 a / pi^2) j / (j^2 - 1)^2   for even j,
    T_j = 0                                for odd j,

obtained by writing ``u = v - a`` with ``v`` in ``(0, 2a)`` and integrating
``v sin(pi v / 2a) sin(j pi v / 2a)`` by parts.  The closed form is checked
against Gauss-Legendre quadrature every time a basis is built.
"""

from dataclasses import dataclass, field

import numpy as np

DEFAULT_MODES = 64
_CHECK_TOL = 1e-12


def _closed_form_overlaps(a, n):
    j = np.arange(1, n + 1, dtype=float)
    t = np.zeros(n)
    even = (np.arange(1, n + 1) % 2) == 0
    je = j[even]
    t[even] = -(16.0 * a / np.pi ** 2) * je / (je * je - 1.0) ** 2
    return t


@dataclass(frozen=True)
class TransverseBasis:
    """Interval Dirichlet basis truncated at ``N`` modes.

    Attributes
    ----------
    a : float
        Half-width of the interval.
    N : int
        Number of modes kept.
    kappa : ndarray
        ``kappa[j-1] = j pi / (2a)``.
    T : ndarray
        ``T[j-1] = (chi_1, u chi_j)``.
    """

    a: float
    N: int
    kappa: np.ndarray = field(repr=False)
    T: np.ndarray = field(repr=False)

    @property
    def d(self):
        return 2.0 * self.a

    @property
    def kappa1(self):
        return float(self.kappa[0])

    @property
    def k_higher(self):
        """``k_j = sqrt(kappa_j^2 - kappa_1^2)`` for j = 1..N (zero for j = 1)."""
        return np.sqrt(self.kappa ** 2 - self.kappa[0] ** 2)

    @property
    def u_moment(self):
        """Exact ``||u chi_1||^2 = (pi^2 - 6) / (12 kappa_1^2)``."""
        return (np.pi ** 2 - 6.0) / (12.0 * self.kappa1 ** 2)

    def chi(self, j, u):
        """Evaluate mode ``j`` (1-based) at points ``u``."""
        u = np.asarray(u, dtype=float)
        return np.sin(j * np.pi * (u + self.a) / (2.0 * self.a)) / np.sqrt(self.a)

    def chi_matrix(self, u):
        """Array of shape ``(N, len(u))`` with ``chi_j(u_k)``."""
        j = np.arange(1, self.N + 1)[:, None]
        u = np.asarray(u, dtype=float)[None, :]
        return np.sin(j * np.pi * (u + self.a) / (2.0 * self.a)) / np.sqrt(self.a)

    def gauss_nodes(self, nu):
        """Gauss-Legendre nodes and weights on (-a, a)."""
        x, w = np.polynomial.legendre.leggauss(int(nu))
        return self.a * x, self.a * w


def build_basis(a, N=DEFAULT_MODES):
    """Build the truncated basis and verify the overlap closed form.

    Raises
    ------
    ValueError
        For ``a <= 0`` or ``N < 2``.
    RuntimeError
        If the closed-form overlaps disagree with quadrature beyond 1e-12.
    """
    a = float(a)
    N = int(N)
    if not a > 0.0 or not np.isfinite(a):
        raise ValueError("half-width a must be > 0")
    if N < 2:
        raise ValueError("mode cutoff N must be >= 2")
    kappa = np.arange(1, N + 1) * np.pi / (2.0 * a)
    basis = TransverseBasis(a=a, N=N, kappa=kappa, T=_closed_form_overlaps(a, N))
    _verify_overlaps(basis)
    return basis


def _verify_overlaps(basis):
    u, w = basis.gauss_nodes(basis.N + 40)
    chi = basis.chi_matrix(u)
    quad = (chi * (w * u * chi[0])).sum(axis=1)
    err = np.max(np.abs(quad - basis.T))
    if err > _CHECK_TOL * max(1.0, basis.a):
        raise RuntimeError(f"overlap closed form failed quadrature check ({err:.2e})")


@dataclass(frozen=True)
class OverlapSums:
    S0: float
    S2: float
    S0_target: float
    S2_target: float = 1.0

    @property
    def S0_deficit(self):
        return self.S0_target - self.S0

    @property
    def S2_deficit(self):
        return self.S2_target - self.S2


def overlap_sums(basis):
    """Partial sums ``S0 = sum_{j>=2} T_j^2`` and ``S2 = sum_{j>=2} T_j^2 k_j^2``.

    The targets are ``||u chi_1||^2 - T_1^2`` and ``1``; their differences to
    the partial sums are the truncation deficits.
    """
    t2 = basis.T[1:] ** 2
    k2 = basis.kappa[1:] ** 2 - basis.kappa[0] ** 2
    s0 = float(np.sum(t2))
    s2 = float(np.sum(t2 * k2))
    return OverlapSums(S0=s0, S2=s2, S0_target=basis.u_moment - basis.T[0] ** 2)
