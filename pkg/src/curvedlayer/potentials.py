"""Potentials ``V(x, u)`` on the planar layer and their transverse projections."""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .grid import Grid2D


@dataclass
class PotentialSpec:
    """A potential ``V(x1, x2, u)``.

    Parameters
    ----------
    func : callable
        ``func(X, Y, U)`` evaluated on broadcastable arrays.
    delta : float
        Declared decay exponent, used only to report the error order.
    bounded : bool
        Whether ``V`` is essentially bounded.
    name : str
    """

    func: object
    delta: float = 2.0
    bounded: bool = True
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __call__(self, X, Y, U):
        return self.func(X, Y, U)


def gaussian_well(a, depth=1.0, width=1.0, tilt=0.0):
    """``-depth exp(-|x|^2 / 2 width^2) (1 + tilt u / a)``; attractive for ``|tilt| < 1``."""
    if width <= 0:
        raise ValueError("width must be > 0")

    def func(X, Y, U):
        return -depth * np.exp(-(X * X + Y * Y) / (2.0 * width ** 2)) * (1.0 + tilt * U / a)

    return PotentialSpec(func, 2.0, True, "gaussian_well",
                         {"depth": depth, "width": width, "tilt": tilt})


def compact_bump(a, height=1.0, radius=2.0):
    """``height (1 - |x|^2/radius^2)^3`` inside the disc, zero outside; repulsive for height > 0."""
    if radius <= 0:
        raise ValueError("radius must be > 0")

    def func(X, Y, U):
        s = np.clip(1.0 - (X * X + Y * Y) / radius ** 2, 0.0, None)
        return height * s ** 3 * np.ones_like(U)

    return PotentialSpec(func, 4.0, True, "compact_bump", {"height": height, "radius": radius})


def dipole_uv(a, amplitude=1.0, width=1.0):
    """``amplitude exp(-|x|^2 / 2 width^2) u / a``: odd in ``u`` so ``V_11 = 0``."""
    if width <= 0:
        raise ValueError("width must be > 0")

    def func(X, Y, U):
        return amplitude * np.exp(-(X * X + Y * Y) / (2.0 * width ** 2)) * U / a

    return PotentialSpec(func, 2.0, True, "dipole_uv", {"amplitude": amplitude, "width": width})


POTENTIALS = {
    "gaussian_well": gaussian_well,
    "compact_bump": compact_bump,
    "dipole_uv": dipole_uv,
}


def make_potential(name, a, **params):
    try:
        factory = POTENTIALS[name]
    except KeyError:
        raise ValueError(f"unknown potential {name!r}; known: {sorted(POTENTIALS)}") from None
    return factory(a, **params)


@dataclass
class ModeProjectedPotential:
    """Fields ``V[j, j', :, :]`` (0-based mode indices) on a common grid."""

    grid: Grid2D
    basis: object
    V: np.ndarray = field(repr=False)

    @property
    def N(self):
        return self.V.shape[0]

    @property
    def V11(self):
        return self.V[0, 0]

    @property
    def is_symmetric(self):
        return bool(np.array_equal(self.V, np.swapaxes(self.V, 0, 1)))

    def truncate(self, N):
        if N > self.N:
            raise ValueError(f"only {self.N} modes available")
        basis = self.basis
        if basis is not None and basis.N != N:
            from .transverse import build_basis
            basis = build_basis(basis.a, N)
        return ModeProjectedPotential(self.grid, basis, self.V[:N, :N].copy())

    def scaled(self, c):
        return ModeProjectedPotential(self.grid, self.basis, c * self.V)

    def boundary_diagnostic(self):
        return self.grid.ring_max(self.V)

    def sample(self, x, y):
        """Bilinear values at the tensor mesh ``x`` by ``y``; zero outside the grid."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros((self.N, self.N, x.size, y.size))
        ix = (x >= self.grid.x[0]) & (x <= self.grid.x[-1])
        iy = (y >= self.grid.y[0]) & (y <= self.grid.y[-1])
        if not ix.any() or not iy.any():
            return out
        X, Y = np.meshgrid(x[ix], y[iy], indexing="ij")
        pts = np.stack([X, Y], axis=-1)
        sub = np.ix_(ix, iy)
        for j in range(self.N):
            for k in range(j, self.N):
                f = RegularGridInterpolator((self.grid.x, self.grid.y), self.V[j, k],
                                            bounds_error=False, fill_value=0.0)
                vals = f(pts)
                out[j, k][sub] = vals
                if k != j:
                    out[k, j][sub] = vals
        return out


def project_potential(spec, basis, grid, nu=None):
    """Transverse projections ``V_jj'(x) = int chi_j V(x, u) chi_j' du``.

    Gauss-Legendre quadrature with ``nu >= 2N`` nodes (default ``2N + 8``).
    ``spec`` may also be an array of samples on ``grid x nodes`` where the
    nodes are the Gauss-Legendre points of order ``nu``.
    """
    N = basis.N
    nu = 2 * N + 8 if nu is None else int(nu)
    if nu < 2 * N:
        raise ValueError("transverse quadrature order must be >= 2N")
    u, wu = basis.gauss_nodes(nu)
    chi = basis.chi_matrix(u)
    if callable(spec):
        X, Y = grid.mesh()
        samples = spec(X[..., None], Y[..., None], u[None, None, :])
    else:
        samples = np.asarray(spec, dtype=float)
        if samples.shape != grid.shape + (nu,):
            raise ValueError("sampled potential does not match grid x quadrature nodes")
    if not np.all(np.isfinite(samples)):
        raise ValueError("potential has non-finite values")
    weighted = chi * wu[None, :]
    V = np.einsum("jk,xyk,lk->jlxy", weighted, samples, chi, optimize=True)
    V = 0.5 * (V + np.swapaxes(V, 0, 1))
    return ModeProjectedPotential(grid, basis, V)


def project_samples(samples, u_nodes, u_weights, basis):
    """Project samples taken at arbitrary transverse nodes (last axis)."""
    chi = basis.chi_matrix(u_nodes)
    V = np.einsum("jk,xyk,lk->jlxy", chi * u_weights[None, :], samples, chi, optimize=True)
    return 0.5 * (V + np.swapaxes(V, 0, 1))
