"""Analytic Monge-patch profiles with exact partial derivatives up to order four.

Every profile is a finite sum of separable terms ``c * P(x) * Q(y)``, so a
mixed derivative ``f_{,1^m 2^n}`` is ``c * P^(m)(x) * Q^(n)(y)``.  The 1D
factors return all derivatives 0..4 at once.
"""

import math

import numpy as np

MAX_ORDER = 4


def _gauss_factor(s):
    """Derivatives of ``exp(-t^2 / (2 s^2))`` via probabilists' Hermite polynomials."""
    def factor(t):
        z = np.asarray(t, dtype=float) / s
        e = np.exp(-0.5 * z * z)
        he = [np.ones_like(z), z, z * z - 1.0, z ** 3 - 3.0 * z, z ** 4 - 6.0 * z * z + 3.0]
        return [(-1.0 / s) ** n * he[n] * e for n in range(MAX_ORDER + 1)]
    return factor


def _sin_gauss_factor(k, s):
    """Derivatives of ``sin(k t) exp(-t^2 / (2 s^2))`` by the Leibniz rule."""
    g = _gauss_factor(s)

    def factor(t):
        t = np.asarray(t, dtype=float)
        gd = g(t)
        sd = [np.sin(k * t), k * np.cos(k * t), -k * k * np.sin(k * t),
              -k ** 3 * np.cos(k * t), k ** 4 * np.sin(k * t)]
        return [sum(math.comb(n, i) * sd[i] * gd[n - i] for i in range(n + 1))
                for n in range(MAX_ORDER + 1)]
    return factor


def _poly_factor(coeffs):
    """Derivatives of a polynomial with ascending coefficients."""
    p = np.polynomial.Polynomial(coeffs)

    def factor(t):
        t = np.asarray(t, dtype=float)
        return [p.deriv(n)(t) * np.ones_like(t) if n else p(t) * np.ones_like(t)
                for n in range(MAX_ORDER + 1)]
    return factor


class SeparableSurface:
    """Profile ``f(x, y) = sum_k c_k P_k(x) Q_k(y)``.

    Parameters
    ----------
    name : str
    terms : list of (float, callable, callable)
        Coefficient and the two 1D derivative factories.
    decaying : bool
        Whether ``f`` and its derivatives decay at infinity.
    """

    def __init__(self, name, terms, decaying=True, params=None):
        self.name = name
        self.terms = list(terms)
        self.decaying = decaying
        self.params = dict(params or {})

    def derivative(self, m, n, x, y):
        """``d^{m+n} f / dx^m dy^n`` on the tensor mesh of 1D arrays ``x``, ``y``."""
        if m + n > MAX_ORDER:
            raise ValueError("derivatives above order four are not available")
        out = 0.0
        for c, px, qy in self.terms:
            out = out + c * np.outer(px(x)[m], qy(y)[n])
        return out * np.ones((len(x), len(y)))

    def __call__(self, x, y):
        return self.derivative(0, 0, x, y)


def gaussian_bump(amplitude=1.0, width=1.0, width2=None):
    """``A exp(-x^2/(2 s1^2) - y^2/(2 s2^2))``; isotropic when ``width2`` is None."""
    s1 = float(width)
    s2 = float(width if width2 is None else width2)
    if s1 <= 0 or s2 <= 0:
        raise ValueError("gaussian_bump widths must be > 0")
    return SeparableSurface("gaussian_bump",
                            [(float(amplitude), _gauss_factor(s1), _gauss_factor(s2))],
                            params={"amplitude": amplitude, "width": s1, "width2": s2})


def parabolic_cylinder(curvature=1.0):
    """``c x^2 / 2``; constant curvature along x, no decay (geometry checks only)."""
    c = float(curvature)
    return SeparableSurface("parabolic_cylinder",
                            [(c, _poly_factor([0.0, 0.0, 0.5]), _poly_factor([1.0]))],
                            decaying=False, params={"curvature": c})


def ripple(amplitude=1.0, wavenumber=1.0, width=2.0):
    """``A sin(k x) exp(-|x|^2 / (2 w^2))``: an odd, decaying corrugation."""
    w = float(width)
    if w <= 0:
        raise ValueError("ripple width must be > 0")
    return SeparableSurface("ripple",
                            [(float(amplitude), _sin_gauss_factor(float(wavenumber), w),
                              _gauss_factor(w))],
                            params={"amplitude": amplitude, "wavenumber": wavenumber,
                                    "width": w})


def plane(slope_x=0.0, slope_y=0.0):
    """Linear profile ``p x + q y``: zero curvature everywhere."""
    one = _poly_factor([1.0])
    lin = _poly_factor([0.0, 1.0])
    return SeparableSurface("plane", [(float(slope_x), lin, one), (float(slope_y), one, lin)],
                            params={"slope_x": slope_x, "slope_y": slope_y})


SURFACES = {
    "gaussian_bump": gaussian_bump,
    "parabolic_cylinder": parabolic_cylinder,
    "ripple": ripple,
    "plane": plane,
}


def make_surface(name, **params):
    try:
        factory = SURFACES[name]
    except KeyError:
        raise ValueError(f"unknown surface {name!r}; known: {sorted(SURFACES)}") from None
    return factory(**params)
