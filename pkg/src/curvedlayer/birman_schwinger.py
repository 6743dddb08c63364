r"""Birman-Schwinger solvers for ``H = -Delta - d_u^2 + lambda V`` on the planar layer.

Everything is written in transverse-mode space.  With ``s = k_1^2`` and
``k_j^2 = kappa_j^2 - kappa_1^2 + s`` the free resolvent acts on mode ``j``
as the convolution :math:`C_j = (2\pi)^{-1}K_0(k_j|x-x'|)`.  Mode one splits
into a rank-one singular piece and a regular remainder,

.. math::
    C_1 = -\frac{\ln k_1}{2\pi}\,|1\rangle\langle 1|
          + \frac{1}{2\pi}\big[K_0(k_1|x-x'|) + \ln k_1\big],

so that with ``w = 1 / ln k_1`` the eigenvalue condition reduces to the
scalar fixed-point problem

.. math::
    w = F(\lambda, w) = \frac{\lambda}{2\pi}\,\langle 1, \psi_1\rangle,
    \qquad (I + \lambda V M_w)\psi = V e_1,

where ``M_w`` is the regular part (mode one) plus ``C_j`` for ``j >= 2`` and
``(V e_1)_j = V_{j1}``.  This is the push-through form of the symmetric
``(V^{1/2}\chi_1, (I + \lambda M)^{-1}|V|^{1/2}\chi_1)``.  Grid nodes are
collocation points with weight ``h^2``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.sparse.linalg import LinearOperator, eigs, eigsh, gmres

from .asymptotics import NoBoundState
from .kernels import Convolver, dense_matrix, k0_table, regular_k0_table

_TWO_PI = 2.0 * math.pi
_LOG_GAP_FLOOR = -30.0


def _node_sqrt_factors(V):
    """Per-node ``|V|^{1/2}`` and ``V^{1/2} = sgn(V)|V|^{1/2}`` for symmetric matrix fields.

    ``V`` has shape ``(N, N, nx, ny)``; results have the same shape.
    """
    N = V.shape[0]
    mats = np.moveaxis(V.reshape(N, N, -1), 2, 0)
    lam, U = np.linalg.eigh(mats)
    root = np.sqrt(np.abs(lam))
    left = np.einsum("pik,pk,pjk->pij", U, root, U)
    right = np.einsum("pik,pk,pjk->pij", U, np.sign(lam) * root, U)
    shape = V.shape
    return (np.moveaxis(left, 0, 2).reshape(shape), np.moveaxis(right, 0, 2).reshape(shape),
            lam)


class BSOperator:
    """Matrix-free mode-space pieces of the Birman-Schwinger operator.

    Parameters
    ----------
    proj : ModeProjectedPotential
        Projected potential on a square-spacing grid.
    N : int, optional
        Number of transverse modes (default: all in ``proj``).
    """

    def __init__(self, proj, N=None):
        grid = proj.grid
        if not grid.is_square_spacing:
            raise ValueError("Birman-Schwinger grid needs hx == hy")
        self.N = proj.N if N is None else int(N)
        if self.N > proj.N:
            raise ValueError("more modes requested than projected")
        self.grid = grid
        self.h = grid.hx
        self.basis = proj.basis
        self.V = proj.V[:self.N, :self.N]
        self.kappa = self.basis.kappa[:self.N]
        self._cache = {}
        self._sqrt = None

    @property
    def shape(self):
        return (self.N,) + self.grid.shape

    @property
    def size(self):
        return self.N * self.grid.size

    def sqrt_factors(self):
        if self._sqrt is None:
            self._sqrt = _node_sqrt_factors(self.V)
        return self._sqrt

    @property
    def sign_definite(self):
        """``-1`` if every ``V(x)`` is negative semidefinite, ``+1`` if positive, else 0."""
        lam = self.sqrt_factors()[2]
        tol = 1e-14 * max(1.0, float(np.max(np.abs(lam))))
        if np.all(lam <= tol):
            return -1
        if np.all(lam >= -tol):
            return 1
        return 0

    def k_modes(self, s):
        return np.sqrt(self.kappa ** 2 - self.kappa[0] ** 2 + s)

    def _convolvers(self, s, full_first):
        key = (float(s), bool(full_first))
        if key not in self._cache:
            if len(self._cache) > 4:
                self._cache.clear()
            k = self.k_modes(s)
            shape, h = self.grid.shape, self.h
            if full_first:
                first = k0_table(k[0], h, shape)
            else:
                first = regular_k0_table(k[0], h, shape)
            tables = [first] + [k0_table(kj, h, shape) for kj in k[1:]]
            self._cache[key] = [Convolver(t, shape, h) for t in tables]
        return self._cache[key]

    def apply_kernel(self, psi, s, full_first=False):
        """``M_s psi`` (regular mode one) or ``R0 psi`` when ``full_first``."""
        convs = self._convolvers(s, full_first)
        out = np.empty_like(psi)
        for j, c in enumerate(convs):
            out[j] = c.apply(psi[j]) / _TWO_PI
        return out

    def apply_V(self, phi, V=None):
        V = self.V if V is None else V
        return np.einsum("jkxy,kxy->jxy", V, phi)

    def integral(self, phi):
        return self.h ** 2 * float(np.sum(phi))


@dataclass
class BSResult:
    """Outcome of a Birman-Schwinger solve (``log_gap = 2 / w_star``)."""

    w_star: float
    alpha_star: float
    E: float
    log_gap: float
    iterations: int
    residual: float
    contraction: float
    history: list = field(default_factory=list)
    method: str = ""


def _energy(w, kappa1):
    lg = 2.0 / w
    gap = math.exp(lg) if lg > -745 else 0.0
    E = kappa1 ** 2 - gap
    return E, math.sqrt(max(E, 0.0)), lg


def implicit_F(op, lam, w, psi0=None, tol=1e-13):
    """Evaluate ``F(lambda, w)`` and return ``(F, psi)``."""
    if not w < 0:
        raise NoBoundState("w must be negative")
    s = math.exp(2.0 / w) if 2.0 / w > -745 else 0.0
    shape = op.shape
    rhs = op.V[:, 0]

    def mv(x):
        psi = x.reshape(shape)
        return (psi + lam * op.apply_V(op.apply_kernel(psi, s))).ravel()

    A = LinearOperator((op.size, op.size), matvec=mv, dtype=float)
    x0 = None if psi0 is None else psi0.ravel()
    sol, info = gmres(A, rhs.ravel(), x0=x0, rtol=tol, atol=0.0, restart=60, maxiter=200)
    if info != 0:
        raise RuntimeError(f"linear solve (I + lambda V M) did not converge (info={info})")
    psi = sol.reshape(shape)
    return lam / _TWO_PI * op.integral(psi[0]), psi


def solve_implicit(lam, proj, N=None, tol=1e-12, maxit=200, w0=None, op=None):
    """Fixed-point iteration ``w <- F(lambda, w)``.

    The start is ``w0 = (lambda / 2 pi) int V11`` unless given.  When that
    first-order value vanishes (zero-mean ``V11``) the two-term expansion is
    used as the start instead.

    Raises
    ------
    NoBoundState
        When an iterate is ``>= 0``.
    RuntimeError
        Without convergence in ``maxit`` iterations.
    """
    if not lam > 0:
        raise ValueError("lambda must be > 0")
    op = BSOperator(proj, N) if op is None else op
    V11 = op.V[0, 0]
    scale = max(op.integral(np.abs(op.V[j, k])) for j in range(op.N) for k in range(op.N)) + 1e-300
    if w0 is None:
        w0 = lam / _TWO_PI * op.integral(V11)
        if abs(w0) <= 1e-12 * lam * scale:
            from .planar import expansion_w
            w0 = expansion_w(lam, proj, N=op.N).w
    w = float(w0)
    history = []
    psi = None
    prev_step = None
    for it in range(1, maxit + 1):
        if not w < 0:
            raise NoBoundState(f"no bound state detected: iterate w = {w:.3e} >= 0")
        Fw, psi = implicit_F(op, lam, w, psi)
        step = abs(Fw - w)
        ratio = step / prev_step if prev_step else float("nan")
        history.append((it, w, Fw, step, ratio))
        prev_step = step
        if step < tol * abs(w):
            w = Fw
            break
        w = Fw
    else:
        raise RuntimeError(f"fixed point did not converge in {maxit} iterations")
    if not w < 0:
        raise NoBoundState(f"no bound state detected: w = {w:.3e}")
    dw = 1e-4 * abs(w)
    fp, _ = implicit_F(op, lam, w + dw, psi)
    fm, _ = implicit_F(op, lam, w - dw, psi)
    contraction = abs(fp - fm) / (2 * dw)
    Ff, _ = implicit_F(op, lam, w, psi)
    E, alpha, lg = _energy(w, op.kappa[0])
    return BSResult(w, alpha, E, lg, len(history), abs(Ff - w), contraction, history,
                    "implicit")


def lowest_bs_eigenvalue(op, s, v0=None, tol=1e-13):
    """Most negative eigenvalue ``mu(s)`` of ``|V|^{1/2} R0 V^{1/2}`` and its vector."""
    left, right, _ = op.sqrt_factors()
    shape = op.shape
    sign = op.sign_definite

    def mv(x):
        phi = x.reshape(shape)
        return op.apply_V(op.apply_kernel(op.apply_V(phi, right), s, True), left).ravel()

    A = LinearOperator((op.size, op.size), matvec=mv, dtype=float)
    if sign != 0:
        # one-signed V: the kernel is +-(W R0 W), symmetric
        vals, vecs = eigsh(A, k=1, which="SA", v0=v0, tol=tol)
        return float(vals[0]), vecs[:, 0]
    vals, vecs = eigs(A, k=1, which="SR", v0=v0, tol=tol)
    return float(vals[0].real), vecs[:, 0].real


def bs_eigen_rootfind(lam, proj, N=None, xtol=1e-15, log_gap_floor=_LOG_GAP_FLOOR, op=None):
    """Solve ``lambda mu(s) + 1 = 0`` for ``s = k1^2`` in ``(e^floor, kappa_1^2)``."""
    if not lam > 0:
        raise ValueError("lambda must be > 0")
    op = BSOperator(proj, N) if op is None else op
    k1sq = float(op.kappa[0] ** 2)
    if op.sign_definite > 0:
        raise NoBoundState("no bound state: V is pointwise positive semidefinite")
    # fixed start vector keeps ARPACK deterministic
    state = {"v0": np.full(op.size, 1.0 / math.sqrt(op.size)), "n": 0}

    def g(s):
        mu, vec = lowest_bs_eigenvalue(op, s, state["v0"])
        state["v0"] = vec
        state["n"] += 1
        return lam * mu + 1.0

    s_lo = math.exp(log_gap_floor)
    g_lo = g(s_lo)
    if g_lo >= 0:
        raise NoBoundState("no bound state in the resolvable range (log gap > "
                           f"{log_gap_floor:g} required)")
    g_hi = g(k1sq)
    if g_hi <= 0:
        raise RuntimeError("eigenvalue below zero energy: outside the weak-coupling regime")
    s_star = brentq(g, s_lo, k1sq, xtol=xtol * k1sq, rtol=4 * np.finfo(float).eps)
    w = 2.0 / math.log(s_star)
    E = k1sq - s_star
    res = abs(g(s_star))
    return BSResult(w, math.sqrt(max(E, 0.0)), E, math.log(s_star), state["n"], res,
                    float("nan"), [], "eigen")


# ------------------------------------------------------------ dense assembly

@dataclass
class BSKernelSet:
    """Dense ``L``, ``A``, ``B`` sandwiched by ``|V|^{1/2}`` and ``V^{1/2}``.

    Unknowns are ordered mode-major: index ``j * n_nodes + p``.
    """

    w: float
    s: float
    L: np.ndarray
    A: np.ndarray
    B: np.ndarray
    left: np.ndarray
    right: np.ndarray

    @property
    def M(self):
        return self.A + self.B

    @property
    def K(self):
        return self.L + self.A + self.B


def _node_blocks(F):
    """Expand a ``(N, N, nx, ny)`` field to a dense block matrix with diagonal blocks."""
    N = F.shape[0]
    n = F.shape[2] * F.shape[3]
    out = np.zeros((N * n, N * n))
    idx = np.arange(n)
    flat = F.reshape(N, N, n)
    for j in range(N):
        for k in range(N):
            out[j * n + idx, k * n + idx] = flat[j, k]
    return out


def assemble_M(w, proj, N=None):
    """Dense Birman-Schwinger pieces at ``k_1 = e^{1/w}`` (small grids only)."""
    if not w < 0:
        raise ValueError("assembly needs w < 0")
    op = BSOperator(proj, N)
    grid, h = op.grid, op.h
    n = grid.size
    if op.size > 6000:
        raise MemoryError(f"dense assembly of size {op.size} refused; use the operator form")
    s = math.exp(2.0 / w) if 2.0 / w > -745 else 0.0
    k = op.k_modes(s)
    left, right, _ = op.sqrt_factors()
    Lb = np.zeros((op.size, op.size))
    Ab = np.zeros_like(Lb)
    Bb = np.zeros_like(Lb)
    ln_k1 = 1.0 / w
    Lb[:n, :n] = -ln_k1 / _TWO_PI * h * h
    Ab[:n, :n] = dense_matrix(regular_k0_table(k[0], h, grid.shape), grid.shape, h) / _TWO_PI
    for j in range(1, op.N):
        sl = slice(j * n, (j + 1) * n)
        Bb[sl, sl] = dense_matrix(k0_table(k[j], h, grid.shape), grid.shape, h) / _TWO_PI
    Lm, Rm = _node_blocks(left), _node_blocks(right)
    return BSKernelSet(w, s, Lm @ Lb @ Rm, Lm @ Ab @ Rm, Lm @ Bb @ Rm, Lm, Rm)


def direct_bs_matrix(w, proj, N=None):
    """Dense ``|V|^{1/2} R0 V^{1/2}`` built from full ``K0`` kernels in every mode."""
    op = BSOperator(proj, N)
    grid, h = op.grid, op.h
    n = grid.size
    s = math.exp(2.0 / w)
    k = op.k_modes(s)
    R = np.zeros((op.size, op.size))
    for j in range(op.N):
        sl = slice(j * n, (j + 1) * n)
        R[sl, sl] = dense_matrix(k0_table(k[j], h, grid.shape), grid.shape, h) / _TWO_PI
    left, right, _ = op.sqrt_factors()
    return _node_blocks(left) @ R @ _node_blocks(right)

