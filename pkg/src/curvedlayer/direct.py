r"""Direct eigensolver for ``-Delta - d_u^2 + lambda V`` in transverse-mode space.

The planar directions are discretised on a Dirichlet box ``[-L, L]^2``.  On
a uniform mesh this is the 5-point Laplacian; on a stretched mesh (uniform
core, geometrically growing cells outside) it is the P1 stiffness matrix
with lumped mass, symmetrised as ``S = M^{-1/2} K M^{-1/2}`` so that the 2D
operator stays ``S_x (x) I + I (x) S_y``.  The transverse direction is exact:
mode ``j`` adds ``kappa_j^2`` and the potential couples the modes pointwise
through ``V_jj'(x)``.

Any eigenvalue of the box operator bounds the true ground state from above
(Dirichlet monotonicity plus the variational principle), so a Ritz value
below ``kappa_1^2`` certifies a bound state up to discretisation error.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy import fft as sfft
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import LinearOperator, eigsh, lobpcg

from .potentials import ModeProjectedPotential, PotentialSpec, project_samples

DEFAULT_MEMORY_LIMIT = 3.0e9
_BYTES_PER_UNKNOWN = 8 * 24
_SHIFT_INVERT_MAX = 150_000


class ResourceError(MemoryError):
    """The requested discretisation does not fit the memory budget."""


@dataclass
class Mesh1D:
    """Interior nodes of a Dirichlet mesh on ``[-L, L]`` with boundary nodes excluded."""

    nodes: np.ndarray
    L: float
    uniform: bool
    h: float

    @property
    def n(self):
        return self.nodes.size

    @classmethod
    def uniform_mesh(cls, L, h):
        m = L / h
        if abs(m - round(m)) > 1e-9 * max(1.0, m):
            raise ValueError("L / h must be an integer")
        m = int(round(m))
        return cls(h * np.arange(-m + 1, m), float(L), True, float(h))

    @classmethod
    def stretched_mesh(cls, core, h, L, ratio=1.08):
        """Uniform spacing ``h`` on ``[-core, core]``, cells growing by ``ratio`` up to ``L``."""
        if not (0 < core < L and ratio >= 1.0):
            raise ValueError("need 0 < core < L and ratio >= 1")
        m = int(round(core / h))
        right = list(h * np.arange(1, m + 1))
        step = h
        while right[-1] < L:
            step *= ratio
            right.append(right[-1] + step)
        # snap the outer boundary to L by uniformly compressing the stretched part
        edge = right[m - 1]
        tail = np.array(right[m - 1:])
        tail = edge + (tail - edge) * (L - edge) / (tail[-1] - edge)
        right = np.concatenate([np.array(right[:m - 1]), tail])
        inner = right[:-1]
        nodes = np.concatenate([-inner[::-1], [0.0], inner])
        return cls(nodes, float(L), False, float(h))

    def tridiagonal(self):
        """``(diag, off)`` of the symmetrised stiffness ``M^{-1/2} K M^{-1/2}``."""
        x = np.concatenate([[-self.L], self.nodes, [self.L]])
        d = np.diff(x)
        stiff_diag = 1.0 / d[:-1] + 1.0 / d[1:]
        stiff_off = -1.0 / d[1:-1]
        mass = 0.5 * (d[:-1] + d[1:])
        r = 1.0 / np.sqrt(mass)
        return stiff_diag * r * r, stiff_off * r[:-1] * r[1:]

    def mass(self):
        x = np.concatenate([[-self.L], self.nodes, [self.L]])
        d = np.diff(x)
        return 0.5 * (d[:-1] + d[1:])


@dataclass
class ModeCoupledOperator:
    """``(+)_j (S + kappa_j^2) + lambda V_jj'`` on a tensor mesh."""

    mesh_x: Mesh1D
    mesh_y: Mesh1D
    kappa: np.ndarray
    lam: float
    V: np.ndarray = field(repr=False)
    window: tuple = (slice(None), slice(None))

    @property
    def N(self):
        return self.kappa.size

    @property
    def shape(self):
        return (self.N, self.mesh_x.n, self.mesh_y.n)

    @property
    def size(self):
        return int(np.prod(self.shape))

    def __post_init__(self):
        self._tx = self.mesh_x.tridiagonal()
        self._ty = self.mesh_y.tridiagonal()

    def matvec(self, x):
        psi = x.reshape(self.shape)
        out = self._lap(psi)
        out += (self.kappa ** 2)[:, None, None] * psi
        if self.lam != 0.0:
            wx, wy = self.window
            sub = psi[:, wx, wy]
            out[:, wx, wy] += self.lam * np.einsum("jkxy,kxy->jxy", self.V, sub)
        return out.reshape(x.shape)

    def _lap(self, psi):
        dx, ex = self._tx
        dy, ey = self._ty
        out = dx[None, :, None] * psi + dy[None, None, :] * psi
        out[:, 1:, :] += ex[None, :, None] * psi[:, :-1, :]
        out[:, :-1, :] += ex[None, :, None] * psi[:, 1:, :]
        out[:, :, 1:] += ey[None, None, :] * psi[:, :, :-1]
        out[:, :, :-1] += ey[None, None, :] * psi[:, :, 1:]
        return out

    def linear_operator(self):
        def mv(x):
            x = np.asarray(x)
            if x.ndim == 2:
                return np.column_stack([self.matvec(x[:, k]) for k in range(x.shape[1])])
            return self.matvec(x)
        return LinearOperator((self.size, self.size), matvec=mv, matmat=mv, dtype=float)

    def sparse(self):
        """Explicit sparse matrix (small problems only)."""
        dx, ex = self._tx
        dy, ey = self._ty
        Sx = sp.diags([ex, dx, ex], [-1, 0, 1], format="csr")
        Sy = sp.diags([ey, dy, ey], [-1, 0, 1], format="csr")
        nx, ny = self.mesh_x.n, self.mesh_y.n
        lap = sp.kron(Sx, sp.identity(ny)) + sp.kron(sp.identity(nx), Sy)
        blocks = [[None] * self.N for _ in range(self.N)]
        full = np.zeros((nx, ny))
        for j in range(self.N):
            for k in range(self.N):
                full[:] = 0.0
                wx, wy = self.window
                full[wx, wy] = self.lam * self.V[j, k]
                b = sp.diags(full.ravel())
                if j == k:
                    b = b + lap + self.kappa[j] ** 2 * sp.identity(nx * ny)
                blocks[j][k] = b
        return sp.bmat(blocks, format="csc")

    def lower_bound(self):
        """``kappa_1^2 + lambda min_x eig V(x)``, capped at ``kappa_1^2``.

        The discrete Laplacian is nonnegative, so this bounds the spectrum below.
        """
        k1sq = float(self.kappa[0] ** 2)
        if self.lam == 0.0 or self.V.size == 0:
            return k1sq
        Vx = np.moveaxis(self.V, (0, 1), (-2, -1))
        ev = np.linalg.eigvalsh(0.5 * (Vx + np.swapaxes(Vx, -1, -2)))
        lo = float(np.min(self.lam * ev[..., 0])) if self.lam > 0 else float(np.min(self.lam * ev[..., -1]))
        return k1sq + min(lo, 0.0)

    def is_symmetric(self):
        return bool(np.array_equal(self.V, np.swapaxes(self.V, 0, 1)))


def memory_estimate(n_unknowns):
    return n_unknowns * _BYTES_PER_UNKNOWN


def assemble(source, lam, mesh_x, mesh_y, basis, N=None, nu=None, support=None,
             memory_limit=DEFAULT_MEMORY_LIMIT):
    """Build the mode-coupled operator.

    Parameters
    ----------
    source : PotentialSpec or ModeProjectedPotential
        A callable potential is projected exactly at the mesh nodes inside
        ``|x|, |y| <= support``; a projected potential is resampled bilinearly
        (zero outside its grid).
    mesh_x, mesh_y : Mesh1D
    basis : TransverseBasis
    N : int, optional
        Mode count (default ``basis.N``).

    Raises
    ------
    ResourceError
        If the memory estimate exceeds ``memory_limit`` bytes.
    """
    N = basis.N if N is None else int(N)
    if N > basis.N:
        raise ValueError("basis has fewer modes than requested")
    size = N * mesh_x.n * mesh_y.n
    need = memory_estimate(size)
    if need > memory_limit:
        raise ResourceError(f"direct solve needs about {need / 1e9:.1f} GB "
                            f"({size} unknowns); limit is {memory_limit / 1e9:.1f} GB")
    kappa = basis.kappa[:N]
    x, y = mesh_x.nodes, mesh_y.nodes
    if isinstance(source, PotentialSpec) or (callable(source) and not hasattr(source, "V")):
        if support is None:
            wx = wy = slice(None)
        else:
            ix = np.nonzero(np.abs(x) <= support)[0]
            iy = np.nonzero(np.abs(y) <= support)[0]
            wx, wy = slice(ix[0], ix[-1] + 1), slice(iy[0], iy[-1] + 1)
        nu = 2 * N + 8 if nu is None else nu
        u, wu = basis.gauss_nodes(nu)
        X, Y = np.meshgrid(x[wx], y[wy], indexing="ij")
        samples = source(X[..., None], Y[..., None], u[None, None, :])
        V = project_samples(samples, u, wu, basis)[:N, :N]
    else:
        g = source.grid
        ix = np.nonzero((x >= g.x[0]) & (x <= g.x[-1]))[0]
        iy = np.nonzero((y >= g.y[0]) & (y <= g.y[-1]))[0]
        wx, wy = slice(ix[0], ix[-1] + 1), slice(iy[0], iy[-1] + 1)
        V = source.sample(x[wx], y[wy])[:N, :N]
    return ModeCoupledOperator(mesh_x, mesh_y, kappa, float(lam), V, (wx, wy))


class _Preconditioner:
    """Exact inverse of ``S + kappa_j^2 - shift`` per mode (no potential)."""

    def __init__(self, op, shift):
        self.op = op
        self.shift = shift
        mx, my = op.mesh_x, op.mesh_y
        self.fast = mx.uniform and my.uniform
        if self.fast:
            lx = (4.0 / mx.h ** 2) * np.sin(np.arange(1, mx.n + 1) * np.pi / (2 * (mx.n + 1))) ** 2
            ly = (4.0 / my.h ** 2) * np.sin(np.arange(1, my.n + 1) * np.pi / (2 * (my.n + 1))) ** 2
            self.qx = self.qy = None
        else:
            lx, self.qx = eigh_tridiagonal(*mx.tridiagonal())
            ly, self.qy = eigh_tridiagonal(*my.tridiagonal())
        base = lx[:, None] + ly[None, :]
        self.denom = base[None] + (op.kappa ** 2 - shift)[:, None, None]
        if np.any(self.denom <= 0):
            raise ValueError("preconditioner shift is not below the free spectrum")

    def __call__(self, r):
        r = np.asarray(r)
        cols = r.reshape(self.op.size, -1)
        out = np.empty_like(cols)
        for c in range(cols.shape[1]):
            x = cols[:, c].reshape(self.op.shape)
            if self.fast:
                xh = sfft.dstn(x, type=1, axes=(1, 2), norm="ortho")
                out[:, c] = sfft.dstn(xh / self.denom, type=1, axes=(1, 2), norm="ortho").ravel()
            else:
                xh = np.einsum("ia,jik,kb->jab", self.qx, x, self.qy, optimize=True)
                xh = xh / self.denom
                out[:, c] = np.einsum("ia,jab,kb->jik", self.qx, xh, self.qy,
                                      optimize=True).ravel()
        return out.reshape(r.shape)


@dataclass
class EigenReport:
    """Lowest Ritz value of a mode-coupled operator and its diagnostics."""

    value: float
    residual: float
    iterations: int
    below_threshold: bool
    threshold: float
    method: str
    runtime: float = 0.0
    vector: np.ndarray = field(default=None, repr=False)
    ladder: list = field(default_factory=list)

    @property
    def gap(self):
        return self.threshold - self.value


def _initial_vector(op, decay):
    X, Y = np.meshgrid(op.mesh_x.nodes, op.mesh_y.nodes, indexing="ij")
    v = np.zeros(op.shape)
    v[0] = np.exp(-decay * np.sqrt(X * X + Y * Y + 1.0))
    return v.ravel() / np.linalg.norm(v)


def lowest_eigenvalue(op, tol=1e-10, gap_estimate=None, method="auto", maxiter=2000, x0=None):
    """Lowest eigenvalue of ``op`` by shift-invert Lanczos or preconditioned LOBPCG.

    The result is deterministic: the start vector is a fixed radial profile.
    ``tol`` is the relative residual target ``||H x - E x|| <= tol * E``.
    """
    t0 = time.perf_counter()
    k1sq = float(op.kappa[0] ** 2)
    gap = gap_estimate if gap_estimate and gap_estimate > 0 else 0.05 * k1sq
    shift = k1sq - 2.0 * gap
    if method == "auto":
        method = "shift-invert" if op.size <= _SHIFT_INVERT_MAX else "lobpcg"
    v0 = _initial_vector(op, math.sqrt(gap)) if x0 is None else x0.ravel()
    if method == "shift-invert":
        A = op.sparse()
        # sigma must sit below the whole spectrum, else Lanczos converges to the
        # eigenvalue nearest sigma; kappa_1^2 + lambda min_x eig V(x) bounds it
        sigma = min(shift, op.lower_bound() - 1e-3 * k1sq)
        vals, vecs = eigsh(A, k=1, sigma=sigma, which="LM", v0=v0, tol=tol * 1e-2)
        val, vec = float(vals[0]), vecs[:, 0]
        iters = 0
    elif method == "lobpcg":
        pre = _Preconditioner(op, shift - 1e-3 * k1sq)
        A = op.linear_operator()
        M = LinearOperator((op.size, op.size), matvec=pre, matmat=pre, dtype=float)
        vals, vecs, hist = lobpcg(A, v0[:, None], M=M, largest=False, tol=tol * k1sq,
                                  maxiter=maxiter, retResidualNormsHistory=True)
        val, vec = float(vals[0]), vecs[:, 0]
        iters = len(hist)
    else:
        raise ValueError(f"unknown method {method!r}")
    resid = float(np.linalg.norm(op.matvec(vec) - val * vec) / np.linalg.norm(vec))
    if resid > max(1e3 * tol * k1sq, 1e-8):
        raise RuntimeError(f"eigensolver did not converge (residual {resid:.2e})")
    return EigenReport(val, resid, iters, val < k1sq, k1sq, method,
                       time.perf_counter() - t0, vec)


def box_half_length(gap_estimate, default):
    """``L >= 8 / sqrt(gap)`` when a gap estimate is available."""
    if gap_estimate and gap_estimate > 0:
        return max(default, 8.0 / math.sqrt(gap_estimate))
    return default


@dataclass
class LadderRow:
    L: float
    h: float
    N: int
    E: float
    residual: float
    runtime: float


def refinement_ladder(source, lam, basis, Ls, hs, Ns, support=None, tol=1e-10,
                      gap_estimate=None):
    """Solve on every ``(L, h, N)`` combination and extrapolate in ``h``.

    Returns ``(rows, extrapolated)``; ``extrapolated`` is the Richardson value
    ``(4 E(h/2) - E(h)) / 3`` from the two finest spacings at the largest ``L``
    and ``N`` (``None`` when fewer than two spacings were run).
    """
    rows = []
    for L in Ls:
        for N in Ns:
            for h in hs:
                op = assemble(source, lam, Mesh1D.uniform_mesh(L, h), Mesh1D.uniform_mesh(L, h),
                              basis, N=N, support=support)
                rep = lowest_eigenvalue(op, tol=tol, gap_estimate=gap_estimate)
                rows.append(LadderRow(L, h, N, rep.value, rep.residual, rep.runtime))
                gap_estimate = max(basis.kappa[0] ** 2 - rep.value, 1e-12)
    finest = [r for r in rows if r.L == max(Ls) and r.N == max(Ns)]
    finest.sort(key=lambda r: r.h)
    extrap = None
    if len(finest) >= 2:
        a, b = finest[0], finest[1]
        ratio = (b.h / a.h) ** 2
        extrap = (ratio * a.E - b.E) / (ratio - 1.0)
    return rows, extrap


# ------------------------------------------------------------- layer bracket

LOG_GAP_RESOLVABLE = -25.0


@dataclass
class BracketResult:
    """Lowest eigenvalues of the two bracket operators and the implied ``w``.

    ``verdict`` is ``"bracketed"``, ``"no bound state"`` or
    ``"asymptotics-only"`` (predicted gap too small to resolve).
    """

    E_minus: float
    E_plus: float
    w_minus: float
    w_plus: float
    w_predicted: float
    log_gap_predicted: float
    verdict: str
    constants: object = None
    reports: tuple = ()
    message: str = ""

    @property
    def ordered(self):
        return self.E_minus <= self.E_plus


def implied_w(E, kappa1):
    """``2 / ln(kappa1^2 - E)``; ``nan`` when ``E`` is not below the threshold."""
    gap = kappa1 * kappa1 - E
    if not gap > 0:
        return float("nan")
    return 2.0 / math.log(gap)


def bracket_layer_energy(jet, a, eps, N=8, h=0.2, L=None, ratio=1.08, tol=1e-10,
                         nu=None, basis=None, w1=None, memory_limit=DEFAULT_MEMORY_LIMIT):
    """Solve ``H_+- = -Delta - d_u^2 + eps V_+-`` and compare with ``eps^2 w1``.

    Parameters
    ----------
    jet : SurfaceJet
        Surface derivatives on a square grid; its extent sets the uniform
        core of the planar mesh.
    a : float
        Layer half-width.
    eps : float
        Deformation amplitude.
    N : int
        Transverse modes kept in the bracket operators.
    h : float
        Planar mesh spacing in the core.
    L : float, optional
        Box half-length; defaults to ``8 / sqrt(gap)`` from the asymptotic
        prediction (at least twice the core).
    w1 : float, optional
        Precomputed first-order coefficient; computed by the Fourier route
        when omitted.
    """
    from .asymptotics import w1_fourier
    from .geometry import curvatures, effective_potentials, layer_constants, mean_curvature_fields
    from .transverse import build_basis

    grid = jet.grid
    if basis is None:
        basis = build_basis(a, max(N, 64))
    k1sq = float(basis.kappa1 ** 2)
    bundle = curvatures(jet, eps)
    constants = layer_constants(bundle, a)
    if w1 is None:
        mf = mean_curvature_fields(jet)
        w1 = w1_fourier(grid, mf.m0, basis, grad_m0=mf.grad_m0, lap_m0=mf.lap_m0).w
    w_pred = eps * eps * w1
    nan = float("nan")
    if not np.any(bundle.K) and not np.any(bundle.M):
        return BracketResult(k1sq, k1sq, nan, nan, w_pred, nan, "no bound state", constants,
                             message="flat surface: no curvature-induced binding")
    if not w_pred < 0:
        return BracketResult(nan, nan, nan, nan, w_pred, nan, "no bound state", constants,
                             message="asymptotics predict no bound state")
    lg = 2.0 / w_pred
    if lg < LOG_GAP_RESOLVABLE:
        return BracketResult(nan, nan, nan, nan, w_pred, lg, "asymptotics-only", constants,
                             message=f"predicted log-gap {lg:.3g} below {LOG_GAP_RESOLVABLE}: "
                                     "gap not resolvable in double precision")
    gap = math.exp(lg)
    core = min(abs(grid.x[0]), abs(grid.x[-1]), abs(grid.y[0]), abs(grid.y[-1]))
    L = max(box_half_length(gap, 2.0 * core), 2.0 * core) if L is None else float(L)
    mesh = Mesh1D.stretched_mesh(core, h, L, ratio)
    nu = 2 * N + 8 if nu is None else int(nu)
    u, wu = basis.gauss_nodes(nu)
    fields = effective_potentials(jet, bundle, a, eps, u, constants)
    small = build_basis(a, N)
    reports = []
    for Vs in (fields.V_minus, fields.V_plus):
        proj = ModeProjectedPotential(grid, small, project_samples(eps * Vs, u, wu, small))
        op = assemble(proj, 1.0, mesh, mesh, small, N=N, memory_limit=memory_limit)
        reports.append(lowest_eigenvalue(op, tol=tol, gap_estimate=gap))
    Em, Ep = reports[0].value, reports[1].value
    if Em > Ep + 10 * tol * k1sq:
        raise RuntimeError(f"bracket violated: E- = {Em!r} > E+ = {Ep!r}")
    bound = Ep < k1sq
    verdict = "bracketed" if bound else ("lower bracket only" if Em < k1sq else "no bound state")
    return BracketResult(Em, Ep, implied_w(Em, basis.kappa1), implied_w(Ep, basis.kappa1),
                         w_pred, lg, verdict, constants, tuple(reports))
