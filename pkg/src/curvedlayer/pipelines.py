"""Config-driven pipelines: surface -> geometry -> asymptotics -> bracket, and
potential -> expansion -> Birman-Schwinger -> direct solver.

Each stage returns :class:`Table` objects; the CLI writes them as CSV.  No
table carries wall-clock data except the refinement ladder of the ``direct``
stage, so pipeline outputs are reproducible bit for bit.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .asymptotics import (NoBoundState, w1_fourier, w1_intermediate, w1_realspace, w1_thin)
from .birman_schwinger import solve_implicit
from .direct import (LOG_GAP_RESOLVABLE, Mesh1D, assemble, bracket_layer_energy,
                     lowest_eigenvalue, refinement_ladder)
from .geometry import (build_surface_jet, curvatures, layer_constants, mean_curvature_fields,
                       total_gauss_curvature)
from .grid import Grid2D
from .planar import expansion_w
from .potentials import make_potential, project_potential
from .surfaces import make_surface
from .transverse import build_basis

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NO_BOUND_STATE = 2
EXIT_VALIDATION = 3

ROUTE_TOL = 1e-3


class ValidationFailure(RuntimeError):
    """A computed result failed an internal consistency check."""


class NoBoundStatePredicted(RuntimeError):
    """The input geometry cannot bind (exit code 2)."""


@dataclass
class Table:
    name: str
    columns: list
    rows: list = field(default_factory=list)


@dataclass
class StageResult:
    tables: list = field(default_factory=list)
    messages: list = field(default_factory=list)


def _require(cfg, attr, section):
    if getattr(cfg, attr) is None:
        from .config import ConfigError
        raise ConfigError(f"this command needs a [{section}] section")


def _surface_jet(cfg):
    _require(cfg, "surface", "surface")
    surf = make_surface(cfg.surface, **cfg.surface_params)
    grid = Grid2D.square(cfg.half_width, cfg.h)
    return grid, build_surface_jet(surf, grid)


# ------------------------------------------------------------------- layer

def geometry_stage(cfg, jet=None):
    """Curvature diagnostics per ``eps``."""
    if jet is None:
        _, jet = _surface_jet(cfg)
    cols = ["eps", "eta_inf", "rho_m_inv", "c_minus", "c_plus", "C_minus", "C_plus",
            "sigma_minus", "sigma_plus", "int_k0", "total_K", "boundary_diag"]
    t = Table("geometry", cols)
    res = StageResult([t])
    for eps in cfg.eps:
        b = curvatures(jet, eps)
        try:
            c = layer_constants(b, cfg.a)
        except ValueError as exc:
            raise ValidationFailure(f"eps = {eps}: {exc}") from None
        import warnings
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            tc = total_gauss_curvature(b, jet)
        if caught:
            res.messages.append(f"eps = {eps}: {caught[0].message}")
        t.rows.append([float(eps), c.eta_inf, c.rho_m_inv, c.c_minus, c.c_plus, c.C_minus,
                       c.C_plus, c.sigma_minus, c.sigma_plus, tc.integral_k0, tc.total,
                       tc.boundary_diagnostic])
    return res


def asymptotics_stage(cfg, jet=None, basis=None):
    """``w1`` by three routes, the thin-layer comparison and the ``eps`` sweep."""
    if jet is None:
        _, jet = _surface_jet(cfg)
    grid = jet.grid
    mf = mean_curvature_fields(jet)
    scale = float(np.max(np.abs(jet.d())) + 1e-300)
    if float(np.max(np.abs(mf.m0))) <= 1e-14 * scale:
        raise NoBoundStatePredicted("mean curvature vanishes identically (m0 = 0): "
                                    "no curvature-induced bound state is predicted")
    basis = build_basis(cfg.a, cfg.modes) if basis is None else basis
    kw = dict(grad_m0=mf.grad_m0, lap_m0=mf.lap_m0)
    routes = [("realspace", w1_realspace(grid, mf.m0, basis, **kw).w),
              ("fourier", w1_fourier(grid, mf.m0, basis, **kw).w),
              ("intermediate", w1_intermediate(mf, basis))]
    w_ref = routes[1][1]
    rt = Table("w1_routes", ["route", "w1", "rel_diff_fourier"])
    for name, w in routes:
        rt.rows.append([name, w, abs(w - w_ref) / abs(w_ref)])
    worst = max(abs(x[1] - y[1]) / abs(w_ref) for x in routes for y in routes)
    res = StageResult([rt])
    if worst > ROUTE_TOL:
        raise ValidationFailure(f"w1 routes disagree (max relative difference {worst:.2e})")
    thin = w1_thin(grid, mf.m0, basis.d, basis, **kw)
    res.tables.append(Table("thin_layer", ["d", "leading", "d2_term", "thin_two_term", "full",
                                           "w1_fourier"],
                            [[basis.d, thin.leading, thin.d2_term, thin.leading + thin.d2_term,
                              thin.full, w_ref]]))
    sweep = Table("eps_sweep", ["eps", "w1_eps2", "log_gap", "E"])
    k1 = basis.kappa1
    for eps in cfg.eps:
        w = eps * eps * w_ref
        if w < 0:
            lg = 2.0 / w
            E = k1 * k1 - (math.exp(lg) if lg > -745 else 0.0)
        else:
            lg, E = float("nan"), float("nan")
        sweep.rows.append([float(eps), w, lg, E])
    res.tables.append(sweep)
    if not w_ref < 0:
        res.messages.append("w1 is not negative: no bound state predicted")
    return res, w_ref


def bracket_stage(cfg, jet, w1):
    eps = cfg.bracket_eps if cfg.bracket_eps > 0 else cfg.eps[0]
    r = bracket_layer_energy(jet, cfg.a, eps, N=cfg.bracket_modes, h=cfg.bracket_h,
                             tol=min(1e-10, max(cfg.tol, 1e-12)), w1=w1,
                             basis=build_basis(cfg.a, cfg.modes))
    t = Table("bracket", ["eps", "E_minus", "E_plus", "w_minus", "w_plus", "w_predicted",
                          "log_gap_predicted", "verdict"],
              [[float(eps), r.E_minus, r.E_plus, r.w_minus, r.w_plus, r.w_predicted,
                r.log_gap_predicted, r.verdict]])
    res = StageResult([t])
    if r.message:
        res.messages.append(r.message)
    return res


def run_layer_pipeline(cfg):
    """All layer stages; raises :class:`NoBoundStatePredicted` for flat input."""
    _, jet = _surface_jet(cfg)
    out = geometry_stage(cfg, jet)
    asy, w1 = asymptotics_stage(cfg, jet)
    out.tables += asy.tables
    out.messages += asy.messages
    if cfg.bracket:
        br = bracket_stage(cfg, jet, w1)
        out.tables += br.tables
        out.messages += br.messages
    return out


# ------------------------------------------------------------------ planar

def _projection(cfg):
    _require(cfg, "potential", "potential")
    spec = make_potential(cfg.potential, cfg.a, **cfg.potential_params)
    grid = Grid2D.square(cfg.half_width, cfg.h)
    basis = build_basis(cfg.a, max(cfg.coupled_modes, 2))
    return spec, basis, project_potential(spec, basis, grid)


def expansion_stage(cfg, proj=None):
    proj = _projection(cfg)[2] if proj is None else proj
    t = Table("expansion", ["lambda", "first", "second", "w", "mean_V11", "verdict"])
    results = {}
    for lam in cfg.lam:
        r = expansion_w(lam, proj, N=proj.N)
        results[lam] = r
        t.rows.append([float(lam), r.first, r.second, r.w, r.mean, r.verdict])
    return StageResult([t]), results


def bs_stage(cfg, proj=None):
    proj = _projection(cfg)[2] if proj is None else proj
    t = Table("birman_schwinger", ["lambda", "w", "E", "log_gap", "iterations", "residual",
                                   "verdict"])
    results = {}
    for lam in cfg.lam:
        try:
            r = solve_implicit(lam, proj, tol=cfg.tol)
        except NoBoundState:
            results[lam] = None
            t.rows.append([float(lam)] + [float("nan")] * 3 + [0, float("nan"), "none"])
            continue
        results[lam] = r
        t.rows.append([float(lam), r.w_star, r.E, r.log_gap, r.iterations, r.residual,
                       "bound state"])
    return StageResult([t]), results


def direct_stage(cfg, spec=None, basis=None, bs_results=None, with_runtime=True):
    """Refinement ladder per coupling; skipped where the gap is unresolvable."""
    if spec is None:
        spec, basis, _ = _projection(cfg)
    summary = Table("direct", ["lambda", "E_extrapolated", "E_finest", "below_threshold",
                               "status"])
    cols = ["lambda", "L", "h", "N", "E", "residual"] + (["runtime"] if with_runtime else [])
    ladder = Table("ladder", cols)
    k1sq = basis.kappa1 ** 2
    for lam in cfg.lam:
        gap = None
        if bs_results is not None:
            r = bs_results.get(lam)
            if r is None:
                summary.rows.append([float(lam), float("nan"), float("nan"), False,
                                     "skipped: no bound state"])
                continue
            if r.log_gap < LOG_GAP_RESOLVABLE:
                summary.rows.append([float(lam), float("nan"), float("nan"), False,
                                     "skipped: gap not resolvable"])
                continue
            gap = math.exp(r.log_gap)
        rows, extrap = refinement_ladder(spec, lam, basis, [cfg.direct_L], sorted(cfg.direct_h,
                                         reverse=True), [cfg.coupled_modes],
                                         support=cfg.half_width, gap_estimate=gap)
        for row in rows:
            vals = [float(lam), row.L, row.h, row.N, row.E, row.residual]
            ladder.rows.append(vals + ([row.runtime] if with_runtime else []))
        finest = min(rows, key=lambda r: r.h).E
        E = extrap if extrap is not None else finest
        status = "bound state" if E < k1sq else "no resolvable bound state"
        summary.rows.append([float(lam), E, finest, bool(E < k1sq), status])
    return StageResult([summary, ladder])


def _slopes(lams, diffs):
    pairs = sorted(zip(lams, diffs), reverse=True)
    out = []
    for (l1, d1), (l2, d2) in zip(pairs, pairs[1:]):
        if d1 > 0 and d2 > 0:
            out.append([l1, l2, math.log(d1 / d2) / math.log(l1 / l2)])
        else:
            out.append([l1, l2, float("nan")])
    return out


def run_planar_pipeline(cfg):
    """Expansion vs Birman-Schwinger vs direct over the coupling sweep."""
    spec, basis, proj = _projection(cfg)
    ex, exr = expansion_stage(cfg, proj)
    bs, bsr = bs_stage(cfg, proj)
    out = StageResult(ex.tables + bs.tables)
    direct_E = {}
    if cfg.direct:
        d = direct_stage(cfg, spec, basis, bsr, with_runtime=False)
        out.tables += d.tables
        direct_E = {row[0]: row[1] for row in d.tables[0].rows}
    cmp_ = Table("comparison", ["lambda", "w_expansion", "w_bs", "abs_diff", "E_bs", "E_direct",
                                "verdict_expansion", "verdict_bs"])
    diffs = []
    for lam in cfg.lam:
        e, b = exr[lam], bsr[lam]
        wb = b.w_star if b is not None else float("nan")
        Eb = b.E if b is not None else float("nan")
        diff = abs(wb - e.w) if b is not None else float("nan")
        diffs.append(diff)
        cmp_.rows.append([float(lam), e.w, wb, diff, Eb, direct_E.get(float(lam), float("nan")),
                          "bound state" if e.bound_state else "none",
                          "bound state" if b is not None else "none"])
    out.tables.append(cmp_)
    out.tables.append(Table("order", ["lambda_1", "lambda_2", "slope"],
                            _slopes([float(l) for l in cfg.lam], diffs)))
    return out
