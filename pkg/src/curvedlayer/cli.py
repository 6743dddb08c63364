"""Command line front end.

Exit codes: 0 success, 1 configuration error, 2 no bound state predicted
(flat surface), 3 validation failure.
"""

import argparse
import math
import os
import sys

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .csvio import write_table
from . import pipelines as pl

COMMANDS = ("geometry", "asymptotics", "planar", "bs", "direct", "pipeline-layer",
            "pipeline-planar", "selftest")


def build_parser():
    p = argparse.ArgumentParser(prog="curvedlayer",
                                description="Bound states in mildly curved quantum layers.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI run configuration")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides [output] dir)")
    common.add_argument("--modes", metavar="N", type=int, help="transverse mode cutoff")
    common.add_argument("--tol", metavar="X", type=float, help="solver tolerance")
    common.add_argument("--quiet", action="store_true", help="suppress console output")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "geometry": "curvature diagnostics and layer constants",
        "asymptotics": "w1 by three routes, thin-layer check, eps sweep",
        "planar": "two-term weak-coupling expansion over the lambda sweep",
        "bs": "Birman-Schwinger implicit equation over the lambda sweep",
        "direct": "direct eigensolver refinement ladder",
        "pipeline-layer": "geometry, asymptotics and optional bracket for a surface",
        "pipeline-planar": "expansion vs Birman-Schwinger vs direct for a potential",
        "selftest": "fast internal consistency checks",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return p


def _resolve(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.out is not None:
        cfg.out = args.out
    if args.modes is not None:
        cfg.modes = args.modes
        cfg.coupled_modes = min(cfg.coupled_modes, args.modes)
        cfg.bracket_modes = min(cfg.bracket_modes, args.modes)
    if args.tol is not None:
        cfg.tol = args.tol
    return cfg.validate()


def _emit(cfg, result, quiet):
    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, "resolved_config.ini"), "w", encoding="utf-8") as fh:
        fh.write(cfg.to_ini())
    for t in result.tables:
        path = os.path.join(cfg.out, f"{t.name}.csv")
        write_table(path, t.name, t.columns, t.rows)
        if not quiet:
            print(f"wrote {path} ({len(t.rows)} rows)")
    if not quiet:
        for m in result.messages:
            print(m)


def _selftest(cfg):
    """Cheap checks of the numerical building blocks."""
    from .kernels import k0_diagonal
    from .specfun import EULER_GAMMA, LN2_MINUS_GAMMA, bessel_k0, interp_f, interp_g
    from .transverse import build_basis, overlap_sums
    import numpy as np

    checks = []
    basis = build_basis(math.pi / 2, 512)
    s = overlap_sums(basis)
    checks.append(["overlap_S0", s.S0, s.S0_target, 1e-6])
    checks.append(["overlap_S2", s.S2, 1.0, 1e-3])
    u = np.geomspace(1e-3, 30.0, 200)
    rel = np.max(np.abs(interp_f(u) * np.log(u) + interp_g(u) - bessel_k0(u)) / bessel_k0(u))
    checks.append(["k0_decomposition", float(rel), 0.0, 1e-12])
    checks.append(["f_small", float(interp_f(1e-3)), -1.0, 1e-5])
    checks.append(["g_small", float(interp_g(1e-3)), LN2_MINUS_GAMMA, 1e-4])
    # lattice sum of the sampled kernel must reproduce int K0(kr) = 2 pi / k^2
    k, h = 1.0, 0.5
    n = np.arange(-80, 81)
    r = h * np.hypot(*np.meshgrid(n, n, indexing="ij"))
    r[80, 80] = 1.0
    vals = bessel_k0(k * r)
    vals[80, 80] = k0_diagonal(k * h)
    checks.append(["k0_moment", float(h * h * vals.sum()), 2 * math.pi / k ** 2, 1e-10])
    checks.append(["euler_gamma", EULER_GAMMA, 0.5772156649015329, 1e-15])
    rows = [[name, float(v), float(t), tol, bool(abs(v - t) <= tol)] for name, v, t, tol in checks]
    res = pl.StageResult([pl.Table("selftest", ["check", "value", "target", "tol", "pass"], rows)])
    return res, all(r[-1] for r in rows)


def run(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve(args)
        cmd = args.command
        ok = True
        if cmd == "geometry":
            res = pl.geometry_stage(cfg)
        elif cmd == "asymptotics":
            res, _ = pl.asymptotics_stage(cfg)
        elif cmd == "planar":
            res, _ = pl.expansion_stage(cfg)
        elif cmd == "bs":
            res, _ = pl.bs_stage(cfg)
        elif cmd == "direct":
            res = pl.direct_stage(cfg)
        elif cmd == "pipeline-layer":
            res = pl.run_layer_pipeline(cfg)
        elif cmd == "pipeline-planar":
            res = pl.run_planar_pipeline(cfg)
        else:
            res, ok = _selftest(cfg)
        _emit(cfg, res, args.quiet)
        if not ok:
            print("selftest failed", file=sys.stderr)
            return pl.EXIT_VALIDATION
        return pl.EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return pl.EXIT_CONFIG
    except pl.NoBoundStatePredicted as exc:
        print(f"no bound state: {exc}", file=sys.stderr)
        return pl.EXIT_NO_BOUND_STATE
    except pl.ValidationFailure as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return pl.EXIT_VALIDATION
    except ValueError as exc:
        # invalid parameters surfacing from the factories count as config errors
        print(f"config error: {exc}", file=sys.stderr)
        return pl.EXIT_CONFIG


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
