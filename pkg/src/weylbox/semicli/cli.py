"""weylbox command line."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .. import __version__
from ..errors import ConfigError, NumericalError, WeylboxError
from ..fieldlab import GridBox, ScalarFieldSample, VectorFieldSample
from .config import load_config
from .expr import FieldExpression

log = logging.getLogger("weylbox")


def _triple(text: str, kind=float):
    vals = [kind(v) for v in text.replace(" ", "").split(",") if v]
    if len(vals) == 1:
        vals = vals * 3
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma separated values, got {text!r}")
    return tuple(vals)


def _grid(args) -> GridBox:
    return GridBox(args.lower, args.upper, args.points)


def _scalar(expr: str, grid: GridBox) -> ScalarFieldSample:
    f = FieldExpression.parse(expr)
    return ScalarFieldSample(grid, f(*grid.mesh()))


def _vector(expr: str, grid: GridBox) -> VectorFieldSample:
    f = FieldExpression.parse(expr)
    if not f.is_vector:
        raise ConfigError(f"{expr!r} is not a vector expression")
    return VectorFieldSample(grid, np.stack(f(*grid.mesh())))


def _spec(args, kind=None):
    from ..magop import OperatorSpec

    grid = _grid(args)
    return OperatorSpec(
        kind or args.kind, args.hbar, grid, args.mu,
        B=_vector(args.B, grid), potential=_scalar(args.W, grid), wilson=args.wilson,
    )


def _emit(args, name: str, result: dict) -> None:
    if args.format == "json":
        text = json.dumps(result, indent=1, default=float)
    else:
        text = "\n".join(f"{k},{v}" for k, v in result.items())
    print(text)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, f"{name}.{args.format}"), "w") as fh:
            fh.write(text + "\n")


# --- subcommands -------------------------------------------------------------


def cmd_beta(args):
    from ..weylcoeff import beta_gamma

    _emit(args, "beta", {"gamma": args.gamma, "beta": beta_gamma(args.gamma)})


def cmd_weyl(args):
    from ..weylcoeff import WeylParams, weyl_coefficient

    g = _grid(args)
    res = weyl_coefficient(_scalar(args.b, g), _scalar(args.v, g), WeylParams(args.gamma, args.lam))
    _emit(args, "weyl", {"value": res.value, "max_landau_index": res.max_landau_index, "nodes": res.nodes})


def cmd_effective_field(args):
    from ..effectivefield import EffectiveFieldParams, effective_length_map

    g = _grid(args)
    params = EffectiveFieldParams(args.p, args.l_max, args.tol, args.dim)
    res = effective_length_map(_vector(args.B, g), params, np.array([args.at]))
    _emit(args, "effective-field", {"l_p": res.length[0], "b_p": res.field[0], "capped": bool(res.capped[0])})


def cmd_shen_bound(args):
    from ..effectivefield import EffectiveFieldParams, shen_bound

    g = _grid(args)
    params = EffectiveFieldParams(args.p, None, 1e-10, 3 if args.kind == "trace" else 2)
    val = shen_bound(_scalar(args.W, g), _vector(args.B, g), args.mu, args.hbar, args.lam, params, args.kind)
    _emit(args, "shen-bound", {"kind": args.kind, "value": val})


def cmd_assemble(args):
    from ..magop import assemble, export_coo

    H = assemble(_spec(args))
    info = {"kind": args.kind, "dim": H.dim, "nnz": int(H.matrix.nnz), "hermitian_defect": H.hermitian_defect()}
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "matrix.coo")
        export_coo(H, path)
        info["path"] = path
    _emit(args, "assemble", info)


def cmd_count(args):
    from ..magop import assemble
    from ..speccount import count_below

    res = count_below(assemble(_spec(args)), args.tau)
    _emit(args, "count", {"tau": res.tau, "count": res.count, "method": res.method})


def cmd_riesz(args):
    from ..magop import assemble
    from ..speccount import riesz_mean

    res = riesz_mean(assemble(_spec(args)), args.gamma, args.lam)
    _emit(args, "riesz", {"gamma": res.gamma, "lam": res.lam, "value": res.value, "contributing": res.contributing})


def cmd_dirac_gap(args):
    from ..speccount import combined_gap_count, dirac_gap_count
    from ..magop import assemble

    spec = _spec(args, "dirac")
    res = dirac_gap_count(assemble(spec), args.lam)
    _emit(args, "dirac-gap", {"lam": args.lam, "count": res.count, "combined": combined_gap_count(spec, args.lam)})


def cmd_torus(args):
    from ..magop import OperatorSpec, TorusSpec, assemble, favored_block, spin_blocks, torus_grid
    from ..speccount import count_below

    torus = TorusSpec(args.T1, args.T2, args.N)
    grid = torus_grid(args.T1, args.T2, args.n, args.n)
    spec = OperatorSpec("torus-pauli", args.hbar, grid, args.mu, torus=torus)
    H = assemble(spec)
    B0 = torus.B0(args.mu, args.hbar)
    thr = 0.1 * 2 * args.mu * args.hbar * abs(B0) if B0 else 1e-8
    blocks = spin_blocks(H)
    counts = [count_below(b, thr).count for b in blocks]
    _emit(args, "torus", {"N": args.N, "B0": B0, "threshold": thr, "count_up": counts[0], "count_down": counts[1],
                          "favored_count": counts[favored_block(args.N)]})


def cmd_square_well(args):
    from ..reference import WellSpec, square_well_spectrum

    res = square_well_spectrum(WellSpec(args.c, args.R, args.hbar))
    out = dict(res.report)
    out["confirmed_roots"] = [float(x) for x in res.confirmed]
    out["orders"] = [float(x) for x in res.orders]
    _emit(args, "square-well", out)


def cmd_bracket(args):
    from ..tessellate import bracket_counts, tessellate_domain

    spec = _spec(args)
    res = bracket_counts(spec, tessellate_domain(spec.grid, args.r), args.rho, args.lam)
    _emit(args, "bracket", {"lower": res.lower, "full": res.full, "upper": res.upper, "penalty": res.penalty,
                            "C_pu": res.C_pu})


def cmd_sweep(args):
    from .report import emit_report, stable_hash
    from .sweep import run_sweep

    if not args.config:
        raise ConfigError("sweep needs --config")
    cfg = load_config(args.config)
    rows = run_sweep(cfg, threads=args.threads)
    fmt = args.format if args.format_given else cfg.fmt
    out = args.out or cfg.out_dir
    paths = emit_report(rows, out, fmt, cfg.prefix, cfg.echo())
    for r in rows:
        print(f"hbar={r.hbar:.4g} mu={r.mu:.4g} gamma={r.gamma:g} lam={r.lam:g} N={r.count:g} "
              f"scaled={r.scaled:.6g} target={r.target:.6g} gap={r.gap:.4g} {r.error}")
    print(f"wrote {', '.join(paths)} (hash {stable_hash(rows)[:16]})")


# --- parser -----------------------------------------------------------------


def _add_domain(p, points="16,16,16"):
    p.add_argument("--lower", type=_triple, default=(0.0, 0.0, 0.0))
    p.add_argument("--upper", type=_triple, default=(1.0, 1.0, 1.0))
    p.add_argument("--points", type=lambda s: _triple(s, int), default=_triple(points, int))


def _add_operator(p, kind="pauli"):
    _add_domain(p)
    p.add_argument("--kind", default=kind, choices=["schrodinger", "pauli", "dirac"])
    p.add_argument("--hbar", type=float, default=0.2)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--B", default="(0,0,0)", help="vector expression, e.g. (0,0,5)")
    p.add_argument("--W", default="0", help="scalar potential expression")
    p.add_argument("--wilson", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="weylbox", description="Magnetic Weyl asymptotics at desk scale.",
                                 allow_abbrev=False)
    ap.add_argument("--version", action="version", version=f"weylbox {__version__}")
    ap.add_argument("--config", help="experiment configuration file")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--format", choices=["csv", "json"], default=None)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("beta", help="the constant beta_gamma")
    p.add_argument("--gamma", type=float, default=0.0)
    p.set_defaults(func=cmd_beta)

    p = sub.add_parser("weyl", help="magnetic Weyl coefficient of (b, v + lam)")
    _add_domain(p, "5,5,5")
    p.add_argument("--b", default="0")
    p.add_argument("--v", default="-1")
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--lam", type=float, default=0.0)
    p.set_defaults(func=cmd_weyl)

    p = sub.add_parser("effective-field", help="effective length and field at a point")
    _add_domain(p, "21,21,21")
    p.add_argument("--B", default="(0,0,1)")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--dim", type=int, choices=[2, 3], default=3)
    p.add_argument("--at", type=_triple, default=(0.5, 0.5, 0.5))
    p.add_argument("--l-max", dest="l_max", type=float, default=None)
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_effective_field)

    p = sub.add_parser("shen-bound", help="effective-field trace or count bound")
    _add_domain(p, "11,11,11")
    p.add_argument("--W", default="-1")
    p.add_argument("--B", default="(0,0,1)")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--hbar", type=float, default=1.0)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--kind", choices=["trace", "count"], default="trace")
    p.set_defaults(func=cmd_shen_bound)

    p = sub.add_parser("assemble", help="assemble an operator (writes matrix.coo with --out)")
    _add_operator(p)
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("count", help="eigenvalues below tau by inertia")
    _add_operator(p)
    p.add_argument("--tau", type=float, default=0.0)
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("riesz", help="Riesz mean sum (e + lam)_-^gamma")
    _add_operator(p)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--lam", type=float, default=0.0)
    p.set_defaults(func=cmd_riesz)

    p = sub.add_parser("dirac-gap", help="Dirac eigenvalues in (-sqrt(1-lam), sqrt(1-lam))")
    _add_operator(p, "dirac")
    p.add_argument("--lam", type=float, default=0.1)
    p.set_defaults(func=cmd_dirac_gap)

    p = sub.add_parser("torus", help="zero modes of the torus Pauli operator")
    p.add_argument("--N", type=int, default=1)
    p.add_argument("--T1", type=float, default=1.0)
    p.add_argument("--T2", type=float, default=1.0)
    p.add_argument("--n", type=int, default=32)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--hbar", type=float, default=0.05)
    p.set_defaults(func=cmd_torus)

    p = sub.add_parser("square-well", help="square-well bound states and root-set comparison")
    p.add_argument("--c", type=float, default=10.0)
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--hbar", type=float, default=1.0)
    p.set_defaults(func=cmd_square_well)

    p = sub.add_parser("bracket", help="Dirichlet/IMS bracketing of a count")
    _add_operator(p)
    p.add_argument("--r", type=float, default=0.5)
    p.add_argument("--rho", type=float, default=0.4)
    p.add_argument("--lam", type=float, default=0.0)
    p.set_defaults(func=cmd_bracket)

    p = sub.add_parser("sweep", help="semiclassical sweep from --config")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    args.format_given = args.format is not None
    args.format = args.format or "csv"
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    np.random.seed(args.seed)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (WeylboxError, ValueError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
