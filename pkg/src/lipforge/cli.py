"""Command-line orchestration: builds artifacts, certifies them, and emits
DAG JSON, certificate JSON, CSV tables, binary grids and SVG heatmaps.

Exit codes: 0 ok, 2 configuration error, 3 certificate violation,
4 resolution / budget error.
"""

import argparse
import os
import sys

import numpy as np

from . import gridfile, svg
from .config import apply_thread_cap
from .errors import (BudgetError, ConstructionError, CoverError,
                     DescriptorError, DomainError, FamilyError, GeometryError,
                     HypothesisError, InputError, LipforgeError, NormError,
                     PremiseError, RefereeError, ResolutionError)
from .fn import LipFn, fn_from_file_doc, fn_to_file_doc
from .game import POLICIES, certify_transcript, run_bm_game
from .prescribe import build_net, prescribe_derivative
from .regions import Region, gen_four_corner
from .serialize import dump_path, dumps, enc_float, load_path
from .smooth import smooth_around
from .spaces import Functional, LinOp, NormedSpace, cyl_constant, lp_space
from .steep import (SteepSpec, build_pu_map, build_steep,
                    check_steep_properties, pu_map_certificate)
from .verify import c1_check, lip_estimate, scan_derivative_set
from .gridfile import sample_fn

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CERT = 3
EXIT_RESOLUTION = 4

_CONFIG_ERRORS = (DescriptorError, InputError, FamilyError, DomainError,
                  NormError, GeometryError, FileNotFoundError, KeyError,
                  ValueError)
_CERT_ERRORS = (RefereeError, PremiseError, HypothesisError)
_RESOLUTION_ERRORS = (ResolutionError, BudgetError, CoverError,
                      ConstructionError)


def _vec(text):
    return np.array([float(t) for t in text.split(",")])


def _space(text):
    """Parse 'l2:2', 'linf:2', 'l1:3'."""
    kind, _, dim = text.partition(":")
    if not dim:
        raise InputError("space spec must look like l2:2")
    p = {"l1": 1, "l2": 2, "linf": "inf"}.get(kind)
    if p is None:
        raise InputError("unsupported space kind %r" % kind)
    return lp_space(int(dim), p)


def _load_region(path):
    return Region.from_doc(load_path(path))


def _load_op(path):
    return LinOp.from_doc(load_path(path))


def _load_ops(path):
    doc = load_path(path)
    if isinstance(doc, dict) and "ops" in doc:
        return [LinOp.from_doc(d) for d in doc["ops"]]
    return [LinOp.from_doc(doc)]


def _load_fn(path):
    return fn_from_file_doc(load_path(path))


def _write_json(path, doc):
    dump_path(doc, path)


def _outdir(args):
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _write_fn(path, fn):
    _write_json(path, fn_to_file_doc(fn))


def _maybe_heatmap(path, fn, bbox, res=128, title=""):
    vals, bb = sample_fn(fn, bbox, res)
    field = np.linalg.norm(vals, axis=2) if fn.l > 1 else vals[:, :, 0]
    svg.write_heatmap(path, field, bb, title=title)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_cantor(args):
    E = gen_four_corner(args.level, args.ratio)
    _write_json(args.out, E.to_doc())
    print("four-corner level %d: %d boxes -> %s" % (args.level, E.n_boxes, args.out))
    return EXIT_OK


def cmd_cyl(args):
    T = _load_op(args.op)
    value = cyl_constant(T, budget=args.budget, seed=args.seed)
    print("cyl(T) = %.12g  (||T|| in [%.12g, %.12g])"
          % (value, T.opnorm_lb, T.opnorm_ub))
    if args.out:
        _write_json(args.out, {"cyl": enc_float(value),
                               "opnorm_lb": enc_float(T.opnorm_lb),
                               "opnorm_ub": enc_float(T.opnorm_ub)})
    return EXIT_OK


def cmd_xi(args):
    from .regions import CurveSpec, xi_estimate

    G = _load_region(args.region)
    space = _space(args.space)
    P = Functional(_vec(args.p), space)
    value, gap, wit = xi_estimate(G, CurveSpec(P, args.alpha, args.grid, k=args.k))
    print("xi = %.9g  gap = %.9g  (witness %d nodes)" % (value, gap, len(wit)))
    if args.out:
        _write_json(args.out, {
            "value": enc_float(value), "gap": enc_float(gap),
            "witness": [[enc_float(v) for v in p] for p in wit],
        })
    return EXIT_OK


def cmd_steep(args):
    G = _load_region(args.region)
    space = _space(args.space)
    P = Functional(_vec(args.p), space)
    spec = SteepSpec(G, P, args.alpha, args.grid)
    g = build_steep(spec)
    out = _outdir(args)
    _write_fn(os.path.join(out, "g.json"), g)
    props = check_steep_properties(g, spec, seed=args.seed)
    cert = {name: {"residual": enc_float(res), "bound": enc_float(bound),
                   "ok": bool(res <= bound + 1e-12)}
            for name, (res, bound) in props.items()}
    cert["gap"] = enc_float(getattr(g, "gap", 0.0))
    _write_json(os.path.join(out, "certificate.json"), cert)
    bad = [n for n, c in cert.items() if isinstance(c, dict) and not c["ok"]]
    if args.svg and G.bbox() is not None:
        lo, hi = G.bbox()
        pad = 4 * args.grid
        _maybe_heatmap(os.path.join(out, "g.svg"), g,
                       (np.asarray(lo) - pad, np.asarray(hi) + pad),
                       title="steep function")
    for name, c in sorted(cert.items()):
        if isinstance(c, dict):
            print("%-18s residual %s bound %s %s"
                  % (name, c["residual"], c["bound"], "ok" if c["ok"] else "FAIL"))
    return EXIT_CERT if bad else EXIT_OK


def cmd_pumap(args):
    E = _load_region(args.set)
    U = _load_region(args.u)
    T = _load_op(args.op)
    g, H = build_pu_map(E, U, T, args.theta, cover_budget=args.budget,
                        seed=args.seed)
    out = _outdir(args)
    _write_fn(os.path.join(out, "g.json"), g)
    _write_json(os.path.join(out, "H.json"), H.to_doc())
    cert = pu_map_certificate(g, H, U, T, args.theta, n_points=args.points,
                              seed=args.seed)
    doc = {k: (enc_float(v) if isinstance(v, float) else v)
           for k, v in cert.items()}
    _write_json(os.path.join(out, "certificate.json"), doc)
    ok = all(v for k, v in cert.items() if k.endswith("_ok"))
    for k in sorted(cert):
        print("%-14s %s" % (k, cert[k]))
    if args.svg:
        bb = E.bbox()
        pad = 0.2
        _maybe_heatmap(os.path.join(out, "g.svg"), g,
                       (np.asarray(bb[0]) - pad, np.asarray(bb[1]) + pad),
                       title="pu derivative map")
    return EXIT_OK if ok else EXIT_CERT


def cmd_prescribe(args):
    Q = _load_region(args.q)
    E = _load_region(args.set)
    L = _load_op(args.op)
    net = build_net(E, Q, args.kmax, space=L.dom)
    gamma = net.level(args.kmax)
    f = _load_fn(args.fn) if args.fn else None
    if f is None:
        from .fn import ZeroFn

        f = ZeroFn(L.dom.dim, L.cod.dim)
    g, alpha = prescribe_derivative(f, L, args.r, gamma, args.s, Q)
    out = _outdir(args)
    _write_fn(os.path.join(out, "g.json"), g)
    # exactness certificate at every center
    worst = 0.0
    rng = np.random.default_rng(args.seed)
    for x in gamma:
        dirs = rng.standard_normal((20, L.dom.dim))
        dirs /= np.asarray(L.dom.norm(dirs))[:, None]
        u = dirs * alpha * 0.9
        resid = g.eval(x[None] + u) - g.eval(x[None]) - u @ L.matrix.T
        worst = max(worst, float(np.max(L.cod.norm(resid))))
    lip, _ = lip_estimate(g, Q, pairs=5000, seed=args.seed,
                          dom=L.dom, cod=L.cod)
    cert = {"alpha": enc_float(alpha), "centers": len(gamma),
            "exactness_residual": enc_float(worst),
            "lip_sampled": enc_float(lip)}
    _write_json(os.path.join(out, "certificate.json"), cert)
    print("centers %d alpha %.3g exactness %.3g lip %.6f"
          % (len(gamma), alpha, worst, lip))
    return EXIT_OK if worst <= 1e-9 and lip <= 1.0 + 1e-7 else EXIT_CERT


def cmd_game(args):
    E = _load_region(args.set)
    Q = _load_region(args.q)
    T = _load_op(args.op)
    policy_cls = POLICIES[args.policy]
    policy = policy_cls(T.dom, T.cod, Q, seed=args.seed)
    t = run_bm_game(E, Q, T, policy, args.rounds)
    cert = certify_transcript(t, seed=args.seed)
    out = _outdir(args)
    _write_fn(os.path.join(out, "limit.json"), t.limit)
    doc = {"policy": t.policy_name, "rounds": args.rounds,
           "levels": [{"level": c["level"], "error": enc_float(c["error"]),
                       "bound": enc_float(c["bound"]), "points": c["points"]}
                      for c in cert]}
    _write_json(os.path.join(out, "certificate.json"), doc)
    with open(os.path.join(out, "levels.csv"), "w") as fh:
        fh.write("level,error,bound,points\n")
        for c in cert:
            fh.write("%d,%.17g,%.17g,%d\n"
                     % (c["level"], c["error"], c["bound"], c["points"]))
    ok = all(c["error"] <= c["bound"] for c in cert)
    for c in cert:
        print("level %d  error %.3g  bound %.3g  points %d"
              % (c["level"], c["error"], c["bound"], c["points"]))
    return EXIT_OK if ok else EXIT_CERT


def cmd_smooth(args):
    f = _load_fn(args.fn)
    E = _load_region(args.set)
    Q = _load_region(args.q)
    g = smooth_around(E, Q, f, args.eps, seed=args.seed)
    out = _outdir(args)
    _write_fn(os.path.join(out, "g.json"), g)
    rng = np.random.default_rng(args.seed)
    bb = g.smooth_region.bbox()
    pts = rng.uniform(bb[0], bb[1], (30, f.d))
    keep = g.smooth_region.contains(pts)
    passed, worst, _ = c1_check(g, g.smooth_region, pts[keep])
    X = rng.uniform(np.asarray(Q.bbox()[0]), np.asarray(Q.bbox()[1]), (20000, f.d))
    dev = float(np.max(np.abs(g.eval(X) - f.eval(X))))
    cert = {"c1_pass": bool(passed), "c1_worst": enc_float(worst),
            "sup_deviation": enc_float(dev), "eps": enc_float(args.eps)}
    _write_json(os.path.join(out, "certificate.json"), cert)
    print("c1 %s worst %.3g  ||g-f|| %.3g <= eps %.3g"
          % (passed, worst, dev, args.eps))
    return EXIT_OK if passed and dev <= args.eps + 1e-12 else EXIT_CERT


def cmd_verify(args):
    f = _load_fn(args.fn)
    ops = _load_ops(args.ops)
    scales = [float(s) for s in args.scales.split(",")]
    rep = scan_derivative_set(f, _vec(args.point), ops, scales,
                              dirs=args.dirs, tol=args.tol, seed=args.seed,
                              exact=args.exact)
    if args.out:
        _write_json(args.out, rep.to_doc())
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write("op,scale,error\n")
            for a in range(len(ops)):
                for j, s in enumerate(rep.scales):
                    fh.write("%d,%.17g,%.17g\n" % (a, s, rep.errors[a, j]))
    for a in range(len(ops)):
        print("op %d  min error %.6g  verdict %s"
              % (a, rep.min_error(a), rep.verdict(a)))
    if args.require_pass and not all(rep.verdict(a) for a in range(len(ops))):
        return EXIT_CERT
    return EXIT_OK


def cmd_plot(args):
    if args.grid:
        vals, bb = gridfile.read_grid(args.grid)
        field = (np.linalg.norm(vals, axis=-1) if vals.shape[-1] > 1
                 else vals[..., 0])
        svg.write_heatmap(args.out, field, bb)
    else:
        f = _load_fn(args.fn)
        lo = _vec(args.bbox.split(";")[0])
        hi = _vec(args.bbox.split(";")[1])
        vals, bb = sample_fn(f, (lo, hi), args.res)
        if args.lfgf:
            gridfile.write_grid(args.lfgf, vals, bb)
        field = (np.linalg.norm(vals, axis=-1) if vals.shape[-1] > 1
                 else vals[..., 0])
        svg.write_heatmap(args.out, field, bb)
    print("wrote %s" % args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="lipforge", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_dir=True):
        sp.add_argument("--seed", type=int, default=0)
        if out_dir:
            sp.add_argument("--out", required=True)

    sp = sub.add_parser("cantor", help="four-corner set region file")
    sp.add_argument("--level", type=int, required=True)
    sp.add_argument("--ratio", type=float, default=0.25)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_cantor)

    sp = sub.add_parser("cyl", help="cylindrical constant of an operator")
    sp.add_argument("--op", required=True)
    sp.add_argument("--budget", type=int, default=64)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_cyl)

    sp = sub.add_parser("xi", help="cone-constrained curve-mass estimate")
    sp.add_argument("--region", required=True)
    sp.add_argument("--p", required=True, help="functional coefficients c1,c2")
    sp.add_argument("--space", default="l2:2")
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--grid", type=float, required=True)
    sp.add_argument("--k", type=int, default=3)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_xi)

    sp = sub.add_parser("steep", help="steep function with certificate")
    sp.add_argument("--region", required=True)
    sp.add_argument("--p", required=True)
    sp.add_argument("--space", default="l2:2")
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--grid", type=float, required=True)
    sp.add_argument("--svg", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_steep)

    sp = sub.add_parser("pumap", help="derivative map on an unrectifiable set")
    sp.add_argument("--set", required=True)
    sp.add_argument("--u", required=True)
    sp.add_argument("--op", required=True)
    sp.add_argument("--theta", type=float, required=True)
    sp.add_argument("--budget", type=int, default=6)
    sp.add_argument("--points", type=int, default=200)
    sp.add_argument("--svg", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_pumap)

    sp = sub.add_parser("prescribe", help="exact derivative prescription on a net")
    sp.add_argument("--q", required=True)
    sp.add_argument("--set", required=True)
    sp.add_argument("--op", required=True)
    sp.add_argument("--fn", help="base map DAG (default zero)")
    sp.add_argument("--r", type=float, required=True)
    sp.add_argument("--s", type=float, required=True)
    sp.add_argument("--kmax", type=int, default=2)
    common(sp)
    sp.set_defaults(func=cmd_prescribe)

    sp = sub.add_parser("game", help="nested-ball game run with certificate")
    sp.add_argument("--set", required=True)
    sp.add_argument("--q", required=True)
    sp.add_argument("--op", required=True)
    sp.add_argument("--rounds", type=int, default=4)
    sp.add_argument("--policy", choices=sorted(POLICIES), default="identity")
    common(sp)
    sp.set_defaults(func=cmd_game)

    sp = sub.add_parser("smooth", help="smooth a map around a compact set")
    sp.add_argument("--fn", required=True)
    sp.add_argument("--set", required=True)
    sp.add_argument("--q", required=True)
    sp.add_argument("--eps", type=float, required=True)
    common(sp)
    sp.set_defaults(func=cmd_smooth)

    sp = sub.add_parser("verify", help="derivative-set membership scan")
    sp.add_argument("--fn", required=True)
    sp.add_argument("--point", required=True)
    sp.add_argument("--ops", required=True)
    sp.add_argument("--scales", required=True, help="comma-separated radii")
    sp.add_argument("--tol", type=float, default=0.1)
    sp.add_argument("--dirs", type=int, default=200)
    sp.add_argument("--exact", action="store_true")
    sp.add_argument("--require-pass", action="store_true")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.add_argument("--csv")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("plot", help="heatmap SVG from a grid file or DAG")
    sp.add_argument("--grid", help="binary grid file")
    sp.add_argument("--fn", help="DAG JSON (needs --bbox)")
    sp.add_argument("--bbox", help="lo;hi as x0,y0;x1,y1")
    sp.add_argument("--res", type=int, default=128)
    sp.add_argument("--lfgf", help="also write the sampled grid here")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_plot)
    return p


def run_cli(argv):
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        apply_thread_cap()
        if args.command == "plot" and not (args.grid or (args.fn and args.bbox)):
            raise InputError("plot needs --grid or --fn with --bbox")
        return args.func(args)
    except _RESOLUTION_ERRORS as e:
        print("resolution/budget error: %s" % e, file=sys.stderr)
        return EXIT_RESOLUTION
    except _CERT_ERRORS as e:
        print("certificate violation: %s" % e, file=sys.stderr)
        return EXIT_CERT
    except _CONFIG_ERRORS as e:
        print("configuration error: %s" % e, file=sys.stderr)
        return EXIT_CONFIG
    except LipforgeError as e:
        print("configuration error: %s" % e, file=sys.stderr)
        return EXIT_CONFIG


def main():
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
