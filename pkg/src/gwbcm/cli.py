"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys

import numpy as np

from .analysis import analyze_blowup, analyze_fixed_point
from .blowup import DEFAULT_MAX_SIZE, DEFAULT_SUPPORT_TOL, blowup_multi
from .dataio import (
    lambda_result_dict,
    load_any_network,
    load_point_cloud,
    network_to_dict,
    parse_mask,
    sample_simplex_dirichlet,
)
from .errors import DataError, GWError, NotConverged, NumericalError
from .gw import GwSolverConfig, gw_distance
from .mds import classical_mds
from .network import as_simplex
from .pipeline import experiment_classify, experiment_occlusion, experiment_recover
from .qp import QpConfig
from .synthesis import INITS, SynthesisConfig, geodesic_interpolate, synthesize_barycenter

log = logging.getLogger("gwbcm")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4

SCHEMAS = """\
file formats:
  network JSON   {"size": M, "weights": [[w11, ..., w1M], ...], "masses": [p1, ..., pM]}
                 weights row-major, masses positive and summing to 1
  point CSV      rows "x,y" or "x,y,z", optional trailing mass column; a first
                 line with a non-numeric first token is a header, and a last
                 header column named mass/weight/p/q marks the mass column.
                 A .csv path where a network is expected is converted to its
                 Euclidean distance network; --as-network reads it instead as
                 a square weight matrix with uniform masses.
  lambda JSON    {"lambda": [...], "residual": r, "normalized_residual": r_hat,
                  "method": "fixed_point"|"blowup", "seed": n}
"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("formatter_class", argparse.RawDescriptionHelpFormatter)
        kwargs.setdefault("epilog", SCHEMAS)
        super().__init__(*args, **kwargs)


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError("expected an integer >= 1")
    return v


def _add_common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("GW solver")
    g.add_argument("--method", default="frank-wolfe", choices=["frank-wolfe", "entropic", "brute"],
                   help="GW backend (default: frank-wolfe)")
    g.add_argument("--epsilon", type=float, default=None, help="entropic regularization")
    g.add_argument("--tol", type=float, default=1e-9, help="relative solver tolerance")
    g.add_argument("--max-iter", type=_positive_int, default=1000)
    g.add_argument("--restarts", type=_positive_int, default=1, help="random restarts, best kept")
    g.add_argument("--gw-init", default="product", choices=["product", "identity_like"])
    p.add_argument("--seed", type=int, default=0, help="seed for all randomness (default 0)")
    p.add_argument("--output", "-o", default=None, help="output path (default: stdout)")
    p.add_argument("--as-network", action="store_true", help="read .csv inputs as weight matrices")
    p.add_argument("--allow-unconverged", action="store_true",
                   help="write results even when an iteration did not converge")
    p.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1)
    p.add_argument("-v", "--verbose", action="count", default=0)


def _add_support(p):
    p.add_argument("--support-tol", type=float, default=DEFAULT_SUPPORT_TOL,
                   help="plan entries at or below this fraction of the largest are dropped")
    p.add_argument("--max-size", type=_positive_int, default=DEFAULT_MAX_SIZE, help="cap on blown-up size")


def _add_synth(p):
    g = p.add_argument_group("synthesis")
    g.add_argument("--size", type=_positive_int, default=None, help="nodes in the output (default: first template)")
    g.add_argument("--masses", default="uniform", help="'uniform' or a path to a JSON list / network")
    g.add_argument("--init", default="random_seeded", choices=[i for i in INITS if i != "custom"])
    g.add_argument("--max-outer-iter", type=_positive_int, default=100)
    g.add_argument("--fp-tol", type=float, default=1e-9)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gwbcm", description="Gromov-Wasserstein barycentric coding toolkit.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("dist", help="GW distance between two networks",
                       description='Writes {"gw2", "gw", "converged", "iterations", "method"} as JSON.')
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--plan", action="store_true", help="include the optimal plan")
    _add_common(p)

    p = sub.add_parser("synth", help="iterative barycenter synthesis",
                       description="Writes the barycenter as a network JSON.")
    p.add_argument("--templates", nargs="+", required=True)
    p.add_argument("--lambda", dest="lam", type=_floats, required=True, help="weights, e.g. 0.2,0.3,0.5")
    _add_synth(p)
    _add_common(p)

    p = sub.add_parser("geodesic", help="point on the GW geodesic between two networks",
                       description="Writes the interpolated network as JSON.")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--t", type=float, required=True, help="time in [0, 1]")
    _add_support(p)
    _add_common(p)

    p = sub.add_parser("blowup", help="blow up templates against a reference network",
                       description='Writes {"size_b", "q_b", "templates_b", "reference_b", "index_maps", '
                                   '"reference_map", "costs"} as JSON.')
    p.add_argument("--templates", nargs="+", required=True)
    p.add_argument("--input", required=True, help="reference network")
    _add_support(p)
    _add_common(p)

    for name, desc in (("analyze", "fixed-point"), ("analyze-bu", "blow-up")):
        p = sub.add_parser(name, help=f"barycentric coordinates by the {desc} route",
                           description="Writes a lambda JSON.")
        p.add_argument("--templates", nargs="+", required=True)
        p.add_argument("--input", required=True)
        p.add_argument("--qp-method", default="projected_gradient",
                       choices=["projected_gradient", "conditional_gradient"])
        p.add_argument("--qp-tol", type=float, default=1e-10)
        if name == "analyze-bu":
            _add_support(p)
        _add_common(p)

    p = sub.add_parser("mds", help="classical MDS embedding of a network",
                       description="Writes a point CSV (x0,..,x{d-1},mass); the strain goes to stderr with -v.")
    p.add_argument("input")
    p.add_argument("--dim", type=_positive_int, default=2)
    _add_common(p)

    p = sub.add_parser("experiment", help="desk-scale experiments")
    esub = p.add_subparsers(dest="experiment", metavar="EXPERIMENT", parser_class=_Parser)
    esub.required = True

    e = esub.add_parser("recover", help="synthesize with known weights, then analyze",
                        description='Writes {"true_lambda", "estimated_lambda", "linf_error", '
                                    '"reconstruction_gw", "method", "residual", "normalized_residual"}.')
    e.add_argument("--templates", nargs="+", required=True)
    e.add_argument("--lambda", dest="lam", type=_floats, default=None,
                   help="weights (default: uniform draw from --seed)")
    e.add_argument("--recover-method", default="fixed_point", choices=["fixed_point", "blowup", "cross"])
    _add_synth(e)
    _add_support(e)
    _add_common(e)

    e = esub.add_parser("classify", help="label queries by their largest coordinate",
                        description='Writes {"predictions", "accuracy", "kmeans_accuracy", "lambdas"}.')
    e.add_argument("--templates", nargs="+", required=True)
    e.add_argument("--labels", required=True, help="one label per template, comma-separated")
    e.add_argument("--queries", nargs="+", required=True)
    e.add_argument("--query-labels", required=True, help="one label per query, comma-separated")
    e.add_argument("--analysis", default="fixed_point", choices=["fixed_point", "blowup"])
    _add_support(e)
    _add_common(e)

    e = esub.add_parser("occlude", help="reconstruct an occluded point cloud",
                        description='Writes {"reconstruction": network JSON, "lambda", "reconstruction_gw", '
                                    '"random_lambda", "random_gw", "residual"}.')
    e.add_argument("--query", required=True, help="point CSV")
    e.add_argument("--templates", nargs="+", required=True, help="point CSVs")
    e.add_argument("--mask", required=True, help="circle:cx,cy,r | sphere:cx,cy,cz,r | box:lo..,hi..")
    e.add_argument("--analysis", default="fixed_point", choices=["fixed_point", "blowup"])
    _add_support(e)
    _add_synth(e)
    _add_common(e)
    return parser


def _solver(args) -> GwSolverConfig:
    return GwSolverConfig(method=args.method, tol=args.tol, max_iter=args.max_iter, epsilon=args.epsilon,
                          init=args.gw_init, seed=args.seed, restarts=args.restarts)


def _net(path, args):
    return load_any_network(path, as_network=args.as_network)


def _masses(args, size):
    if args.masses == "uniform":
        return None
    with open(args.masses) as fh:
        obj = json.load(fh)
    m = obj["masses"] if isinstance(obj, dict) else obj
    if len(m) != size:
        raise DataError(f"--masses has {len(m)} entries, expected {size}")
    return np.asarray(m, dtype=float)


def _synth_cfg(args, templates, solver) -> SynthesisConfig:
    size = args.size or templates[0].size
    return SynthesisConfig(target_size=size, target_masses=_masses(args, size), max_outer_iter=args.max_outer_iter,
                           fp_tol=args.fp_tol, init=args.init, solver=solver, seed=args.seed, threads=args.threads)


def _require(converged: bool, what: str, args) -> None:
    if not converged:
        if args.allow_unconverged:
            log.warning("%s did not converge", what)
        else:
            raise NotConverged(f"{what} did not converge (use --allow-unconverged to keep the result)")


def _cmd_dist(args):
    res = gw_distance(_net(args.first, args), _net(args.second, args), _solver(args))
    _require(res.converged, "GW solver", args)
    out = {"gw2": float(res.cost), "gw": float(res.gw), "converged": bool(res.converged),
           "iterations": int(res.iterations), "method": args.method.replace("-", "_")}
    if args.plan:
        out["plan"] = res.coupling.plan.tolist()
    return out


def _cmd_synth(args):
    templates = [_net(t, args) for t in args.templates]
    Y, diag = synthesize_barycenter(templates, as_simplex(args.lam), _synth_cfg(args, templates, _solver(args)))
    log.info("synthesis: %d iterations, final change %.3e", diag.iterations, diag.change_trace[-1])
    _require(diag.converged, "barycenter synthesis", args)
    return network_to_dict(Y)


def _cmd_geodesic(args):
    X, Y = _net(args.first, args), _net(args.second, args)
    return network_to_dict(geodesic_interpolate(X, Y, args.t, _solver(args), support_tol=args.support_tol))


def _cmd_blowup(args):
    templates = [_net(t, args) for t in args.templates]
    al = blowup_multi(templates, _net(args.input, args), _solver(args), args.support_tol, args.max_size)
    return {
        "size_b": al.size_b,
        "q_b": al.q_b.tolist(),
        "templates_b": [B.tolist() for B in al.templates_b],
        "reference_b": al.reference_b.tolist(),
        "index_maps": [m.tolist() for m in al.index_maps],
        "reference_map": al.reference_map.tolist(),
        "costs": [float(c) for c in al.costs],
    }


def _cmd_analyze(args):
    templates = [_net(t, args) for t in args.templates]
    Y = _net(args.input, args)
    qp = QpConfig(method=args.qp_method, tol=args.qp_tol)
    if args.command == "analyze":
        res = analyze_fixed_point(templates, Y, _solver(args), qp, threads=args.threads)
    else:
        res = analyze_blowup(templates, Y, _solver(args), args.support_tol, qp)
    log.info("kkt residual %.3e, unique=%s", res.kkt_residual, res.unique)
    return lambda_result_dict(res.lam, res.residual, res.normalized_residual, res.method, args.seed)


def _cmd_mds(args):
    net = _net(args.input, args)
    emb = classical_mds(net.weights, args.dim)
    log.info("strain %.3e", emb.strain)
    buf = io.StringIO()
    buf.write(",".join([f"x{i}" for i in range(args.dim)] + ["mass"]) + "\n")
    for row, m in zip(emb.points, net.masses):
        buf.write(",".join(repr(float(v)) for v in row) + f",{float(m)!r}\n")
    return buf.getvalue()


def _cmd_recover(args):
    templates = [_net(t, args) for t in args.templates]
    solver = _solver(args)
    lam = args.lam if args.lam is not None else sample_simplex_dirichlet(len(templates), args.seed)
    rep = experiment_recover(templates, as_simplex(lam), args.recover_method, solver=solver,
                             synth=_synth_cfg(args, templates, solver), support_tol=args.support_tol)
    _require(rep.synthesis_converged, "barycenter synthesis", args)
    return {
        "true_lambda": rep.true_lambda.tolist(),
        "estimated_lambda": rep.estimated_lambda.tolist(),
        "linf_error": rep.linf_error,
        "reconstruction_gw": float(rep.reconstruction_gw),
        "method": rep.method,
        "residual": float(rep.residual),
        "normalized_residual": float(rep.normalized_residual),
    }


def _labels(text):
    return [t.strip() for t in text.split(",")]


def _cmd_classify(args):
    templates = [_net(t, args) for t in args.templates]
    queries = [_net(q, args) for q in args.queries]
    labels, qlabels = _labels(args.labels), _labels(args.query_labels)
    if len(labels) != len(templates) or len(qlabels) != len(queries):
        raise UsageError("need one label per template and one per query")
    rep = experiment_classify(queries, qlabels, templates, labels, method=args.analysis, solver=_solver(args),
                              support_tol=args.support_tol, seed=args.seed)
    return {"predictions": rep.predictions, "accuracy": rep.accuracy, "kmeans_accuracy": rep.kmeans_accuracy,
            "lambdas": rep.lambdas.tolist()}


def _cmd_occlude(args):
    query = load_point_cloud(args.query)
    templates = [load_point_cloud(t) for t in args.templates]
    solver = _solver(args)
    synth = SynthesisConfig(target_size=query.size, max_outer_iter=args.max_outer_iter, fp_tol=args.fp_tol,
                            init=args.init, solver=solver, seed=args.seed, threads=args.threads)
    recon, rep = experiment_occlusion(query, templates, parse_mask(args.mask), method=args.analysis, solver=solver,
                                      synth=synth, support_tol=args.support_tol, seed=args.seed)
    return {
        "reconstruction": network_to_dict(recon),
        "lambda": rep.estimated_lambda.tolist(),
        "reconstruction_gw": float(rep.reconstruction_gw),
        "random_lambda": rep.random_lambda.tolist(),
        "random_gw": float(rep.random_gw),
        "residual": float(rep.residual),
    }


COMMANDS = {
    "dist": _cmd_dist,
    "synth": _cmd_synth,
    "geodesic": _cmd_geodesic,
    "blowup": _cmd_blowup,
    "analyze": _cmd_analyze,
    "analyze-bu": _cmd_analyze,
    "mds": _cmd_mds,
    "recover": _cmd_recover,
    "classify": _cmd_classify,
    "occlude": _cmd_occlude,
}


def _emit(payload, path) -> None:
    text = payload if isinstance(payload, str) else json.dumps(payload) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s: %(message)s")
    name = args.experiment if args.command == "experiment" else args.command
    try:
        _emit(COMMANDS[name](args), args.output)
    except UsageError as exc:
        print(f"gwbcm: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"gwbcm: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (GWError, OSError) as exc:
        print(f"gwbcm: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (KeyError, json.JSONDecodeError) as exc:
        print(f"gwbcm: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main(argv=None) -> int:
    return run(argv)


__all__ = ["build_parser", "run", "main"]
