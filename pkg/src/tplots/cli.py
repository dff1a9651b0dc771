"""Command-line interface: ``tplots <subcommand> [options]``.

Every output carries a provenance header with the tool version, the seed and
a SHA-256 digest of the resolved configuration.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from .alloc import (
    default_L_grid,
    lagrangian_allocation,
    mu_k_sigma_allocation,
    optimize_envelope,
    sample_flows,
    saturation_probability,
)
from .bounds import bounds_table, dummy_edge, most_loaded_pair
from .complexity import verify_reduction
from .exceptions import TPlotError
from .fixtures import FIXTURES, load_fixture
from .moments import MomentTable, cache_dir, find_table, moment_tables, save_table
from .net import Network, Routing, shortest_path_routing, validate_routing, worst_case_edge_congestion
from .normality import lilliefors_test, npp_correlation, npp_data
from .stats import (
    GLOBAL,
    GaussianParams,
    TPlot,
    all_edge_tplots,
    build_tplot,
    empirical_params,
    exact_all_edges,
    exact_tplot_permutations,
    gaussian_params,
    sample_target,
    throughput_ccdf,
    tplot_stats,
)
from .tset import KINDS, Sampler, SamplerConfig, TSetSpec, convergence_diagnostics

ENVELOPE_POINTS = 8
ENVELOPE_POINTS_LONG = 40


class CLIError(Exception):
    pass


# -- shared helpers ---------------------------------------------------------

def _network(spec: str) -> Network:
    path = Path(spec)
    if path.is_file():
        return Network.from_json(path)
    name = path.name[:-5] if path.name.endswith(".json") else path.name
    if name in FIXTURES or name in ("abilene", "abilene-h"):
        return load_fixture(name)
    raise CLIError(f"network {spec!r} is neither a file nor a bundled fixture ({', '.join(FIXTURES)})")


def _routing(args, net: Network) -> Routing:
    if getattr(args, "routing", None):
        f = Routing.from_json(net, args.routing)
    else:
        f = shortest_path_routing(net)
    bad = validate_routing(net, f, tol=args.tol)
    if bad:
        first = bad[0]
        raise CLIError(f"routing violates conservation ({len(bad)} issues), e.g. commodity {first.commodity} "
                       f"at node {first.node}: residual {first.residual:.3g}")
    return f


def _tset(args, net: Network) -> TSetSpec:
    return TSetSpec.from_network(args.tset, net)


def _cfg(args) -> SamplerConfig:
    return SamplerConfig(seed=args.seed, burn_in=args.burn_in, thinning=args.thinning,
                         step_scale=args.step_scale, move=args.move)


def _digest(args) -> str:
    conf = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out")}
    return hashlib.sha256(json.dumps(conf, sort_keys=True, default=str).encode()).hexdigest()


def _provenance(args) -> list[str]:
    return [f"tplots {__version__} {args.command}", f"seed={getattr(args, 'seed', None)}",
            f"config_sha256={_digest(args)}"]


def _emit(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv(args, header: list[str], rows) -> str:
    buf = io.StringIO()
    for line in _provenance(args):
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def _json(args, doc: dict) -> str:
    doc = {"provenance": _provenance(args), **doc}
    return json.dumps(doc, indent=1, default=_jsonable) + "\n"


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"not serializable: {type(x)}")


def _emit_tplot(args, tp: TPlot) -> None:
    if args.format == "json":
        _emit(args, _json(args, tp.to_dict()))
    else:
        _emit(args, tp.to_csv(header_lines=tuple(_provenance(args))))


def _params_for(net, f, tset, edges, args) -> dict:
    """Gaussian parameters per edge, loading or computing a moment table when needed."""
    table = None
    if tset.kind not in ("P", "P_d"):
        if args.moments:
            table = MomentTable.load(args.moments)
        else:
            try:
                table = find_table(tset)
            except TPlotError:
                if not args.compute_moments:
                    raise
                table = moment_tables(tset, _cfg(args), args.moment_samples)
                save_table(table)
    return {e: gaussian_params(net, f, e, tset, moments=table) for e in edges}


# -- subcommands ------------------------------------------------------------

def cmd_tplot_edge(args):
    net = _network(args.network)
    f = _routing(args, net)
    tp = build_tplot(net, f, _tset(args, net), args.edge, args.samples, args.bins, cfg=_cfg(args), chains=args.chains)
    _emit_tplot(args, tp)


def cmd_tplot_global(args):
    net = _network(args.network)
    f = _routing(args, net)
    tp = build_tplot(net, f, _tset(args, net), GLOBAL, args.samples, args.bins, cfg=_cfg(args), chains=args.chains)
    if args.throughput:
        tp = throughput_ccdf(tp)
    _emit_tplot(args, tp)


def cmd_exact_tplot(args):
    net = _network(args.network)
    f = _routing(args, net)
    if args.tset not in ("P", "P_d"):
        raise CLIError("exact enumeration is available for --tset P or P_d only")
    target = GLOBAL if args.global_ or not args.edge else args.edge
    tp = exact_tplot_permutations(net, f, target, zero_diagonal=args.tset == "P_d",
                                  limit=args.limit, long_run=args.long_run)
    if args.throughput:
        tp = throughput_ccdf(tp) if target == GLOBAL else tp
    _emit_tplot(args, tp)


def cmd_gaussian_params(args):
    net = _network(args.network)
    f = _routing(args, net)
    tset = _tset(args, net)
    edges = [args.edge] if args.edge else list(net.edge_ids)
    params = _params_for(net, f, tset, edges, args)
    rows = [(e, p.mu, p.sigma, p.method) for e, p in params.items()]
    _emit(args, _csv(args, ["edge", "mu", "sigma", "method"], rows))


def cmd_normality(args):
    net = _network(args.network)
    f = _routing(args, net)
    x = sample_target(net, f, _tset(args, net), args.edge or GLOBAL, args.samples, _cfg(args))
    res = lilliefors_test(x, args.alpha)
    if args.npp:
        pts = npp_data(x)
        Path(args.npp).write_text(_csv(args, ["normal_quantile", "sample"], pts.tolist()))
    rows = [(args.edge or GLOBAL, res.m, res.statistic, res.critical_value, res.alpha,
             int(res.reject), npp_correlation(x), res.note)]
    _emit(args, _csv(args, ["target", "m", "statistic", "critical_value", "alpha", "reject", "npp_corr", "note"], rows))


def cmd_bounds(args):
    net = _network(args.network)
    f = _routing(args, net)
    tset = _tset(args, net)
    if args.exact:
        if args.tset not in ("P", "P_d"):
            raise CLIError("--exact needs --tset P or P_d")
        plots, glob = exact_all_edges(net, f, zero_diagonal=args.tset == "P_d", limit=args.limit)
    else:
        plots, glob = all_edge_tplots(net, f, tset, args.samples, args.bins, _cfg(args))
    dtp = None
    if args.pair or net.n_edges > 1:
        if args.pair:
            e1, e2 = args.pair.split(",")
        else:
            means = {e: tplot_stats(tp).mean for e, tp in plots.items()}
            e1, e2 = most_loaded_pair(net, {e: GaussianParams(m, 0.0, "empirical") for e, m in means.items()})
        dummy = dummy_edge(net, f, e1, e2)
        if args.exact:
            dtp = exact_tplot_permutations(net, f, dummy, zero_diagonal=args.tset == "P_d", limit=args.limit)
        else:
            dtp = build_tplot(net, f, tset, dummy, args.samples, args.bins, cfg=_cfg(args))
    hi = max(tplot_stats(glob).worst, 1e-12)
    grid = np.linspace(0.0, hi, args.grid_points)
    table = bounds_table(plots, dtp, grid, glob)
    _emit(args, _csv(args, ["L", "approx", "upper", "lower", "empirical"], table.tolist()))


def cmd_capalloc(args):
    net = _network(args.network)
    f = _routing(args, net)
    tset = _tset(args, net)
    if args.empirical:
        x = sample_flows(net, f, Sampler(tset, _cfg(args)).draw(args.samples))
        params = {e: empirical_params(x[:, k] / net.capacities[k]) for k, e in enumerate(net.edge_ids)}
    else:
        params = _params_for(net, f, tset, list(net.edge_ids), args)
    alloc = (lagrangian_allocation if args.method == "lagrangian" else mu_k_sigma_allocation)(params, args.budget)
    sat = saturation_probability(alloc, params)
    rows = [(e, params[e].mu, params[e].sigma, c) for e, c in alloc.capacities.items()]
    text = _csv(args, ["edge", "mu", "sigma", "capacity"], rows)
    text += f"# k={alloc.k!r} budget={alloc.budget!r} saturation_probability={sat!r}\n"
    _emit(args, text)


def cmd_optimize_envelope(args):
    net = _network(args.network)
    f = _routing(args, net)
    tset = _tset(args, net)
    D = Sampler(tset, _cfg(args)).draw(args.samples)
    points = args.grid_points or (ENVELOPE_POINTS_LONG if args.long_run else ENVELOPE_POINTS)
    if points > ENVELOPE_POINTS and not args.long_run:
        raise CLIError(f"more than {ENVELOPE_POINTS} grid points needs --long-run")
    grid = default_L_grid(sample_flows(net, f, D), args.budget, points)
    res = optimize_envelope(net, f, D, args.budget, grid, args.iterations, args.seed)
    rows = zip(res.L, res.envelope, res.homogeneous, res.mu_k_sigma)
    text = _csv(args, ["L", "envelope_fraction", "homogeneous_fraction", "mu_k_sigma_fraction"], rows)
    text += f"# restart_gap={res.restart_gap!r} k={res.meta['k']!r}\n"
    _emit(args, text)


def cmd_sample(args):
    if args.network:
        net = _network(args.network)
        tset = _tset(args, net)
    else:
        if args.tset in ("H", "H_surface"):
            raise CLIError("heterogeneous T-Sets need --network for the rate vectors")
        tset = TSetSpec(args.tset, args.n)
    D = Sampler(tset, _cfg(args)).draw(args.samples)
    n = tset.n
    header = [f"d{i}_{j}" for i in range(n) for j in range(n)]
    _emit(args, _csv(args, header, D.reshape(len(D), -1).tolist()))


def cmd_reduce_permanent(args):
    net = _network(args.network)
    A = np.loadtxt(args.matrix, delimiter=",", comments="#", ndmin=2)
    res = verify_reduction(net, args.edge, A)
    rows = [(res.permanent, res.scaled_mass, res.L, int(res.equal))]
    _emit(args, _csv(args, ["permanent", "n_factorial_times_pdf", "L", "equal"], rows))


def cmd_diagnostics(args):
    net = _network(args.network)
    f = _routing(args, net)
    tset = _tset(args, net)
    k = net.edge_index(args.edge)
    Fk = np.asarray(f.fractions[k]).ravel() / net.capacities[k]

    def statistic(mats):
        return mats.reshape(len(mats), -1) @ Fk

    m_values = tuple(int(float(m)) for m in args.m_values.split(","))
    rep = convergence_diagnostics(tset, _cfg(args), statistic, (args.bin_lo, args.bin_hi), m_values,
                                  args.repetitions, two_start_m=args.two_start_m)
    rows = [(m, rep.variance[m], rep.expected_variance[m]) for m in rep.m_values]
    text = _csv(args, ["m", "variance", "p_one_minus_p_over_m"], rows)
    text += f"# p={rep.p!r} sup_distance={rep.sup_distance!r} acceptance_rate={rep.acceptance_rate!r}\n"
    _emit(args, text)


def cmd_moments(args):
    if args.network:
        tset = _tset(args, _network(args.network))
    else:
        tset = TSetSpec(args.tset, args.n)
    table = moment_tables(tset, _cfg(args), args.samples)
    path = save_table(table, args.cache_dir)
    _emit(args, _json(args, {"path": str(path), "table": table.to_dict()}))


def cmd_worst_case(args):
    net = _network(args.network)
    f = _routing(args, net)
    edges = [args.edge] if args.edge else list(net.edge_ids)
    rows = [(e, worst_case_edge_congestion(net, f, e)) for e in edges]
    _emit(args, _csv(args, ["edge", "worst_case"], rows))


# -- parser -----------------------------------------------------------------

def _common(p, network=True, sampler=True, tset=True):
    if network:
        p.add_argument("--network", required=True, help="network JSON file or bundled fixture name")
        p.add_argument("--routing", help="explicit routing JSON (default: shortest paths)")
        p.add_argument("--tol", type=float, default=1e-9, help="flow conservation tolerance")
    if tset:
        p.add_argument("--tset", choices=KINDS, default="A")
    if sampler:
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--samples", type=int, default=10**5)
        p.add_argument("--bins", type=int, default=100)
        p.add_argument("--chains", type=int, default=1)
        p.add_argument("--burn-in", type=int)
        p.add_argument("--thinning", type=int)
        p.add_argument("--step-scale", type=float)
        p.add_argument("--move", choices=("coordinate", "full"), default="coordinate")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--config", help="JSON file of option defaults")


def _moment_opts(p):
    p.add_argument("--moments", help="moment table JSON (default: cache lookup)")
    p.add_argument("--compute-moments", action="store_true", help="compute and cache a missing moment table")
    p.add_argument("--moment-samples", type=int, default=10**5)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tplots", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"tplots {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tplot-edge", help="sampled T-Plot of one edge")
    _common(p)
    p.add_argument("--edge", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_tplot_edge)

    p = sub.add_parser("tplot-global", help="sampled global-congestion T-Plot")
    _common(p)
    p.add_argument("--throughput", action="store_true", help="emit the throughput CCDF instead")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_tplot_global)

    p = sub.add_parser("exact-tplot", help="exact T-Plot over all permutations or derangements")
    _common(p, sampler=False)
    p.set_defaults(tset="P", seed=None)
    p.add_argument("--edge")
    p.add_argument("--global", dest="global_", action="store_true")
    p.add_argument("--throughput", action="store_true")
    p.add_argument("--limit", type=int, default=8)
    p.add_argument("--long-run", action="store_true", help="allow n up to 11")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_exact_tplot)

    p = sub.add_parser("gaussian-params", help="per-edge load mean and SD")
    _common(p)
    _moment_opts(p)
    p.add_argument("--edge")
    p.set_defaults(func=cmd_gaussian_params)

    p = sub.add_parser("normality", help="Lilliefors test and normal probability plot data")
    _common(p)
    p.set_defaults(samples=1000)
    p.add_argument("--edge")
    p.add_argument("--alpha", type=float, choices=(0.01, 0.05, 0.20), default=0.05)
    p.add_argument("--npp", help="write normal probability plot points to this CSV")
    p.set_defaults(func=cmd_normality)

    p = sub.add_parser("bounds", help="global CDF approximation and bounds on a grid")
    _common(p)
    p.add_argument("--pair", help="dummy edge pair 'e1,e2' (default: two highest-mean edges)")
    p.add_argument("--grid-points", type=int, default=50)
    p.add_argument("--exact", action="store_true", help="exact enumeration (P or P_d)")
    p.add_argument("--limit", type=int, default=8)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("capalloc", help="capacity allocation for a budget")
    _common(p)
    _moment_opts(p)
    p.add_argument("--budget", type=float, required=True)
    p.add_argument("--method", choices=("mu-k-sigma", "lagrangian"), default="mu-k-sigma")
    p.add_argument("--empirical", action="store_true", help="estimate (mu, sigma) from samples")
    p.set_defaults(func=cmd_capalloc)

    p = sub.add_parser("optimize-envelope", help="hill-climbing envelope over allocations")
    _common(p)
    p.set_defaults(samples=10_000)
    p.add_argument("--budget", type=float, required=True)
    p.add_argument("--iterations", type=int, default=10_000)
    p.add_argument("--grid-points", type=int)
    p.add_argument("--long-run", action="store_true", help="allow the full 40-point sweep")
    p.set_defaults(func=cmd_optimize_envelope)

    p = sub.add_parser("sample", help="emit sampled traffic matrices as CSV rows")
    _common(p, network=False)
    p.add_argument("--network", help="network (for size and rates)")
    p.add_argument("--n", type=int, default=4)
    p.set_defaults(samples=10)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("reduce-permanent", help="check Perm(A) against n! times the T-Plot atom")
    p.add_argument("--network", required=True)
    p.add_argument("--edge", required=True)
    p.add_argument("--matrix", required=True, help="0-1 matrix as CSV")
    p.add_argument("--out")
    p.add_argument("--config")
    p.set_defaults(func=cmd_reduce_permanent, seed=None)

    p = sub.add_parser("diagnostics", help="sampler convergence diagnostics for one edge load")
    _common(p)
    p.add_argument("--edge", required=True)
    p.add_argument("--bin-lo", type=float, required=True)
    p.add_argument("--bin-hi", type=float, required=True)
    p.add_argument("--m-values", default="100,1000,10000,100000")
    p.add_argument("--repetitions", type=int, default=50)
    p.add_argument("--two-start-m", type=int)
    p.set_defaults(func=cmd_diagnostics)

    p = sub.add_parser("moments", help="precompute and cache a moment table")
    _common(p, network=False)
    p.add_argument("--network")
    p.add_argument("--n", type=int, default=11)
    p.add_argument("--cache-dir", default=None, help=f"default: $TPLOTS_CACHE_DIR or {cache_dir()}")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("worst-case", help="exact worst-case edge congestion")
    _common(p, sampler=False, tset=False)
    p.add_argument("--edge")
    p.set_defaults(func=cmd_worst_case, seed=None)
    return parser


def _apply_config(parser, argv):
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            conf = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CLIError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(conf, dict):
            raise CLIError("config must be a JSON object")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        conf = {k.replace("-", "_"): v for k, v in conf.items()}
        unknown = set(conf) - known
        if unknown:
            raise CLIError(f"unknown config keys: {', '.join(sorted(unknown))}")
        sub.set_defaults(**conf)
        args = parser.parse_args(argv)
    for key in ("samples", "chains", "bins"):
        if getattr(args, key, 1) is not None and getattr(args, key, 1) < 1:
            raise CLIError(f"--{key} must be >= 1")
    return args


def main(argv=None) -> int:
    parser = build_parser()
    args = None
    try:
        args = _apply_config(parser, argv)
        args.func(args)
    except CLIError as exc:
        print(f"tplots: error: {exc}", file=sys.stderr)
        return 2
    except TPlotError as exc:
        frames = traceback.extract_tb(exc.__traceback__)
        module = Path(frames[-1].filename).stem if frames else "tplots"
        print(f"tplots {getattr(args, 'command', '')}: {type(exc).__name__} ({module}): {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"tplots: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
