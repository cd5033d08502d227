"""Command-line entry point: ``consensus-net {generate,simulate,forkstats,experiment}``."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import engine as eng
from . import experiments as ex
from . import graph as gr
from . import orderstats as os_
from .errors import DisconnectedGraphError, InputError, IntegrityError, ParameterError
from .seeds import derive_seed

ENSEMBLE_KEYS = ("ensemble", "n", "p", "sizes", "matrix", "m", "ba_interpret")


class UsageError(Exception):
    pass


# -- config files -------------------------------------------------------------


def read_config(path: str) -> dict[str, str]:
    """Flat ``key = value`` text; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise InputError(f"{path}:{lineno}: expected key=value")
            out[key.strip().replace("-", "_")] = val.strip()
    return out


def _apply_config(parser: argparse.ArgumentParser, args: argparse.Namespace, argv: list[str]) -> None:
    if not getattr(args, "config", None):
        return
    values = read_config(args.config)
    actions = {a.dest: a for a in parser._actions if a.dest not in ("help", "config", "command")}
    given = set()
    for tok in argv:
        if tok.startswith("--"):
            given.add(tok[2:].split("=", 1)[0].replace("-", "_"))
    for key, val in values.items():
        if key not in actions:
            raise UsageError(f"unknown config key {key!r}")
        if key in given:
            continue
        act = actions[key]
        if isinstance(act, argparse._StoreTrueAction):
            setattr(args, key, val.lower() in ("1", "true", "yes", "on"))
        else:
            try:
                setattr(args, key, act.type(val) if act.type else val)
            except (TypeError, ValueError) as exc:
                raise UsageError(f"config key {key}: {exc}") from exc


# -- argument types -----------------------------------------------------------


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _matrix(text: str):
    if text == "paper":
        return gr.DEFAULT_SBM_MATRIX
    return tuple(tuple(float(x) for x in row.split(",")) for row in text.split(";"))


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("CONSENSUS_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise UsageError(f"CONSENSUS_SEED must be an integer, got {env!r}") from exc
    return 0


def _header(items) -> str:
    return "".join(f"# {k}={v}\n" for k, v in items)


def _effective(args, keys) -> list[tuple[str, str]]:
    out = []
    for k in keys:
        v = getattr(args, k)
        if isinstance(v, tuple):
            v = ";".join(",".join(map(str, r)) if isinstance(r, tuple) else str(r) for r in v)
        out.append((k, str(v)))
    return out


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file; flags override it")
    p.add_argument("--seed", type=int, default=None, help="master seed (fallback: $CONSENSUS_SEED, then 0)")
    p.add_argument("--outdir", default=".", help="output directory")


def _add_ensemble(p: argparse.ArgumentParser, default: str | None = "er") -> None:
    p.add_argument("--ensemble", choices=sorted(ex.ENSEMBLE_NAMES), default=default)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--p", type=float, default=8e-3)
    p.add_argument("--sizes", type=_int_list, default=gr.DEFAULT_SBM_SIZES)
    p.add_argument("--matrix", type=_matrix, default=gr.DEFAULT_SBM_MATRIX,
                   help="'paper' (four blocks, 5 within, 1 across) or rows separated by ';', entries by ','")
    p.add_argument("--m", type=int, default=8)
    p.add_argument("--ba-interpret", choices=("attachment", "mean_degree"), default="attachment")


def _make_graph(args, seed: int, connected: bool) -> tuple[gr.Graph, int]:
    rng = np.random.default_rng(seed)
    if args.ensemble == "er":
        def factory(r):
            return gr.gen_erdos_renyi(args.n, args.p, r, seed=seed)
    elif args.ensemble == "sbm":
        def factory(r):
            return gr.gen_sbm(args.sizes, args.matrix, r, seed=seed)
    else:
        m = gr.ba_attachment(args.m, args.ba_interpret)

        def factory(r):
            return gr.gen_barabasi_albert(args.n, m, r, seed=seed)
    if connected:
        return gr.sample_connected(factory, rng)
    return factory(rng), 0


# -- subcommands --------------------------------------------------------------


def cmd_generate(args) -> int:
    seed = _seed(args)
    if args.ensemble == "er" and not 0 < args.p <= 1:
        raise ParameterError(f"--p must lie in (0, 1], got {args.p}")
    g, rejections = _make_graph(args, seed, args.connected)
    text = gr.format_edgelist(g)
    head, _, body = text.partition("\n")
    extra = _effective(args, ENSEMBLE_KEYS) + [("connected", str(args.connected)),
                                               ("rejections", str(rejections))]
    out = Path(args.out) if args.out else Path(args.outdir) / "graph.txt"
    _write(out, head + "\n" + _header(extra) + body)
    print(f"wrote {out} ({g.node_count} nodes, {g.edge_count} edges)")
    return 0


def _load_rates(path: str) -> os_.RateProfile:
    try:
        with open(path, encoding="utf-8") as fh:
            vals = [float(x) for line in fh for x in line.split("#", 1)[0].replace(",", " ").split()]
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read rates from {path}: {exc}") from exc
    if len(vals) < 2:
        raise InputError(f"{path}: need at least two rates")
    try:
        return os_.RateProfile(np.array(vals))
    except ParameterError as exc:
        raise InputError(f"{path}: {exc}") from exc


def cmd_forkstats(args) -> int:
    seed = _seed(args)
    if args.rates:
        profile = _load_rates(args.rates)
        source = [("rates", args.rates)]
    else:
        if args.n < 2:
            raise ParameterError("--n must be >= 2")
        rate = args.rate if args.rate is not None else eng.calibrate_lambda(args.n, args.tsys)
        profile = os_.RateProfile.homogeneous(args.n, rate)
        source = [("n", str(args.n)), ("tsys", str(args.tsys)), ("rate", repr(rate))]
    if args.delta < 0:
        raise ParameterError("--delta must be >= 0")
    if args.mc_trials < 0:
        raise ParameterError("--mc-trials must be >= 0")
    grid_max = args.grid_max if args.grid_max is not None else 5 * os_.mean_gap(profile)
    deltas = np.linspace(0.0, grid_max, args.grid_points)
    items = source + [("delta", str(args.delta)), ("mc_trials", str(args.mc_trials)),
                      ("grid_max", repr(float(grid_max))), ("grid_points", str(args.grid_points)),
                      ("seed", str(seed))]
    lines = [_header(items), "delta,density,cdf,fork_prob_linear,fork_prob_exact\n"]
    for row in os_.evaluation_grid(profile, deltas):
        lines.append(",".join(f"{x:.9g}" for x in row) + "\n")
    outdir = Path(args.outdir)
    _write(outdir / "forkstats.csv", "".join(lines))

    lin = os_.fork_probability(args.delta, profile, "linear")
    exact = os_.fork_probability(args.delta, profile, "exact")
    summary = [("delta", f"{args.delta}"), ("linear", f"{lin:.6f}"), ("exact", f"{exact:.6f}"),
               ("mean_gap", f"{os_.mean_gap(profile):.6f}"),
               ("expected_min_time", f"{os_.expected_min_time(profile):.6f}")]
    if args.mc_trials:
        sample = os_.mc_gap_oracle(profile, args.mc_trials, derive_seed(seed, "forkstats/mc"))
        p, se = sample.fork_fraction(args.delta)
        summary += [("mc", f"{p:.6f}"), ("mc_se", f"{se:.6f}")]
    line = " ".join(f"{k}={v}" for k, v in summary)
    _write(outdir / "forkstats_summary.txt", _header(items) + line + "\n")
    print(line)
    return 0


def cmd_experiment(args) -> int:
    seed = _seed(args)
    cfg = ex.EnsembleConfig(
        ensemble=args.ensemble, n=args.n, p=args.p, sizes=args.sizes, matrix=args.matrix, m=args.m,
        ba_interpret=args.ba_interpret, t_star=args.t_star, reps=args.reps, graphs=args.graphs,
        dts=args.dts, quantiles=args.quantiles, seed=seed, mode=args.mode, opponent=args.opponent,
        max_steps=args.max_steps, tsys=args.tsys,
    )
    if args.jobs < 1:
        raise ParameterError("--jobs must be >= 1")
    outdir = Path(args.outdir)
    if args.experiment == "centrality":
        res = ex.centrality_win_experiment(cfg, jobs=args.jobs)
        _write(outdir / "win_curve.csv", ex.format_win_curve(res))
        _write(outdir / "win_curve_mean.csv", ex.format_win_curve_mean(res))
        print(f"wrote {outdir / 'win_curve.csv'} and {outdir / 'win_curve_mean.csv'}")
    else:
        res = ex.cluster_size_experiment(cfg, jobs=args.jobs)
        _write(outdir / "cluster_sizes.csv", ex.format_cluster_sizes(res))
        _write(outdir / "cluster_sizes_mean.csv", ex.format_cluster_sizes_mean(res))
        print(f"wrote {outdir / 'cluster_sizes.csv'} and {outdir / 'cluster_sizes_mean.csv'}")
    return 0


def cmd_simulate(args) -> int:
    seed = _seed(args)
    if args.steps < 0:
        raise ParameterError("--steps must be >= 0")
    if args.graph:
        g = gr.read_edgelist(args.graph)
        gsrc = [("graph", args.graph)]
    else:
        g, _ = _make_graph(args, derive_seed(seed, "simulate/graph"), connected=True)
        gsrc = _effective(args, ENSEMBLE_KEYS)
    rate = args.rate if args.rate is not None else eng.calibrate_lambda(g.node_count, args.tsys)
    mining = eng.MiningConfig(rate, target_system_time=args.tsys)
    state = eng.SimState(g, eng.EngineConfig(mining=mining), seed=derive_seed(seed, "simulate/run"))
    items = gsrc + [("nodes", str(g.node_count)), ("tsys", str(args.tsys)), ("rate", repr(rate)),
                    ("steps", str(args.steps)), ("seed", str(seed)), ("mode", "full")]
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "trajectory.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_header(items))
        fh.write(",".join(eng.TRAJECTORY_COLUMNS) + "\n")
        summary = eng.simulate(state, args.steps, fh)
    _write(outdir / "simulate_summary.txt", _header(items) + summary.to_text())
    sys.stdout.write(summary.to_text())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="consensus-net", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample a graph and write it as an edge list")
    _add_common(p)
    _add_ensemble(p)
    p.add_argument("--connected", action="store_true", help="resample until connected")
    p.add_argument("--out", help="output file (default OUTDIR/graph.txt)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate", help="free-running mining simulation with a trajectory log")
    _add_common(p)
    _add_ensemble(p)
    p.add_argument("--graph", help="edge-list file; overrides the ensemble flags")
    p.add_argument("--tsys", type=float, default=600.0, help="target expected system mining time (steps)")
    p.add_argument("--rate", type=float, default=None, help="per-miner rate; overrides --tsys calibration")
    p.add_argument("--steps", type=int, default=10_000)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("forkstats", help="order statistics of mining times and fork probability")
    _add_common(p)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--tsys", type=float, default=600.0)
    p.add_argument("--rate", type=float, default=None, help="per-miner rate; overrides --tsys")
    p.add_argument("--rates", help="file of per-miner rates (heterogeneous profile)")
    p.add_argument("--delta", type=float, default=8.7)
    p.add_argument("--mc-trials", type=int, default=100_000)
    p.add_argument("--grid-max", type=float, default=None)
    p.add_argument("--grid-points", type=int, default=101)
    p.set_defaults(func=cmd_forkstats)

    p = sub.add_parser("experiment", help="cluster-size or centrality-win sweep")
    _add_common(p)
    _add_ensemble(p)
    p.add_argument("--experiment", choices=("cluster-size", "centrality"), required=False,
                   default="centrality")
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--graphs", type=int, default=10)
    p.add_argument("--dts", type=_int_list, default=(0, 1, 2, 3))
    p.add_argument("--quantiles", type=_float_list, default=ex.DEFAULT_QUANTILES)
    p.add_argument("--t-star", type=int, default=None)
    p.add_argument("--mode", choices=("propagation", "full"), default="propagation")
    p.add_argument("--opponent", choices=("resampled", "fixed"), default="resampled")
    p.add_argument("--max-steps", type=int, default=100_000)
    p.add_argument("--tsys", type=float, default=600.0, help="mining calibration for --mode full")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    try:
        _apply_config(sub, args, argv)
        return args.func(args)
    except (UsageError, ParameterError, InputError, DisconnectedGraphError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except IntegrityError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
