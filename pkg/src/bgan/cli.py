"""Command-line front end: run experiments, analyze equilibria, report runs.

Every error path prints a greppable code (BGAN_ERR_CONFIG, BGAN_ERR_TRAINING,
BGAN_ERR_USAGE, BGAN_ERR_INTERNAL) on stderr and exits nonzero: 2 for
configuration problems, 3 for training failures, 1 for anything unexpected.
The resolved config echoed into the output directory is itself a runnable
config that reproduces the run bit-for-bit.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import (
    ExperimentConfig,
    build_graph,
    build_shards,
    build_weights,
    load_config,
    parse_config,
    render_config,
    validate_config,
)
from .datasets import noise_batch
from .equilibrium import (
    LN4,
    game_value,
    lambda_matrix,
    mixture,
    point_mass,
    solve_equilibrium_direct,
    solve_equilibrium_jacobi,
)
from .errors import ConfigError, TrainingError
from .metrics import default_grid, histogram
from .nn import forward, load_mlp, save_mlp
from .rng import stream
from .topology import is_strongly_connected
from .training import load_report_rows, run_experiment, save_report

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_TRAINING = 3

NASH_TOL = 1e-8


class _Parser(argparse.ArgumentParser):
    # argparse exits on its own; route that through the greppable convention
    def error(self, message):
        print(f"BGAN_ERR_USAGE: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _build_parser() -> _Parser:
    parser = _Parser(prog="bgan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train an experiment and write artifacts")
    run.add_argument("--config", required=True, help="experiment config file")
    run.add_argument("--seed", type=int, default=None, help="override seed")
    run.add_argument("--arch", default=None, help="override architecture")
    run.add_argument("--deterministic", action="store_true",
                     help="single worker, fixed schedules")
    run.add_argument("--out", default="bgan-out", help="output directory")

    analyze = sub.add_parser("analyze",
                             help="solve the equilibrium system for a config")
    analyze.add_argument("--config", required=True, help="experiment config file")
    analyze.add_argument("--out", default="bgan-analysis", help="output directory")
    analyze.add_argument("--pdata", choices=("point", "data"), default="point",
                         help="synthetic one-bin-per-agent masses, or the "
                              "config's dataset discretized on the default grid")

    report = sub.add_parser("report", help="summarize a finished run directory")
    report.add_argument("run_dir", help="directory holding report.csv")
    report.add_argument("--compare", default=None,
                        help="second run directory for side-by-side deltas")
    report.add_argument("--out", default=None,
                        help="where scatter CSVs go (default: the run dir)")
    return parser


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.arch is not None:
        cfg = replace(cfg, arch=args.arch)
    env_threads = os.environ.get("BGAN_THREADS")
    if env_threads is not None:
        try:
            cap = int(env_threads)
        except ValueError:
            raise ConfigError(f"BGAN_THREADS must be an integer, got {env_threads!r}")
        if cap < 1:
            raise ConfigError("BGAN_THREADS must be >= 1")
        cfg = replace(cfg, threads=min(cfg.threads, cap))
    if args.deterministic:
        cfg = replace(cfg, threads=1)
    return cfg


def cmd_run(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    validate_config(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    report = run_experiment(cfg)

    (out / "resolved.ini").write_text(report.config_echo, encoding="utf-8")
    save_report(report, out / "report.csv")
    for agent in report.agents:
        if agent.g is not None:
            save_mlp(agent.g, out / f"agent{agent.agent_id}_g.ckpt")
        save_mlp(agent.d, out / f"agent{agent.agent_id}_d.ckpt")
    if report.server is not None:
        save_mlp(report.server.g, out / "central_g.ckpt")

    print(f"run complete: arch={cfg.arch} agents={cfg.n_agents} "
          f"rounds={report.final_round()} seed={cfg.seed}")
    print(f"mean final jsd: {report.mean_jsd():.6f}")
    print(f"wall clock: {report.wall_clock_s:.2f}s")
    print(f"artifacts: {out / 'report.csv'}")
    return EXIT_OK


def _analysis_pdata(cfg: ExperimentConfig, mode: str) -> list:
    if mode == "point":
        return [point_mass(cfg.n_agents, i) for i in range(cfg.n_agents)]
    grid = default_grid()
    return [histogram(shard, grid) for shard in build_shards(cfg)]


def cmd_analyze(args) -> int:
    cfg = load_config(args.config)
    validate_config(cfg)
    graph = build_graph(cfg)
    sizes = [len(s) for s in build_shards(cfg)] \
        if cfg.weights_kind == "proportional" else [1] * cfg.n_agents
    weights = build_weights(cfg, graph, sizes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    lam = lambda_matrix(weights)
    np.savetxt(out / "lambda.csv", lam, delimiter=",", fmt="%.17g")

    p_data = _analysis_pdata(cfg, args.pdata)
    direct = solve_equilibrium_direct(weights, p_data)
    jacobi = solve_equilibrium_jacobi(weights, p_data)
    # at the fixed point every agent's positive mixture equals its own
    # generator distribution, which is what pins the value at -n ln 4
    blends = [
        mixture(p_data[i],
                [(direct.p_g_star[j], weights.B[i, j])
                 for j in graph.in_neighbors(i)],
                weights.C[i])
        for i in range(graph.n)
    ]
    value = game_value(blends, direct.p_g_star)
    target = -cfg.n_agents * LN4

    print(f"agents: {graph.n}, edges: {len(graph.edges)}")
    if is_strongly_connected(graph):
        print("connectivity: strongly connected")
    else:
        print("connectivity: not strongly connected")
    print(f"lambda.csv: {out / 'lambda.csv'}")
    if cfg.graph_kind == "ring":
        hops = "  ".join(
            f"hop {m}: {lam[0, (0 - m) % graph.n]:.4f}"
            for m in range(1, graph.n))
        print(f"influence on agent 0 by hop: self: {lam[0, 0]:.4f}  {hops}")
    print(f"jacobi iterations: {jacobi.iterations} "
          f"(residual {jacobi.residual:.3e})")
    print(f"game value at equilibrium: {value:.12f} (target {target:.12f})")
    if abs(value - target) <= NASH_TOL:
        print("nash equilibrium: confirmed")
    else:
        print(f"nash equilibrium: NOT confirmed (gap {abs(value - target):.3e})")
    return EXIT_OK


def _final_rows(path: Path) -> dict:
    rows = load_report_rows(path)
    if not rows:
        raise ConfigError(f"{path} holds no data rows")
    final = max(r.round for r in rows)
    return {r.agent: r for r in rows if r.round == final}


def _emit_scatter(run_dir: Path, out: Path) -> list:
    resolved = run_dir / "resolved.ini"
    if not resolved.is_file():
        return []
    cfg = parse_config(resolved.read_text(encoding="utf-8"))
    written = []
    checkpoints = sorted(run_dir.glob("agent*_g.ckpt")) + \
        list(run_dir.glob("central_g.ckpt"))
    for ckpt in checkpoints:
        g = load_mlp(ckpt)
        rng = stream(cfg.seed, "report-scatter", ckpt.stem)
        samples = forward(g, noise_batch(g.input_dim, 2000, rng))
        target = out / f"scatter_{ckpt.stem.removesuffix('_g')}.csv"
        np.savetxt(target, samples, delimiter=",", fmt="%.17g")
        written.append(target)
    return written


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    report_path = run_dir / "report.csv"
    if not report_path.is_file():
        raise ConfigError(f"{run_dir} has no report.csv")
    finals = _final_rows(report_path)
    final_round = next(iter(finals.values())).round

    print(f"run: {run_dir} (final round {final_round})")
    print(f"{'agent':>5}  {'jsd':>10}  {'d_real':>8}  {'d_fake':>8}  {'comm/round':>10}")
    for agent_id in sorted(finals):
        r = finals[agent_id]
        print(f"{agent_id:>5}  {r.jsd:>10.6f}  {r.d_real_mean:>8.4f}  "
              f"{r.d_fake_mean:>8.4f}  {r.comm_units:>10d}")
    per_round = sum(r.comm_units for r in finals.values())
    mean_jsd = float(np.mean([r.jsd for r in finals.values()]))
    print(f"mean jsd: {mean_jsd:.6f}")
    print(f"comm: {per_round} units/round, "
          f"{per_round * final_round} total over {final_round} rounds")

    out = Path(args.out) if args.out else run_dir
    out.mkdir(parents=True, exist_ok=True)
    for path in _emit_scatter(run_dir, out):
        print(f"scatter: {path}")

    if args.compare:
        other = _final_rows(Path(args.compare) / "report.csv")
        print(f"compare: {args.compare}")
        print(f"{'agent':>5}  {'jsd':>10}  {'other':>10}  {'delta':>10}")
        shared = sorted(set(finals) & set(other))
        for agent_id in shared:
            a, b = finals[agent_id].jsd, other[agent_id].jsd
            print(f"{agent_id:>5}  {a:>10.6f}  {b:>10.6f}  {a - b:>+10.6f}")
        delta = float(np.mean([finals[i].jsd - other[i].jsd for i in shared]))
        print(f"mean jsd delta: {delta:+.6f}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"run": cmd_run, "analyze": cmd_analyze, "report": cmd_report}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"BGAN_ERR_CONFIG: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingError as exc:
        print(f"BGAN_ERR_TRAINING: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except Exception as exc:  # noqa: BLE001 - last-resort CLI boundary
        print(f"BGAN_ERR_INTERNAL: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main())
