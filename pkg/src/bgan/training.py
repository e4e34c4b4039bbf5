"""Round-based training protocols: brainstorming plus the usual baselines.

Every protocol advances in synchronous rounds.  The brainstorming round is
two-phase: all agents first generate an idea batch with their start-of-round
generator parameters, then every agent updates against a positive batch that
mixes its own real samples with received ideas, using its own idea batch as
the fakes.  Baselines (standalone, central-generator variants, federated
averaging) reuse the same primitives so that their degenerate cases collapse
onto each other bitwise: a one-agent central-generator round performs the
exact same arithmetic as a standalone round.

Randomness is strictly stream-addressed: agent i draws noise from
(seed, "noise", i) and data rows from (seed, "data", i); central generators
use agent 0's noise stream.  Evaluation draws from fresh (seed, "eval", i,
round) streams so logging cadence never perturbs training.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import (
    ARCHITECTURES,
    ExperimentConfig,
    build_graph,
    build_normalized_data,
    build_weights,
    render_config,
    validate_config,
)
from .datasets import check_dataset, noise_batch
from .errors import ConfigError, TrainingError
from .metrics import HistogramGrid, default_grid, empirical_jsd
from .nn import (
    GENERATOR_LOSS_MODES,
    Mlp,
    OptimizerState,
    discriminator_net,
    discriminator_step,
    forward,
    generator_feedback,
    generator_net,
    generator_step,
    generator_step_from,
    make_optimizer,
)
from .rng import derive_seed, stream
from .topology import MixingWeights, edgeless_graph, uniform_weights


@dataclass(eq=False)
class AgentState:
    """One agent: its shard, discriminator, optional generator, and streams."""

    agent_id: int
    d: Mlp
    data: np.ndarray
    g: Mlp | None = None
    opt_d: OptimizerState | None = None
    opt_g: OptimizerState | None = None
    noise_rng: np.random.Generator | None = None
    data_rng: np.random.Generator | None = None
    seed: int = 0

    def __post_init__(self):
        self.data = check_dataset(self.data)
        dim = self.data.shape[1]
        if self.d.input_dim != dim or self.d.output_dim != 1:
            raise ConfigError(
                f"agent {self.agent_id}: discriminator must map {dim}-D data "
                f"to one output"
            )
        if self.d.layers[-1].activation != "sigmoid":
            raise ConfigError(
                f"agent {self.agent_id}: discriminator needs a sigmoid head")
        if self.g is not None and self.g.output_dim != dim:
            raise ConfigError(
                f"agent {self.agent_id}: generator emits {self.g.output_dim}-D "
                f"samples but the data is {dim}-D"
            )

    def real_rows(self, count: int) -> np.ndarray:
        rows = self.data_rng.integers(0, self.data.shape[0], size=count)
        return self.data[rows]


def make_agent(agent_id: int, data, seed: int, noise_dim: int = 8,
               g_hidden=(32,), d_hidden=(32,), optimizer: str = "adam",
               lr_g: float = 1e-3, lr_d: float = 1e-3, beta1: float = 0.5,
               beta2: float = 0.999, with_generator: bool = True) -> AgentState:
    """Build an agent with its dedicated init/noise/data streams."""
    data = check_dataset(data)
    dim = data.shape[1]
    g = None
    opt_g = None
    if with_generator:
        g = generator_net(noise_dim, g_hidden, dim,
                          derive_seed(seed, "init_g", agent_id))
        opt_g = make_optimizer(optimizer, lr_g, beta1, beta2)
    d = discriminator_net(dim, d_hidden, derive_seed(seed, "init_d", agent_id))
    return AgentState(
        agent_id=agent_id,
        d=d,
        data=data,
        g=g,
        opt_d=make_optimizer(optimizer, lr_d, beta1, beta2),
        opt_g=opt_g,
        noise_rng=stream(seed, "noise", agent_id),
        data_rng=stream(seed, "data", agent_id),
        seed=seed,
    )


@dataclass(eq=False)
class ServerState:
    """Central generator used by the single-generator baselines."""

    g: Mlp
    opt_g: OptimizerState
    noise_rng: np.random.Generator


def make_server(data_dim: int, seed: int, noise_dim: int = 8, g_hidden=(32,),
                optimizer: str = "adam", lr_g: float = 1e-3, beta1: float = 0.5,
                beta2: float = 0.999) -> ServerState:
    # the server inherits agent 0's generator streams, which is what makes
    # the n=1 central-generator protocols collapse onto standalone exactly
    return ServerState(
        g=generator_net(noise_dim, g_hidden, data_dim, derive_seed(seed, "init_g", 0)),
        opt_g=make_optimizer(optimizer, lr_g, beta1, beta2),
        noise_rng=stream(seed, "noise", 0),
    )


def allocate_batch(pi_i: float, neighbor_weights, b: int) -> tuple:
    """Largest-remainder split of b slots across own data + each neighbor.

    Returns (own_count, per-neighbor counts); counts are nonnegative and sum
    to b exactly.  Remainder slots go to the largest fractional parts, ties
    broken toward the earlier position (own data first).
    """
    if b < 1:
        raise ConfigError("batch size must be >= 1")
    weights = np.array([pi_i, *neighbor_weights], dtype=np.float64)
    if abs(weights.sum() - 1.0) > 1e-9:
        raise ConfigError(f"batch weights sum to {weights.sum()!r}, expected 1")
    exact = weights * b
    counts = np.floor(exact).astype(np.int64)
    short = b - int(counts.sum())
    if short:
        order = np.lexsort((np.arange(len(weights)), -(exact - counts)))
        counts[order[:short]] += 1
    return int(counts[0]), tuple(int(c) for c in counts[1:])


@dataclass(eq=False)
class RoundPlan:
    """Integer batch composition for one round: per-agent own-data counts
    plus idea counts for every edge."""

    b: int
    own: tuple  # own-data rows per receiving agent
    alloc: dict  # (sender, receiver) -> idea rows

    def receiver_total(self, weights: MixingWeights, i: int) -> int:
        return self.own[i] + sum(
            self.alloc[(j, i)] for j in weights.graph.in_neighbors(i))


def build_round_plan(weights: MixingWeights, b: int) -> RoundPlan:
    own = []
    alloc = {}
    for i in range(weights.n):
        nbrs = weights.graph.in_neighbors(i)
        own_i, rest = allocate_batch(weights.C[i], [weights.B[i, j] for j in nbrs], b)
        own.append(own_i)
        for j, count in zip(nbrs, rest):
            alloc[(j, i)] = count
    return RoundPlan(b, tuple(own), alloc)


def _foreach(fn, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fn, items))
    else:
        for item in items:
            fn(item)


def _agent_scoped(agent_id: int, fn):
    try:
        return fn()
    except TrainingError as exc:
        raise TrainingError(f"agent {agent_id}: {exc}") from exc


def bgan_round(agents, weights: MixingWeights, plan: RoundPlan,
               loss_mode: str = "non_saturating", threads: int = 1) -> list:
    """One synchronous brainstorming round; returns per-agent comm units.

    Phase one generates every agent's idea batch from start-of-round
    parameters; phase two assembles positives (own rows first, then ideas
    in neighbor order), ascends each discriminator against the agent's own
    idea batch, and descends each generator on fresh noise.
    """
    b = plan.b
    graph = weights.graph
    ideas = [forward(a.g, noise_batch(a.g.input_dim, b, a.noise_rng))
             for a in agents]

    def update(i):
        agent = agents[i]
        parts = [agent.real_rows(plan.own[i])]
        parts.extend(ideas[j][:plan.alloc[(j, i)]] for j in graph.in_neighbors(i))
        positives = np.vstack(parts)

        def steps():
            discriminator_step(agent.d, agent.opt_d, positives, ideas[i])
            fresh = noise_batch(agent.g.input_dim, b, agent.noise_rng)
            generator_step(agent.g, agent.d, agent.opt_g, fresh, loss_mode)

        _agent_scoped(agent.agent_id, steps)

    _foreach(update, range(len(agents)), threads)
    x_size = agents[0].g.output_dim
    return [b * x_size if graph.out_neighbors(i) else 0 for i in range(len(agents))]


def _broadcast_fakes(server: ServerState, b: int) -> np.ndarray:
    return forward(server.g, noise_batch(server.g.input_dim, b, server.noise_rng))


def _discriminators_round(agents, fakes, threads: int):
    def update(agent):
        _agent_scoped(
            agent.agent_id,
            lambda: discriminator_step(agent.d, agent.opt_d,
                                       agent.real_rows(fakes.shape[0]), fakes))

    _foreach(update, agents, threads)


def mdgan_round(server: ServerState, agents, b: int,
                loss_mode: str = "non_saturating", threads: int = 1) -> list:
    """Central generator, per-agent discriminators; the generator descends
    the mean of all discriminators' feedback."""
    fakes = _broadcast_fakes(server, b)
    _discriminators_round(agents, fakes, threads)

    def feedback(x):
        return np.mean([generator_feedback(a.d, x, loss_mode)[1] for a in agents],
                       axis=0)

    fresh = noise_batch(server.g.input_dim, b, server.noise_rng)
    generator_step_from(server.g, server.opt_g, fresh, feedback)
    x_size = server.g.output_dim
    return [b * x_size + a.d.parameter_count for a in agents]


def f2u_round(server: ServerState, agents, b: int,
              loss_mode: str = "non_saturating", threads: int = 1) -> list:
    """Central generator trained, per fake sample, by whichever
    discriminator scores it highest (ties to the lowest agent id)."""
    fakes = _broadcast_fakes(server, b)
    _discriminators_round(agents, fakes, threads)

    def feedback(x):
        scores = np.hstack([forward(a.d, x) for a in agents])
        winner = np.argmax(scores, axis=1)
        dx = None
        for idx, agent in enumerate(agents):
            _, part = generator_feedback(agent.d, x, loss_mode,
                                         row_mask=winner == idx)
            dx = part if dx is None else dx + part
        return dx

    fresh = noise_batch(server.g.input_dim, b, server.noise_rng)
    generator_step_from(server.g, server.opt_g, fresh, feedback)
    x_size = server.g.output_dim
    return [b * x_size + 1 for _ in agents]


def check_homogeneous(agents) -> None:
    """Federated averaging needs identical layer shapes on every agent."""

    def signature(net):
        return tuple((l.in_dim, l.out_dim, l.activation) for l in net.layers)

    for a in agents[1:]:
        if signature(a.g) != signature(agents[0].g) or \
                signature(a.d) != signature(agents[0].d):
            raise ConfigError(
                f"agent {a.agent_id} has a different architecture than agent "
                f"{agents[0].agent_id}; parameter averaging needs identical "
                f"layer shapes"
            )


def flgan_round(agents, b: int, loss_mode: str = "non_saturating",
                local_steps: int = 1, threads: int = 1) -> list:
    """Each agent trains locally, then every parameter tensor is replaced
    by the equal-weight average across agents."""

    def local(agent):
        def steps():
            for _ in range(local_steps):
                fakes = forward(agent.g,
                                noise_batch(agent.g.input_dim, b, agent.noise_rng))
                discriminator_step(agent.d, agent.opt_d, agent.real_rows(b), fakes)
                fresh = noise_batch(agent.g.input_dim, b, agent.noise_rng)
                generator_step(agent.g, agent.d, agent.opt_g, fresh, loss_mode)

        _agent_scoped(agent.agent_id, steps)

    _foreach(local, agents, threads)
    for pick in (lambda a: a.g, lambda a: a.d):
        nets = [pick(a) for a in agents]
        for params in zip(*(net.parameters() for net in nets)):
            mean = np.mean(params, axis=0)
            for p in params:
                p[:] = mean
    return [a.g.parameter_count + a.d.parameter_count for a in agents]


def comm_cost(arch: str, n: int, b: int, x_size: int,
              theta_d_size: int = 0, theta_g_size: int = 0) -> int:
    """Scalar units exchanged per round under each architecture."""
    if n < 1 or b < 1 or x_size < 1:
        raise ConfigError("n, b, and x_size must be positive")
    if arch == "bgan":
        return n * b * x_size
    if arch == "standalone":
        return 0
    if arch == "mdgan":
        if theta_d_size < 1:
            raise ConfigError("mdgan cost needs a positive discriminator size")
        return n * (b * x_size + theta_d_size)
    if arch == "flgan":
        if theta_d_size < 1 or theta_g_size < 1:
            raise ConfigError("flgan cost needs positive parameter sizes")
        return n * (theta_g_size + theta_d_size)
    if arch == "f2u":
        return n * (b * x_size + 1)
    raise ConfigError(f"unknown architecture {arch!r}")


@dataclass(frozen=True)
class ReportRow:
    round: int
    agent: int
    jsd: float
    d_real_mean: float
    d_fake_mean: float
    comm_units: int


@dataclass(eq=False)
class TrainingReport:
    """Logged metrics plus the final states needed for checkpointing."""

    rows: list
    seed: int
    wall_clock_s: float
    config_echo: str = ""
    agents: list = field(default_factory=list, repr=False)
    server: ServerState | None = None

    def final_round(self) -> int:
        return self.rows[-1].round if self.rows else 0

    def agent_series(self, agent_id: int) -> list:
        return [r for r in self.rows if r.agent == agent_id]

    def mean_jsd(self, round_index: int | None = None) -> float:
        r = self.final_round() if round_index is None else round_index
        vals = [row.jsd for row in self.rows if row.round == r]
        if not vals:
            raise ConfigError(f"no logged rows for round {r}")
        return float(np.mean(vals))


REPORT_COLUMNS = ("round", "agent", "jsd", "d_real_mean", "d_fake_mean",
                  "comm_units")


def save_report(report: TrainingReport, path) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for r in report.rows:
            writer.writerow([r.round, r.agent, f"{r.jsd:.17g}",
                             f"{r.d_real_mean:.17g}", f"{r.d_fake_mean:.17g}",
                             r.comm_units])


def load_report_rows(path) -> list:
    with open(path, "r", encoding="ascii", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != REPORT_COLUMNS:
            raise ConfigError(f"{path}: unexpected report header {header!r}")
        return [ReportRow(int(a), int(b), float(c), float(d), float(e), int(f))
                for a, b, c, d, e, f in reader]


@dataclass
class TrainOptions:
    """Knobs for the round loop, architecture-independent."""

    rounds: int = 5000
    batch_size: int = 64
    log_every: int = 100
    eval_samples: int = 10_000
    loss_mode: str = "non_saturating"
    local_steps: int = 1
    threads: int = 1
    early_stop: bool = False
    early_stop_window: int = 500
    early_stop_tol: float = 1e-3
    grid: HistogramGrid | None = None

    def __post_init__(self):
        if self.rounds < 1 or self.batch_size < 1 or self.log_every < 1:
            raise ConfigError("rounds, batch_size, and log_every must be >= 1")
        if self.eval_samples < 1 or self.local_steps < 1 or self.threads < 1:
            raise ConfigError("eval_samples, local_steps, and threads must be >= 1")
        if self.loss_mode not in GENERATOR_LOSS_MODES:
            raise ConfigError(f"unknown generator loss mode {self.loss_mode!r}")
        if self.grid is None:
            self.grid = default_grid()


def _evaluate(agents, server, reference, options, seed, round_index) -> list:
    rows = []
    for agent in agents:
        rng = stream(seed, "eval", agent.agent_id, round_index)
        g = agent.g if agent.g is not None else server.g
        gen = forward(g, noise_batch(g.input_dim, options.eval_samples, rng))
        real = agent.data[rng.integers(0, agent.data.shape[0],
                                       size=options.eval_samples)]
        rows.append((
            agent.agent_id,
            empirical_jsd(gen, reference, options.grid),
            float(forward(agent.d, real).mean()),
            float(forward(agent.d, gen).mean()),
        ))
    return rows


def train(arch: str, agents, options: TrainOptions, reference, seed: int,
          weights: MixingWeights | None = None, server: ServerState | None = None,
          config_echo: str = "") -> TrainingReport:
    """Run the requested protocol for the configured number of rounds.

    ``reference`` is the sample set that per-agent generated batches are
    compared against; it must live in the same (normalized) coordinates the
    agents train in.
    """
    if arch not in ARCHITECTURES:
        raise ConfigError(f"unknown architecture {arch!r}")
    reference = check_dataset(reference)
    if arch in ("bgan", "standalone"):
        if weights is None:
            raise ConfigError(f"{arch} needs mixing weights")
        plan = build_round_plan(weights, options.batch_size)
    if arch in ("mdgan", "f2u") and server is None:
        raise ConfigError(f"{arch} needs a central generator")
    if arch == "flgan":
        check_homogeneous(agents)

    def one_round():
        if arch in ("bgan", "standalone"):
            return bgan_round(agents, weights, plan, options.loss_mode,
                              options.threads)
        if arch == "mdgan":
            return mdgan_round(server, agents, options.batch_size,
                               options.loss_mode, options.threads)
        if arch == "f2u":
            return f2u_round(server, agents, options.batch_size,
                             options.loss_mode, options.threads)
        return flgan_round(agents, options.batch_size, options.loss_mode,
                           options.local_steps, options.threads)

    rows = []
    jsd_history = []
    window = max(1, options.early_stop_window // options.log_every)
    start = time.perf_counter()
    for round_index in range(1, options.rounds + 1):
        comm = one_round()
        if round_index % options.log_every == 0 or round_index == options.rounds:
            evals = _evaluate(agents, server, reference, options, seed, round_index)
            for (agent_id, jsd_v, d_real, d_fake), units in zip(evals, comm):
                rows.append(ReportRow(round_index, agent_id, jsd_v,
                                      d_real, d_fake, units))
            jsd_history.append(float(np.mean([e[1] for e in evals])))
            if options.early_stop and len(jsd_history) >= 2 * window:
                prev = float(np.mean(jsd_history[-2 * window:-window]))
                cur = float(np.mean(jsd_history[-window:]))
                if prev - cur < options.early_stop_tol:
                    break
    return TrainingReport(
        rows=rows,
        seed=seed,
        wall_clock_s=time.perf_counter() - start,
        config_echo=config_echo,
        agents=list(agents),
        server=server,
    )


def _options_from_config(cfg: ExperimentConfig) -> TrainOptions:
    return TrainOptions(
        rounds=cfg.rounds,
        batch_size=cfg.batch_size,
        log_every=cfg.log_every,
        eval_samples=cfg.eval_samples,
        loss_mode=cfg.loss_mode,
        local_steps=cfg.local_steps,
        threads=cfg.threads,
        early_stop=cfg.early_stop,
        early_stop_window=cfg.early_stop_window,
        early_stop_tol=cfg.early_stop_tol,
    )


def _agents_from_config(cfg: ExperimentConfig, shards) -> list:
    needs_local_g = cfg.arch not in ("mdgan", "f2u")
    agents = []
    for i, shard in enumerate(shards):
        g_hidden, d_hidden = cfg.agent_widths(i)
        agents.append(make_agent(
            i, shard, cfg.seed,
            noise_dim=cfg.noise_dim,
            g_hidden=g_hidden,
            d_hidden=d_hidden,
            optimizer=cfg.optimizer,
            lr_g=cfg.lr_g,
            lr_d=cfg.lr_d,
            beta1=cfg.adam_beta1,
            beta2=cfg.adam_beta2,
            with_generator=needs_local_g,
        ))
    return agents


def run_experiment(cfg: ExperimentConfig) -> TrainingReport:
    """Materialize a config and train it end to end.

    Agents always train in normalized coordinates; the evaluation
    reference shares their affine fit so divergences are comparable
    across runs of the same config.
    """
    validate_config(cfg)
    shards, reference, _ = build_normalized_data(cfg)
    agents = _agents_from_config(cfg, shards)
    data_dim = shards[0].shape[1]

    weights = None
    server = None
    if cfg.arch == "bgan":
        graph = build_graph(cfg)
        weights = build_weights(cfg, graph, [len(s) for s in shards])
    elif cfg.arch == "standalone":
        # isolated agents: the brainstorming engine on an edgeless graph
        weights = uniform_weights(edgeless_graph(cfg.n_agents))
    elif cfg.arch in ("mdgan", "f2u"):
        server = make_server(
            data_dim, cfg.seed,
            noise_dim=cfg.noise_dim,
            g_hidden=cfg.g_hidden,
            optimizer=cfg.optimizer,
            lr_g=cfg.lr_g,
            beta1=cfg.adam_beta1,
            beta2=cfg.adam_beta2,
        )

    return train(
        cfg.arch, agents, _options_from_config(cfg), reference, cfg.seed,
        weights=weights, server=server, config_echo=render_config(cfg),
    )
