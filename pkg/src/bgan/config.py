"""Experiment configuration: INI parsing, validation, echo, and builders.

A config file has sections [graph], [weights], [dataset], [agents],
optional [agents.<id>] width overrides, and [train].  Validation gathers
every violation before raising so a bad file is fixed in one pass, and
``render_config`` emits a resolved echo that parses back to the identical
configuration (the echo of a deterministic run reproduces it bit-exactly).
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field

import numpy as np

from .datasets import (
    RingParams,
    load_dataset,
    normalize,
    partition_angular,
    partition_equal,
    sample_ring,
)
from .errors import ConfigError
from .rng import derive_seed
from .topology import (
    CommGraph,
    MixingWeights,
    edgeless_graph,
    load_graph,
    load_weights,
    proportional_weights,
    ring_graph,
    string_graph,
    uniform_weights,
)

ARCHITECTURES = ("bgan", "standalone", "mdgan", "flgan", "f2u")

GRAPH_KINDS = ("ring", "string", "edgeless", "file")
WEIGHT_KINDS = ("uniform", "proportional", "file")
DATASET_KINDS = ("ring", "file")
PARTITIONS = ("equal", "angular")


@dataclass
class ExperimentConfig:
    """Resolved experiment description; every field has a working default."""

    # graph
    graph_kind: str = "ring"
    n_agents: int = 10
    ring_k: int = 1
    graph_file: str = ""
    # weights
    weights_kind: str = "uniform"
    weights_file: str = ""
    # dataset
    dataset_kind: str = "ring"
    alpha: float = 9.0
    beta: float = 2.0
    samples_per_agent: int = 100
    partition: str = "equal"
    cuts: tuple = ()  # of (lo, hi) angle pairs, angular partition only
    dataset_file: str = ""
    # agents
    noise_dim: int = 8
    g_hidden: tuple = (32,)
    d_hidden: tuple = (32,)
    optimizer: str = "adam"
    lr_g: float = 1e-3
    lr_d: float = 1e-3
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    agent_overrides: dict = field(default_factory=dict)  # id -> {g_hidden, d_hidden}
    # train
    arch: str = "bgan"
    seed: int = 0
    rounds: int = 2000
    batch_size: int = 64
    log_every: int = 100
    eval_samples: int = 10_000
    loss_mode: str = "non_saturating"
    local_steps: int = 1
    threads: int = 1
    early_stop: bool = False
    early_stop_window: int = 500
    early_stop_tol: float = 1e-3

    def agent_widths(self, agent_id: int) -> tuple:
        over = self.agent_overrides.get(agent_id, {})
        return over.get("g_hidden", self.g_hidden), over.get("d_hidden", self.d_hidden)


def _parse_int_list(text: str) -> tuple:
    return tuple(int(t.strip()) for t in text.split(",") if t.strip())


def _parse_cuts(text: str) -> tuple:
    pairs = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        lo, hi = chunk.split(":")
        pairs.append((float(lo), float(hi)))
    return tuple(pairs)


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# section -> key -> (attribute, parser)
_SCHEMA = {
    "graph": {
        "kind": ("graph_kind", str),
        "n": ("n_agents", int),
        "k": ("ring_k", int),
        "file": ("graph_file", str),
    },
    "weights": {
        "kind": ("weights_kind", str),
        "file": ("weights_file", str),
    },
    "dataset": {
        "kind": ("dataset_kind", str),
        "alpha": ("alpha", float),
        "beta": ("beta", float),
        "samples_per_agent": ("samples_per_agent", int),
        "partition": ("partition", str),
        "cuts": ("cuts", _parse_cuts),
        "file": ("dataset_file", str),
    },
    "agents": {
        "noise_dim": ("noise_dim", int),
        "g_hidden": ("g_hidden", _parse_int_list),
        "d_hidden": ("d_hidden", _parse_int_list),
        "optimizer": ("optimizer", str),
        "lr_g": ("lr_g", float),
        "lr_d": ("lr_d", float),
        "beta1": ("adam_beta1", float),
        "beta2": ("adam_beta2", float),
    },
    "train": {
        "arch": ("arch", str),
        "seed": ("seed", int),
        "rounds": ("rounds", int),
        "batch_size": ("batch_size", int),
        "log_every": ("log_every", int),
        "eval_samples": ("eval_samples", int),
        "loss_mode": ("loss_mode", str),
        "local_steps": ("local_steps", int),
        "threads": ("threads", int),
        "early_stop": ("early_stop", _parse_bool),
        "early_stop_window": ("early_stop_window", int),
        "early_stop_tol": ("early_stop_tol", float),
    },
}

_OVERRIDE_KEYS = {"g_hidden": _parse_int_list, "d_hidden": _parse_int_list}


def parse_config(text: str) -> ExperimentConfig:
    """Parse INI text into a config; unknown sections/keys are errors."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from exc

    cfg = ExperimentConfig()
    problems = []
    for section in parser.sections():
        if section in _SCHEMA:
            schema = _SCHEMA[section]
            for key, raw in parser.items(section):
                if key not in schema:
                    problems.append(f"[{section}] unknown key {key!r}")
                    continue
                attr, cast = schema[key]
                try:
                    setattr(cfg, attr, cast(raw))
                except ValueError as exc:
                    problems.append(f"[{section}] {key}: {exc}")
        elif section.startswith("agents."):
            try:
                agent_id = int(section.split(".", 1)[1])
            except ValueError:
                problems.append(f"[{section}] is not a valid agent section")
                continue
            over = {}
            for key, raw in parser.items(section):
                if key not in _OVERRIDE_KEYS:
                    problems.append(f"[{section}] unknown key {key!r}")
                    continue
                try:
                    over[key] = _OVERRIDE_KEYS[key](raw)
                except ValueError as exc:
                    problems.append(f"[{section}] {key}: {exc}")
            cfg.agent_overrides[agent_id] = over
        else:
            problems.append(f"unknown section [{section}]")
    if problems:
        raise ConfigError("; ".join(problems))
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def validate_config(cfg: ExperimentConfig) -> None:
    """Raise one ConfigError listing every violated key."""
    bad = []

    if cfg.graph_kind not in GRAPH_KINDS:
        bad.append(f"graph.kind must be one of {GRAPH_KINDS}")
    if cfg.n_agents < 1:
        bad.append("graph.n must be >= 1")
    if cfg.graph_kind in ("ring", "string") and cfg.n_agents < 2:
        bad.append(f"graph.n must be >= 2 for a {cfg.graph_kind} graph")
    if cfg.graph_kind == "ring" and not (1 <= cfg.ring_k <= max(cfg.n_agents - 1, 1)):
        bad.append("graph.k must be in [1, n-1]")
    if cfg.graph_kind == "file" and not cfg.graph_file:
        bad.append("graph.file is required when graph.kind = file")

    if cfg.weights_kind not in WEIGHT_KINDS:
        bad.append(f"weights.kind must be one of {WEIGHT_KINDS}")
    if cfg.weights_kind == "file" and not cfg.weights_file:
        bad.append("weights.file is required when weights.kind = file")

    if cfg.dataset_kind not in DATASET_KINDS:
        bad.append(f"dataset.kind must be one of {DATASET_KINDS}")
    if cfg.dataset_kind == "ring" and (cfg.alpha <= 0 or cfg.beta <= 0):
        bad.append("dataset.alpha and dataset.beta must be positive")
    if cfg.samples_per_agent < 1:
        bad.append("dataset.samples_per_agent must be >= 1")
    if cfg.partition not in PARTITIONS:
        bad.append(f"dataset.partition must be one of {PARTITIONS}")
    if cfg.partition == "angular":
        if cfg.dataset_kind != "ring":
            bad.append("dataset.partition = angular needs dataset.kind = ring")
        if len(cfg.cuts) != cfg.n_agents:
            bad.append("dataset.cuts must list one angle interval per agent")
    if cfg.dataset_kind == "file" and not cfg.dataset_file:
        bad.append("dataset.file is required when dataset.kind = file")

    if cfg.noise_dim < 1:
        bad.append("agents.noise_dim must be >= 1")
    for name, widths in (("agents.g_hidden", cfg.g_hidden),
                         ("agents.d_hidden", cfg.d_hidden)):
        if not widths or any(w < 1 for w in widths):
            bad.append(f"{name} must be a list of positive widths")
    if cfg.optimizer not in ("adam", "sgd"):
        bad.append("agents.optimizer must be adam or sgd")
    if cfg.lr_g < 0 or cfg.lr_d < 0:
        bad.append("agents.lr_g and agents.lr_d must be >= 0")
    for agent_id, over in sorted(cfg.agent_overrides.items()):
        if not 0 <= agent_id < cfg.n_agents:
            bad.append(f"[agents.{agent_id}] id out of range for n={cfg.n_agents}")
        for key, widths in over.items():
            if not widths or any(w < 1 for w in widths):
                bad.append(f"[agents.{agent_id}] {key} must be positive widths")

    if cfg.arch not in ARCHITECTURES:
        bad.append(f"train.arch must be one of {ARCHITECTURES}")
    if cfg.arch == "flgan" and any(
            over.get(key, getattr(cfg, key)) != getattr(cfg, key)
            for over in cfg.agent_overrides.values()
            for key in ("g_hidden", "d_hidden")):
        bad.append("train.arch = flgan requires homogeneous architectures; "
                   "remove per-agent width overrides")
    for name in ("rounds", "batch_size", "log_every", "eval_samples",
                 "local_steps", "threads"):
        if getattr(cfg, name) < 1:
            bad.append(f"train.{name} must be >= 1")
    if cfg.loss_mode not in ("saturating", "non_saturating"):
        bad.append("train.loss_mode must be saturating or non_saturating")
    if cfg.early_stop_window < 1 or cfg.early_stop_tol <= 0:
        bad.append("train.early_stop_window must be >= 1 and early_stop_tol > 0")

    if bad:
        raise ConfigError("; ".join(bad))


def render_config(cfg: ExperimentConfig) -> str:
    """Resolved INI echo; parse_config(render_config(cfg)) == cfg."""
    out = io.StringIO()

    def section(name, pairs):
        out.write(f"[{name}]\n")
        for key, value in pairs:
            out.write(f"{key} = {value}\n")
        out.write("\n")

    section("graph", [("kind", cfg.graph_kind), ("n", cfg.n_agents),
                      ("k", cfg.ring_k), ("file", cfg.graph_file)])
    section("weights", [("kind", cfg.weights_kind), ("file", cfg.weights_file)])
    section("dataset", [
        ("kind", cfg.dataset_kind),
        ("alpha", repr(cfg.alpha)),
        ("beta", repr(cfg.beta)),
        ("samples_per_agent", cfg.samples_per_agent),
        ("partition", cfg.partition),
        ("cuts", ",".join(f"{repr(a)}:{repr(b)}" for a, b in cfg.cuts)),
        ("file", cfg.dataset_file),
    ])
    section("agents", [
        ("noise_dim", cfg.noise_dim),
        ("g_hidden", ",".join(str(w) for w in cfg.g_hidden)),
        ("d_hidden", ",".join(str(w) for w in cfg.d_hidden)),
        ("optimizer", cfg.optimizer),
        ("lr_g", repr(cfg.lr_g)),
        ("lr_d", repr(cfg.lr_d)),
        ("beta1", repr(cfg.adam_beta1)),
        ("beta2", repr(cfg.adam_beta2)),
    ])
    for agent_id, over in sorted(cfg.agent_overrides.items()):
        pairs = [(key, ",".join(str(w) for w in widths))
                 for key, widths in sorted(over.items())]
        section(f"agents.{agent_id}", pairs)
    section("train", [
        ("arch", cfg.arch),
        ("seed", cfg.seed),
        ("rounds", cfg.rounds),
        ("batch_size", cfg.batch_size),
        ("log_every", cfg.log_every),
        ("eval_samples", cfg.eval_samples),
        ("loss_mode", cfg.loss_mode),
        ("local_steps", cfg.local_steps),
        ("threads", cfg.threads),
        ("early_stop", str(cfg.early_stop).lower()),
        ("early_stop_window", cfg.early_stop_window),
        ("early_stop_tol", repr(cfg.early_stop_tol)),
    ])
    return out.getvalue()


def build_graph(cfg: ExperimentConfig) -> CommGraph:
    if cfg.graph_kind == "ring":
        return ring_graph(cfg.n_agents, cfg.ring_k)
    if cfg.graph_kind == "string":
        return string_graph(cfg.n_agents)
    if cfg.graph_kind == "edgeless":
        return edgeless_graph(cfg.n_agents)
    graph = load_graph(cfg.graph_file)
    if graph.n != cfg.n_agents:
        raise ConfigError(
            f"graph file has {graph.n} agents but graph.n = {cfg.n_agents}")
    return graph


def build_weights(cfg: ExperimentConfig, graph: CommGraph,
                  shard_sizes) -> MixingWeights:
    if cfg.weights_kind == "uniform":
        return uniform_weights(graph)
    if cfg.weights_kind == "proportional":
        return proportional_weights(graph, shard_sizes)
    weights = load_weights(cfg.weights_file)
    if weights.graph != graph:
        raise ConfigError("weights file support does not match the graph")
    return weights


def build_shards(cfg: ExperimentConfig) -> list:
    """Raw (unnormalized) per-agent datasets."""
    if cfg.dataset_kind == "file":
        data = load_dataset(cfg.dataset_file)
        return partition_equal(data, cfg.n_agents,
                               derive_seed(cfg.seed, "partition"))
    total = cfg.samples_per_agent * cfg.n_agents
    params = RingParams(cfg.alpha, cfg.beta, total, derive_seed(cfg.seed, "dataset"))
    if cfg.partition == "angular":
        return partition_angular(params, cfg.cuts)
    data = sample_ring(params)
    return partition_equal(data, cfg.n_agents, derive_seed(cfg.seed, "partition"))


def build_normalized_data(cfg: ExperimentConfig) -> tuple:
    """(normalized shards, normalized eval reference, affine fit).

    All agents and the evaluation reference share one affine map fitted on
    the union of the shards, so every JSD lives on the same grid.
    """
    shards = build_shards(cfg)
    union = np.vstack(shards)
    _, fit = normalize(union)
    if cfg.dataset_kind == "ring":
        ref_params = RingParams(cfg.alpha, cfg.beta, cfg.eval_samples,
                                derive_seed(cfg.seed, "eval-ref"))
        reference = fit.apply(sample_ring(ref_params))
    else:
        reference = fit.apply(union)
    return [fit.apply(s) for s in shards], reference, fit
