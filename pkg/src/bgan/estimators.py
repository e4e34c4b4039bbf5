"""Estimator wrappers with the fit/sample/get_params surface.

Each class wraps one training protocol.  ``fit(X)`` rescales the data to
the unit box, splits it across agents, trains, and keeps the fitted pieces
on trailing-underscore attributes; ``sample`` returns generated points
mapped back to the original coordinates.  Hyperparameters are stored
verbatim in ``__init__`` so cloning and grid search behave as usual.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .datasets import noise_batch, normalize, partition_equal
from .errors import ConfigError
from .nn import forward
from .rng import derive_seed, stream
from .topology import (
    CommGraph,
    MixingWeights,
    edgeless_graph,
    proportional_weights,
    ring_graph,
    string_graph,
    uniform_weights,
)
from .training import TrainOptions, make_agent, make_server, train


class _GanEstimator(BaseEstimator):
    """Shared fit/sample plumbing; subclasses pin the protocol."""

    _arch = "standalone"

    def _more_tags(self):
        return {"requires_y": False, "non_deterministic": False}

    def _options(self) -> TrainOptions:
        return TrainOptions(
            rounds=self.rounds,
            batch_size=self.batch_size,
            log_every=self.log_every,
            eval_samples=self.eval_samples,
            loss_mode=self.loss_mode,
            local_steps=getattr(self, "local_steps", 1),
            threads=self.threads,
        )

    def _weights(self, shards) -> MixingWeights | None:
        return uniform_weights(edgeless_graph(self.n_agents))

    def _needs_server(self) -> bool:
        return False

    def _fit_impl(self, X):
        X = check_array(X, dtype=np.float64, ensure_all_finite=True)
        if self.n_agents < 1:
            raise ConfigError("n_agents must be >= 1")
        if X.shape[0] < self.n_agents:
            raise ConfigError(
                f"{X.shape[0]} samples cannot cover {self.n_agents} agents")
        seed = self.random_state
        normed, affine = normalize(X)
        shards = partition_equal(normed, self.n_agents,
                                 derive_seed(seed, "partition"))
        needs_server = self._needs_server()
        agents = [
            make_agent(i, shard, seed,
                       noise_dim=self.noise_dim,
                       g_hidden=self.g_hidden,
                       d_hidden=self.d_hidden,
                       optimizer=self.optimizer,
                       lr_g=self.lr_g,
                       lr_d=self.lr_d,
                       beta1=self.beta1,
                       beta2=self.beta2,
                       with_generator=not needs_server)
            for i, shard in enumerate(shards)
        ]
        server = None
        if needs_server:
            server = make_server(X.shape[1], seed,
                                 noise_dim=self.noise_dim,
                                 g_hidden=self.g_hidden,
                                 optimizer=self.optimizer,
                                 lr_g=self.lr_g,
                                 beta1=self.beta1,
                                 beta2=self.beta2)
        report = train(self._arch, agents, self._options(), normed, seed,
                       weights=self._weights(shards), server=server)
        self.n_features_in_ = X.shape[1]
        self.affine_ = affine
        self.agents_ = report.agents
        self.server_ = report.server
        self.report_ = report
        return self

    def fit(self, X, y=None):
        return self._fit_impl(X)

    def _generator(self, agent):
        if self.server_ is not None:
            return self.server_.g
        if agent is None:
            agent = 0
        if not 0 <= agent < len(self.agents_):
            raise ConfigError(f"no agent {agent}; fitted {len(self.agents_)}")
        return self.agents_[agent].g

    def sample(self, n_samples=100, random_state=None, agent=None):
        """Generated points in the original data coordinates."""
        check_is_fitted(self, "agents_")
        if n_samples < 1:
            raise ConfigError("n_samples must be >= 1")
        g = self._generator(agent)
        rs = self.random_state if random_state is None else random_state
        tag = "central" if self.server_ is not None else (agent or 0)
        rng = stream(rs, "sample", tag)
        raw = forward(g, noise_batch(g.input_dim, n_samples, rng))
        return self.affine_.invert(raw)


class StandaloneGAN(_GanEstimator):
    """Isolated per-agent training; no exchange of any kind."""

    _arch = "standalone"

    def __init__(self, n_agents=1, rounds=2000, batch_size=64, noise_dim=8,
                 g_hidden=(32,), d_hidden=(32,), optimizer="adam",
                 lr_g=1e-3, lr_d=1e-3, beta1=0.5, beta2=0.999,
                 loss_mode="non_saturating", log_every=100,
                 eval_samples=10_000, threads=1, random_state=0):
        self.n_agents = n_agents
        self.rounds = rounds
        self.batch_size = batch_size
        self.noise_dim = noise_dim
        self.g_hidden = g_hidden
        self.d_hidden = d_hidden
        self.optimizer = optimizer
        self.lr_g = lr_g
        self.lr_d = lr_d
        self.beta1 = beta1
        self.beta2 = beta2
        self.loss_mode = loss_mode
        self.log_every = log_every
        self.eval_samples = eval_samples
        self.threads = threads
        self.random_state = random_state


class BrainstormingGAN(_GanEstimator):
    """Agents on a digraph blend received generated samples into their
    positives; only samples ever travel."""

    _arch = "bgan"

    def __init__(self, n_agents=2, graph="ring", ring_k=1, weight_mode="uniform",
                 rounds=2000, batch_size=64, noise_dim=8, g_hidden=(32,),
                 d_hidden=(32,), optimizer="adam", lr_g=1e-3, lr_d=1e-3,
                 beta1=0.5, beta2=0.999, loss_mode="non_saturating",
                 log_every=100, eval_samples=10_000, threads=1, random_state=0):
        self.n_agents = n_agents
        self.graph = graph
        self.ring_k = ring_k
        self.weight_mode = weight_mode
        self.rounds = rounds
        self.batch_size = batch_size
        self.noise_dim = noise_dim
        self.g_hidden = g_hidden
        self.d_hidden = d_hidden
        self.optimizer = optimizer
        self.lr_g = lr_g
        self.lr_d = lr_d
        self.beta1 = beta1
        self.beta2 = beta2
        self.loss_mode = loss_mode
        self.log_every = log_every
        self.eval_samples = eval_samples
        self.threads = threads
        self.random_state = random_state

    def _graph(self) -> CommGraph:
        if isinstance(self.graph, CommGraph):
            if self.graph.n != self.n_agents:
                raise ConfigError(
                    f"graph has {self.graph.n} agents, estimator expects "
                    f"{self.n_agents}")
            return self.graph
        if self.graph == "ring":
            return ring_graph(self.n_agents, self.ring_k)
        if self.graph == "string":
            return string_graph(self.n_agents)
        if self.graph == "edgeless":
            return edgeless_graph(self.n_agents)
        raise ConfigError(f"unknown graph kind {self.graph!r}")

    def _weights(self, shards) -> MixingWeights:
        graph = self._graph()
        if isinstance(self.weight_mode, MixingWeights):
            if self.weight_mode.graph != graph:
                raise ConfigError("explicit weights disagree with the graph")
            return self.weight_mode
        if self.weight_mode == "uniform":
            return uniform_weights(graph)
        if self.weight_mode == "proportional":
            return proportional_weights(graph, [len(s) for s in shards])
        raise ConfigError(f"unknown weight mode {self.weight_mode!r}")


class MultiDiscriminatorGAN(_GanEstimator):
    """One central generator served by per-agent discriminators; the
    generator descends their averaged feedback."""

    _arch = "mdgan"

    def __init__(self, n_agents=2, rounds=2000, batch_size=64, noise_dim=8,
                 g_hidden=(32,), d_hidden=(32,), optimizer="adam",
                 lr_g=1e-3, lr_d=1e-3, beta1=0.5, beta2=0.999,
                 loss_mode="non_saturating", log_every=100,
                 eval_samples=10_000, threads=1, random_state=0):
        self.n_agents = n_agents
        self.rounds = rounds
        self.batch_size = batch_size
        self.noise_dim = noise_dim
        self.g_hidden = g_hidden
        self.d_hidden = d_hidden
        self.optimizer = optimizer
        self.lr_g = lr_g
        self.lr_d = lr_d
        self.beta1 = beta1
        self.beta2 = beta2
        self.loss_mode = loss_mode
        self.log_every = log_every
        self.eval_samples = eval_samples
        self.threads = threads
        self.random_state = random_state

    def _weights(self, shards):
        return None

    def _needs_server(self) -> bool:
        return True


class ForgiverFirstGAN(MultiDiscriminatorGAN):
    """Central generator where each fake sample is judged only by the
    discriminator that scores it highest."""

    _arch = "f2u"


class FederatedGAN(_GanEstimator):
    """Local training plus equal-weight parameter averaging every round."""

    _arch = "flgan"

    def __init__(self, n_agents=2, local_steps=1, rounds=2000, batch_size=64,
                 noise_dim=8, g_hidden=(32,), d_hidden=(32,), optimizer="adam",
                 lr_g=1e-3, lr_d=1e-3, beta1=0.5, beta2=0.999,
                 loss_mode="non_saturating", log_every=100,
                 eval_samples=10_000, threads=1, random_state=0):
        self.n_agents = n_agents
        self.local_steps = local_steps
        self.rounds = rounds
        self.batch_size = batch_size
        self.noise_dim = noise_dim
        self.g_hidden = g_hidden
        self.d_hidden = d_hidden
        self.optimizer = optimizer
        self.lr_g = lr_g
        self.lr_d = lr_d
        self.beta1 = beta1
        self.beta2 = beta2
        self.loss_mode = loss_mode
        self.log_every = log_every
        self.eval_samples = eval_samples
        self.threads = threads
        self.random_state = random_state

    def _weights(self, shards):
        return None
