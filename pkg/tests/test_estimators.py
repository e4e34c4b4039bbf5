import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from bgan.errors import ConfigError
from bgan.estimators import (
    BrainstormingGAN,
    FederatedGAN,
    ForgiverFirstGAN,
    MultiDiscriminatorGAN,
    StandaloneGAN,
)
from bgan.topology import ring_graph, uniform_weights

FAST = dict(rounds=6, batch_size=8, log_every=2, eval_samples=100,
            g_hidden=(8,), d_hidden=(8,))

ALL_CLASSES = (StandaloneGAN, BrainstormingGAN, MultiDiscriminatorGAN,
               ForgiverFirstGAN, FederatedGAN)


def data(count=200, center=(0.0, 0.0), seed=0):
    rng = np.random.default_rng(seed)
    return rng.normal(center, 1.0, size=(count, 2))


@pytest.mark.parametrize("cls", ALL_CLASSES)
def test_clone_and_params_round_trip(cls):
    est = cls(n_agents=2, **FAST)
    cloned = clone(est)
    assert cloned.get_params() == est.get_params()
    est.set_params(rounds=9)
    assert est.get_params()["rounds"] == 9


@pytest.mark.parametrize("cls", ALL_CLASSES)
def test_fit_sets_state_and_returns_self(cls):
    est = cls(n_agents=2, **FAST)
    out = est.fit(data())
    assert out is est
    assert est.n_features_in_ == 2
    assert len(est.agents_) == 2
    assert est.report_.final_round() == 6
    returned = est.sample(40)
    assert returned.shape == (40, 2)


def test_sample_before_fit_raises():
    with pytest.raises(NotFittedError):
        BrainstormingGAN(**FAST).sample(5)


def test_sample_is_deterministic_and_overridable():
    est = StandaloneGAN(**FAST).fit(data())
    a = est.sample(30)
    b = est.sample(30)
    assert np.array_equal(a, b)
    c = est.sample(30, random_state=123)
    assert not np.array_equal(a, c)


def test_samples_live_in_the_original_box():
    X = data(center=(100.0, -50.0))
    est = StandaloneGAN(**FAST).fit(X)
    s = est.sample(500)
    assert (s.min(axis=0) >= X.min(axis=0)).all()
    assert (s.max(axis=0) <= X.max(axis=0)).all()


def test_per_agent_sampling():
    est = BrainstormingGAN(n_agents=2, **FAST).fit(data())
    s0 = est.sample(20, agent=0)
    s1 = est.sample(20, agent=1)
    assert s0.shape == s1.shape == (20, 2)
    assert not np.array_equal(s0, s1)
    with pytest.raises(ConfigError):
        est.sample(5, agent=7)


def test_central_architectures_ignore_agent_choice():
    est = ForgiverFirstGAN(n_agents=2, **FAST).fit(data())
    assert est.server_ is not None
    assert np.array_equal(est.sample(10, agent=0), est.sample(10, agent=1))


def test_fit_validates_inputs():
    X = data(count=3)
    with pytest.raises(ConfigError):
        StandaloneGAN(n_agents=5, **FAST).fit(X)
    bad = data()
    bad[0, 0] = np.nan
    with pytest.raises(ValueError):
        StandaloneGAN(**FAST).fit(bad)


def test_graph_arguments():
    est = BrainstormingGAN(n_agents=3, graph=ring_graph(3, 1), **FAST)
    est.fit(data())
    assert est.report_.final_round() == 6
    with pytest.raises(ConfigError, match="graph has"):
        BrainstormingGAN(n_agents=4, graph=ring_graph(3, 1), **FAST).fit(data())
    with pytest.raises(ConfigError, match="unknown graph"):
        BrainstormingGAN(n_agents=3, graph="clique", **FAST).fit(data())


def test_weight_arguments():
    BrainstormingGAN(n_agents=2, weight_mode="proportional", **FAST).fit(data())
    explicit = uniform_weights(ring_graph(2, 1))
    BrainstormingGAN(n_agents=2, weight_mode=explicit, **FAST).fit(data())
    with pytest.raises(ConfigError, match="disagree"):
        BrainstormingGAN(n_agents=3, weight_mode=explicit, **FAST).fit(data())
    with pytest.raises(ConfigError, match="unknown weight"):
        BrainstormingGAN(n_agents=2, weight_mode="softmax", **FAST).fit(data())


def test_standalone_equals_edgeless_brainstorming():
    X = data()
    a = StandaloneGAN(n_agents=2, **FAST).fit(X)
    b = BrainstormingGAN(n_agents=2, graph="edgeless", **FAST).fit(X)
    for agent_a, agent_b in zip(a.agents_, b.agents_):
        for p, q in zip(agent_a.g.parameters(), agent_b.g.parameters()):
            assert np.array_equal(p, q)


def test_federated_local_steps_run():
    est = FederatedGAN(n_agents=2, local_steps=2, **FAST).fit(data())
    assert est.report_.final_round() == 6
