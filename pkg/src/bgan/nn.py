"""Dense feed-forward networks with exact backpropagation.

Each agent's generator and discriminator is a small stack of dense layers
kept as plain numpy arrays.  Training steps are explicit forward/backward
passes followed by an optimizer update; the analytic gradients are checked
against central finite differences in the test suite.

Discriminator outputs are clamped to ``[CLAMP_EPS, 1 - CLAMP_EPS]`` before
any logarithm, so a saturated discriminator yields a large-but-finite loss
and a zero gradient through the clamped entries instead of NaN/Inf.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, TrainingError
from .rng import stream

ACTIVATIONS = ("relu", "tanh", "sigmoid", "identity")

CLAMP_EPS = 1e-7

GENERATOR_LOSS_MODES = ("saturating", "non_saturating")


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    if kind == "sigmoid":
        # stable in both tails: never exponentiates a positive argument
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    return z


def _activate_grad(z: np.ndarray, out: np.ndarray, kind: str) -> np.ndarray:
    # derivative wrt the pre-activation, using the cached output where cheaper
    if kind == "relu":
        return (z > 0.0).astype(z.dtype)
    if kind == "tanh":
        return 1.0 - out * out
    if kind == "sigmoid":
        return out * (1.0 - out)
    return np.ones_like(z)


@dataclass
class DenseLayer:
    """One dense layer: ``out = act(x @ weights.T + bias)``."""

    weights: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray  # (out_dim,)
    activation: str

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.weights.ndim != 2:
            raise ConfigError("layer weights must be a 2-D matrix")
        if self.bias.shape != (self.weights.shape[0],):
            raise ConfigError("bias length must equal the layer's output dim")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass
class Mlp:
    """A chain of dense layers with consistent dimensions."""

    layers: list[DenseLayer]

    def __post_init__(self):
        if not self.layers:
            raise ConfigError("a network needs at least one layer")
        for k, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if a.out_dim != b.in_dim:
                raise ConfigError(
                    f"layer {k} outputs {a.out_dim} values but layer {k + 1} "
                    f"expects {b.in_dim}"
                )

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def parameter_count(self) -> int:
        return sum(l.weights.size + l.bias.size for l in self.layers)

    def copy(self) -> "Mlp":
        return Mlp(
            [DenseLayer(l.weights.copy(), l.bias.copy(), l.activation) for l in self.layers]
        )

    def parameters(self):
        for l in self.layers:
            yield l.weights
            yield l.bias


def mlp_init(layer_sizes, activations, seed: int) -> Mlp:
    """Build a network from a ``[in, h1, ..., out]`` size list.

    Weights are uniform in +/- sqrt(6 / (fan_in + fan_out)), biases zero;
    the same (sizes, activations, seed) triple always yields bitwise
    identical parameters.
    """
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2:
        raise ConfigError("layer spec must contain an input dim and at least one layer")
    if any(s < 1 for s in sizes):
        raise ConfigError(f"all layer dims must be >= 1, got {sizes}")
    acts = list(activations)
    if len(acts) != len(sizes) - 1:
        raise ConfigError(
            f"need {len(sizes) - 1} activations for {len(sizes) - 1} layers, got {len(acts)}"
        )
    rng = stream(seed, "mlp-init")
    layers = []
    for fan_in, fan_out, act in zip(sizes, sizes[1:], acts):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        layers.append(DenseLayer(w, np.zeros(fan_out), act))
    return Mlp(layers)


def generator_net(noise_dim, hidden, data_dim, seed, hidden_activation="tanh",
                  output_activation="tanh") -> Mlp:
    """Generator: noise -> hidden layer(s) -> data space."""
    widths = [hidden] if np.isscalar(hidden) else list(hidden)
    sizes = [noise_dim, *widths, data_dim]
    acts = [hidden_activation] * len(widths) + [output_activation]
    return mlp_init(sizes, acts, seed)


def discriminator_net(data_dim, hidden, seed, hidden_activation="tanh") -> Mlp:
    """Discriminator: data -> hidden layer(s) -> one sigmoid score in (0, 1)."""
    widths = [hidden] if np.isscalar(hidden) else list(hidden)
    sizes = [data_dim, *widths, 1]
    acts = [hidden_activation] * len(widths) + ["sigmoid"]
    return mlp_init(sizes, acts, seed)


def forward(net: Mlp, batch: np.ndarray) -> np.ndarray:
    """Evaluate ``net`` on a (b, input_dim) batch."""
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.input_dim:
        raise ConfigError(
            f"batch has shape {x.shape}, expected (b, {net.input_dim})"
        )
    for layer in net.layers:
        x = _activate(x @ layer.weights.T + layer.bias, layer.activation)
    return x


def _forward_cached(net: Mlp, batch: np.ndarray):
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.input_dim:
        raise ConfigError(f"batch has shape {x.shape}, expected (b, {net.input_dim})")
    caches = []
    for layer in net.layers:
        z = x @ layer.weights.T + layer.bias
        out = _activate(z, layer.activation)
        caches.append((x, z, out))
        x = out
    return x, caches


def _backward(net: Mlp, caches, grad_out: np.ndarray):
    """Backpropagate d(loss)/d(output) through the net.

    Returns (per-layer (dW, db) list, d(loss)/d(input)); does not touch
    the parameters.
    """
    grads = [None] * len(net.layers)
    g = grad_out
    for k in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[k]
        x_in, z, out = caches[k]
        gz = g * _activate_grad(z, out, layer.activation)
        grads[k] = (gz.T @ x_in, gz.sum(axis=0))
        g = gz @ layer.weights
    return grads, g


def _clamped_probs(raw: np.ndarray):
    """Clamp discriminator outputs for the log terms.

    Returns the clamped values and the mask of entries whose gradient
    survives the clamp.
    """
    clamped = np.clip(raw, CLAMP_EPS, 1.0 - CLAMP_EPS)
    alive = (raw > CLAMP_EPS) & (raw < 1.0 - CLAMP_EPS)
    return clamped, alive


def _check_finite_grads(net: Mlp, grads, what: str):
    for k, (gw, gb) in enumerate(grads):
        if not (np.all(np.isfinite(gw)) and np.all(np.isfinite(gb))):
            raise TrainingError(f"non-finite gradient in {what}, layer {k}")


def _check_finite_params(net: Mlp, what: str):
    for k, layer in enumerate(net.layers):
        if not (np.all(np.isfinite(layer.weights)) and np.all(np.isfinite(layer.bias))):
            raise TrainingError(f"non-finite parameters in {what}, layer {k}")


@dataclass
class OptimizerState:
    """SGD or Adam state for one network.

    Adam moment buffers are created lazily on the first step and must keep
    matching the parameter shapes exactly afterwards.
    """

    kind: str = "adam"
    learning_rate: float = 1e-3
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    moments1: list = field(default_factory=list, repr=False)
    moments2: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer {self.kind!r}")
        # learning_rate 0 is allowed: it makes a step a no-op, which the
        # tests rely on.
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")

    def apply(self, net: Mlp, grads) -> None:
        """Descend ``net``'s parameters along ``grads`` in place."""
        flat_params = list(net.parameters())
        flat_grads = [g for pair in grads for g in pair]
        if len(flat_params) != len(flat_grads):
            raise TrainingError("gradient structure does not match the network")
        if self.kind == "sgd":
            for p, g in zip(flat_params, flat_grads):
                p -= self.learning_rate * g
            return
        if not self.moments1:
            self.moments1 = [np.zeros_like(p) for p in flat_params]
            self.moments2 = [np.zeros_like(p) for p in flat_params]
        self.step_count += 1
        bc1 = 1.0 - self.beta1 ** self.step_count
        bc2 = 1.0 - self.beta2 ** self.step_count
        for p, g, m, v in zip(flat_params, flat_grads, self.moments1, self.moments2):
            if m.shape != p.shape:
                raise TrainingError("optimizer moment buffers do not match parameters")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def make_optimizer(kind="adam", learning_rate=1e-3, beta1=0.5, beta2=0.999) -> OptimizerState:
    return OptimizerState(kind=kind, learning_rate=learning_rate, beta1=beta1, beta2=beta2)


def discriminator_objective(d: Mlp, positives: np.ndarray, fakes: np.ndarray) -> float:
    """The ascent objective (1/b)[sum log D(pos) + sum log(1 - D(fake))]."""
    b = fakes.shape[0]
    p_pos, _ = _clamped_probs(forward(d, positives))
    p_neg, _ = _clamped_probs(forward(d, fakes))
    return float((np.log(p_pos).sum() + np.log(1.0 - p_neg).sum()) / b)


def discriminator_step(d: Mlp, opt: OptimizerState, positives: np.ndarray,
                       fakes: np.ndarray) -> float:
    """One ascent step of the discriminator objective.

    ``positives`` mixes the agent's own samples with received ideas;
    ``fakes`` is the agent's own generated batch.  Both must have the same
    number of rows b.  Returns the objective value before the step.
    """
    positives = np.asarray(positives, dtype=np.float64)
    fakes = np.asarray(fakes, dtype=np.float64)
    if positives.shape[0] == 0 or fakes.shape[0] == 0:
        raise TrainingError("discriminator_step got an empty batch")
    if positives.shape[0] != fakes.shape[0]:
        raise TrainingError(
            f"positive batch has {positives.shape[0]} rows, fake batch "
            f"{fakes.shape[0]}; they must match"
        )
    b = fakes.shape[0]

    out_pos, caches_pos = _forward_cached(d, positives)
    out_neg, caches_neg = _forward_cached(d, fakes)
    p_pos, alive_pos = _clamped_probs(out_pos)
    p_neg, alive_neg = _clamped_probs(out_neg)
    objective = float((np.log(p_pos).sum() + np.log(1.0 - p_neg).sum()) / b)

    # minimize the negated objective
    dloss_pos = np.where(alive_pos, -1.0 / (b * p_pos), 0.0)
    dloss_neg = np.where(alive_neg, 1.0 / (b * (1.0 - p_neg)), 0.0)
    grads_pos, _ = _backward(d, caches_pos, dloss_pos)
    grads_neg, _ = _backward(d, caches_neg, dloss_neg)
    grads = [(gw1 + gw2, gb1 + gb2)
             for (gw1, gb1), (gw2, gb2) in zip(grads_pos, grads_neg)]
    _check_finite_grads(d, grads, "discriminator")
    opt.apply(d, grads)
    _check_finite_params(d, "discriminator")
    return objective


def generator_feedback(d: Mlp, x: np.ndarray, mode: str, row_mask=None):
    """Discriminator feedback for a generated batch.

    Returns (objective, d(loss)/dx) where the loss is what the generator
    descends: log(1 - D(x)) in saturating mode, -log D(x) otherwise, both
    averaged over the full batch size.  ``row_mask`` restricts the loss to
    selected rows (used by the forgiving-discriminator baseline); masked-out
    rows contribute zero to both the objective and the gradient.

    The discriminator's parameters are left untouched.
    """
    if mode not in GENERATOR_LOSS_MODES:
        raise ConfigError(f"unknown generator loss mode {mode!r}")
    b = x.shape[0]
    out, caches = _forward_cached(d, x)
    p, alive = _clamped_probs(out)
    if row_mask is not None:
        mask = np.asarray(row_mask, dtype=np.float64).reshape(b, *([1] * (p.ndim - 1)))
    else:
        mask = 1.0
    if mode == "saturating":
        objective = float((mask * np.log(1.0 - p)).sum() / b)
        dloss = np.where(alive, -1.0 / (b * (1.0 - p)), 0.0) * mask
    else:
        objective = float((mask * np.log(p)).sum() / b)
        # loss = -objective
        dloss = np.where(alive, -1.0 / (b * p), 0.0) * mask
    _, dx = _backward(d, caches, dloss)
    return objective, dx


def generator_step_from(g: Mlp, opt: OptimizerState, noise_batch: np.ndarray,
                        feedback) -> None:
    """One generator update where ``feedback(x) -> dL/dx`` supplies the
    discriminator side.  Every architecture funnels its generator update
    through here so that a single discriminator's feedback produces the
    same arithmetic no matter which protocol asked for it.
    """
    noise_batch = np.asarray(noise_batch, dtype=np.float64)
    if noise_batch.shape[0] == 0:
        raise TrainingError("generator update got an empty noise batch")
    x, g_caches = _forward_cached(g, noise_batch)
    dx = feedback(x)
    grads, _ = _backward(g, g_caches, dx)
    _check_finite_grads(g, grads, "generator")
    opt.apply(g, grads)
    _check_finite_params(g, "generator")


def generator_step(g: Mlp, d: Mlp, opt: OptimizerState, noise_batch: np.ndarray,
                   mode: str = "non_saturating") -> float:
    """One generator update against a fixed discriminator.

    In saturating mode the generator descends (1/b) sum log(1 - D(G(z)));
    in non_saturating mode it ascends (1/b) sum log D(G(z)).  Returns the
    corresponding objective before the step.  ``d`` is never modified.
    """
    seen = {}

    def feedback(x):
        seen["objective"], dx = generator_feedback(d, x, mode)
        return dx

    generator_step_from(g, opt, noise_batch, feedback)
    return seen["objective"]


def save_mlp(net: Mlp, path) -> None:
    """Write the network as line-oriented text, round-trip exact."""
    lines = [f"mlp {len(net.layers)}"]
    for layer in net.layers:
        lines.append(f"dense {layer.in_dim} {layer.out_dim} {layer.activation}")
        for row in layer.weights:
            lines.append(" ".join(f"{v:.17g}" for v in row))
        lines.append(" ".join(f"{v:.17g}" for v in layer.bias))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mlp(path) -> Mlp:
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("mlp "):
        raise ConfigError(f"{path}: not a network checkpoint")
    n_layers = int(lines[0].split()[1])
    layers = []
    pos = 1
    for _ in range(n_layers):
        tag, in_dim, out_dim, activation = lines[pos].split()
        if tag != "dense":
            raise ConfigError(f"{path}: unexpected layer type {tag!r}")
        in_dim, out_dim = int(in_dim), int(out_dim)
        pos += 1
        rows = [np.array(lines[pos + r].split(), dtype=np.float64)
                for r in range(out_dim)]
        pos += out_dim
        bias = np.array(lines[pos].split(), dtype=np.float64)
        pos += 1
        layers.append(DenseLayer(np.vstack(rows), bias, activation))
    return Mlp(layers)
