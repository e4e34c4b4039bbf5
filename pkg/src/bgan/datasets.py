"""Ring dataset generation, sharding, normalization, and CSV I/O.

The reference data distribution is a noisy ring: points (r cos t, r sin t)
with gamma-distributed radius and uniform angle.  Shards are produced either
by random equal split or by cutting the ring into angular sectors, so that
agents can be given overlapping or fully disjoint views of the same shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .rng import stream

TWO_PI = 2.0 * np.pi

NOISE_DIM = 8  # generator input dimension unless configured otherwise

BOUNDARY_TOL = 1e-12


def check_dataset(data) -> np.ndarray:
    """Validate and return samples as a finite float64 (n, dim) array."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ConfigError(f"dataset must be a non-empty (n, dim) array, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError("dataset contains non-finite entries")
    return arr


@dataclass(frozen=True)
class RingParams:
    """Gamma-radius ring: r ~ Gamma(alpha, rate beta), angle uniform."""

    alpha: float = 9.0
    beta: float = 2.0
    n: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ConfigError("gamma shape and rate must be positive")
        if self.n < 1:
            raise ConfigError("sample count must be >= 1")


def gamma_sample(rng: np.random.Generator, alpha: float, beta: float,
                 size: int) -> np.ndarray:
    """Marsaglia-Tsang gamma draws with rate parametrization.

    Shape alpha >= 1 uses the squeeze method directly; alpha < 1 draws from
    Gamma(alpha + 1) and applies the U^(1/alpha) boost.
    """
    if alpha <= 0 or beta <= 0:
        raise ConfigError("gamma shape and rate must be positive")
    boost = None
    shape = alpha
    if alpha < 1.0:
        shape = alpha + 1.0
        boost = rng.uniform(size=size) ** (1.0 / alpha)

    d = shape - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    out = np.empty(size)
    filled = 0
    while filled < size:
        want = size - filled
        x = rng.standard_normal(want)
        v = (1.0 + c * x) ** 3
        u = rng.uniform(size=want)
        ok = v > 0
        # cheap squeeze first, exact log test for the rest
        squeeze = ok & (u < 1.0 - 0.0331 * x ** 4)
        with np.errstate(divide="ignore", invalid="ignore"):
            exact = ok & ~squeeze & (
                np.log(u) < 0.5 * x ** 2 + d * (1.0 - v + np.log(np.where(ok, v, 1.0)))
            )
        accepted = d * v[squeeze | exact]
        out[filled:filled + accepted.size] = accepted
        filled += accepted.size
    if boost is not None:
        out *= boost
    return out / beta


def sample_ring(params: RingParams) -> np.ndarray:
    """Draw the ring dataset for the given parameters, (n, 2)."""
    r = gamma_sample(stream(params.seed, "ring", "radius"),
                     params.alpha, params.beta, params.n)
    theta = stream(params.seed, "ring", "angle").uniform(0.0, TWO_PI, size=params.n)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def partition_equal(data, n_agents: int, seed: int) -> list:
    """Shuffle, then split as evenly as possible; any remainder goes to the
    last agents so sizes differ by at most one."""
    arr = check_dataset(data)
    if n_agents < 1:
        raise ConfigError("need at least one agent")
    if n_agents > arr.shape[0]:
        raise ConfigError(
            f"cannot split {arr.shape[0]} samples across {n_agents} agents")
    order = stream(seed, "partition").permutation(arr.shape[0])
    shuffled = arr[order]
    base, extra = divmod(arr.shape[0], n_agents)
    shards = []
    pos = 0
    for i in range(n_agents):
        size = base + (1 if i >= n_agents - extra else 0)
        shards.append(shuffled[pos:pos + size])
        pos += size
    return shards


def _check_cover(cuts) -> list:
    intervals = [(float(a), float(b)) for a, b in cuts]
    if not intervals:
        raise ConfigError("need at least one angle interval")
    if any(b <= a for a, b in intervals):
        raise ConfigError("angle intervals must have positive width")
    ordered = sorted(intervals)
    if abs(ordered[0][0]) > BOUNDARY_TOL or abs(ordered[-1][1] - TWO_PI) > BOUNDARY_TOL:
        raise ConfigError("angle intervals must cover 0 to 2*pi")
    for (_, b), (a2, _) in zip(ordered, ordered[1:]):
        if a2 < b - BOUNDARY_TOL:
            raise ConfigError(f"angle intervals overlap near {a2!r}")
        if a2 > b + BOUNDARY_TOL:
            raise ConfigError(f"angle intervals leave a gap near {b!r}")
    return intervals


def partition_angular(params: RingParams, cuts) -> list:
    """Draw one ring dataset and route each point to the agent whose angle
    interval contains it; intervals must tile (0, 2*pi) exactly."""
    intervals = _check_cover(cuts)
    r = gamma_sample(stream(params.seed, "ring", "radius"),
                     params.alpha, params.beta, params.n)
    theta = stream(params.seed, "ring", "angle").uniform(0.0, TWO_PI, size=params.n)
    points = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    shards = []
    for a, b in intervals:
        mask = (theta >= a) & (theta < b)
        shards.append(points[mask])
    return shards


@dataclass(frozen=True)
class AffineMap:
    """Per-dimension record of the [-1, 1] normalization, invertible."""

    lo: np.ndarray
    hi: np.ndarray

    def apply(self, data) -> np.ndarray:
        arr = np.asarray(data, dtype=np.float64)
        span = self.hi - self.lo
        out = np.zeros_like(arr)
        np.divide(arr - self.lo, span, out=out, where=span > 0)
        return np.where(span > 0, 2.0 * out - 1.0, 0.0)

    def invert(self, data) -> np.ndarray:
        arr = np.asarray(data, dtype=np.float64)
        span = self.hi - self.lo
        return np.where(span > 0, self.lo + (arr + 1.0) * 0.5 * span, self.lo)


def normalize(data) -> tuple:
    """Map each dimension onto [-1, 1]; returns (normalized, AffineMap).

    A zero-range dimension maps to 0 and inverts back to its single value.
    """
    arr = check_dataset(data)
    fit = AffineMap(arr.min(axis=0), arr.max(axis=0))
    return fit.apply(arr), fit


def noise_batch(dim: int, b: int, rng) -> np.ndarray:
    """An i.i.d. standard-normal (b, dim) batch from the given stream."""
    if dim < 1 or b < 1:
        raise ConfigError("noise batch needs dim >= 1 and b >= 1")
    if not isinstance(rng, np.random.Generator):
        rng = stream(int(rng), "noise")
    return rng.standard_normal((b, dim))


def save_dataset(data, path) -> None:
    """Headerless CSV, one sample per row, round-trip exact."""
    arr = check_dataset(data)
    np.savetxt(path, arr, fmt="%.17g", delimiter=",")


def load_dataset(path) -> np.ndarray:
    arr = np.loadtxt(path, delimiter=",", ndmin=2)
    return check_dataset(arr)
