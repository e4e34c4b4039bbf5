"""Sample-based evaluation: histogram JSD, region coverage, D balance.

Generated and real samples are compared by histogramming both onto a shared
grid and taking the discrete Jensen-Shannon divergence.  Absolute values
depend on the grid and the sample count, so consumers should compare numbers
only against baselines measured with the same grid and reference draw.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import noise_batch
from .equilibrium import DistVector, jsd
from .errors import ConfigError
from .nn import forward
from .rng import stream

EVAL_SAMPLES = 10_000


@dataclass(frozen=True)
class HistogramGrid:
    """Rectangular binning: per-dimension (lo, hi) ranges and bin counts."""

    ranges: tuple  # of (lo, hi) pairs
    bins: tuple  # of ints

    def __post_init__(self):
        ranges = tuple((float(a), float(b)) for a, b in self.ranges)
        bins = tuple(int(k) for k in self.bins)
        object.__setattr__(self, "ranges", ranges)
        object.__setattr__(self, "bins", bins)
        if len(ranges) != len(bins) or not ranges:
            raise ConfigError("grid needs one (range, bin count) pair per dimension")
        if any(k < 2 for k in bins):
            raise ConfigError("every dimension needs at least 2 bins")
        if any(not (np.isfinite(a) and np.isfinite(b) and a < b) for a, b in ranges):
            raise ConfigError("grid ranges must be finite with lo < hi")

    @property
    def dims(self) -> int:
        return len(self.bins)

    @property
    def k(self) -> int:
        return int(np.prod(self.bins))


def default_grid() -> HistogramGrid:
    """50x50 over the normalized square [-1, 1]^2."""
    return HistogramGrid(((-1.0, 1.0), (-1.0, 1.0)), (50, 50))


def histogram(samples, grid: HistogramGrid) -> DistVector:
    """Normalized bin masses for a sample set; outliers join the edge bins."""
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ConfigError("need a non-empty (n, dims) sample array")
    if arr.shape[1] != grid.dims:
        raise ConfigError(f"samples are {arr.shape[1]}-D but the grid is {grid.dims}-D")
    flat = np.zeros(arr.shape[0], dtype=np.int64)
    for d, ((lo, hi), nb) in enumerate(zip(grid.ranges, grid.bins)):
        idx = np.floor((arr[:, d] - lo) / (hi - lo) * nb).astype(np.int64)
        np.clip(idx, 0, nb - 1, out=idx)
        flat = flat * nb + idx
    counts = np.bincount(flat, minlength=grid.k).astype(np.float64)
    return DistVector(counts / arr.shape[0], grid)


def empirical_jsd(samples_a, samples_b, grid: HistogramGrid | None = None) -> float:
    """JSD in nats between the binned distributions of two sample sets."""
    if grid is None:
        grid = default_grid()
    return jsd(histogram(samples_a, grid), histogram(samples_b, grid))


def coverage(samples, region) -> float:
    """Fraction of samples for which ``region(samples) -> bool mask`` holds."""
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ConfigError("need a non-empty (n, dims) sample array")
    mask = np.asarray(region(arr), dtype=bool)
    if mask.shape != (arr.shape[0],):
        raise ConfigError("region predicate must return one bool per sample")
    return float(mask.sum() / arr.shape[0])


def discriminator_balance(agent, n_eval: int = EVAL_SAMPLES, rng=None) -> tuple:
    """(mean D on own real samples, mean D on own generated samples).

    Pure evaluation on a dedicated stream; near the equilibrium both means
    drift toward 1/2.
    """
    if n_eval < 1:
        raise ConfigError("n_eval must be >= 1")
    if rng is None:
        rng = stream(agent.seed, "eval-balance", agent.agent_id)
    rows = rng.integers(0, agent.data.shape[0], size=n_eval)
    real = agent.data[rows]
    fake = forward(agent.g, noise_batch(agent.g.input_dim, n_eval, rng))
    return float(forward(agent.d, real).mean()), float(forward(agent.d, fake).mean())
