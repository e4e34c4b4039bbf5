"""Equilibrium analysis of the brainstorming game on discretized distributions.

With mixing weights (B, C) fixed, the best-response generator distributions
jointly solve the per-bin linear system (I - B) p_g = C p_data.  Because
every agent keeps positive weight on its own data, I - B is strictly
diagonally dominant, so the system has a unique solution and the Jacobi
iteration converges to it.  At that solution each agent's discriminator is
1/2 wherever mass lives and the game value hits its floor of -n ln 4.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ConvergenceError
from .topology import MixingWeights, ROW_SUM_TOL

SUM_TOL = 1e-9

# solver output may carry tiny negative dust in bins that are really zero
DUST_TOL = 1e-9

DIRECT_RESIDUAL_TOL = 1e-10

LN2 = float(np.log(2.0))
LN4 = float(np.log(4.0))


@dataclass(frozen=True, eq=False)
class DistVector:
    """A probability vector over K bins of a shared grid descriptor."""

    bins: np.ndarray
    grid: object = None

    def __post_init__(self):
        b = np.asarray(self.bins, dtype=np.float64).copy()
        if b.ndim != 1 or b.size == 0:
            raise ConfigError("bins must be a non-empty 1-D vector")
        if np.any(b < -DUST_TOL):
            raise ConfigError(f"negative bin mass {b.min()!r}")
        b[b < 0] = 0.0
        total = b.sum()
        if abs(total - 1.0) > SUM_TOL:
            raise ConfigError(f"bin masses sum to {total!r}, expected 1")
        b.setflags(write=False)
        object.__setattr__(self, "bins", b)

    @property
    def k(self) -> int:
        return self.bins.size


def point_mass(k: int, index: int, grid=None) -> DistVector:
    """All mass in one bin; handy as a maximally distinguishable test family."""
    if not 0 <= index < k:
        raise ConfigError(f"bin index {index} out of range for k={k}")
    bins = np.zeros(k)
    bins[index] = 1.0
    return DistVector(bins, grid)


def _same_grid(dists):
    grids = [d.grid for d in dists]
    ks = {d.k for d in dists}
    if len(ks) != 1 or any(g != grids[0] for g in grids):
        raise ConfigError("distributions live on different grids")
    return grids[0]


def _stack(p_data, n: int) -> tuple:
    if len(p_data) != n:
        raise ConfigError(f"need {n} data distributions, got {len(p_data)}")
    grid = _same_grid(p_data)
    return np.vstack([d.bins for d in p_data]), grid


def mixture(p_data_i: DistVector, ideas, pi_i: float) -> DistVector:
    """Convex combination pi_i * own data + sum of weighted idea distributions."""
    dists = [p_data_i] + [d for d, _ in ideas]
    grid = _same_grid(dists)
    weights = [pi_i] + [w for _, w in ideas]
    if any(w < 0 for w in weights):
        raise ConfigError("mixture weights must be nonnegative")
    total = sum(weights)
    if abs(total - 1.0) > ROW_SUM_TOL:
        raise ConfigError(f"mixture weights sum to {total!r}, expected 1")
    bins = pi_i * p_data_i.bins
    for d, w in ideas:
        bins = bins + w * d.bins
    return DistVector(bins, grid)


@dataclass(eq=False)
class EquilibriumSolution:
    """Joint best-response generator distributions plus solve diagnostics.

    ``iterations`` is 0 for the direct solve; ``residual`` is the max-norm
    of (I - B) p_g - C p_data at the returned solution.
    """

    p_g_star: list
    lam: np.ndarray
    iterations: int
    residual: float


def lambda_matrix(weights: MixingWeights) -> np.ndarray:
    """The row-stochastic matrix (I - B)^-1 C mapping data mixes to generators.

    Entry [i][j] is how much of agent j's data distribution shows up in
    agent i's equilibrium generator; it is positive exactly when j's ideas
    can reach i (or j = i).
    """
    n = weights.n
    A = np.eye(n) - weights.B
    return np.linalg.solve(A, np.diag(weights.C))


def solve_equilibrium_direct(weights: MixingWeights, p_data) -> EquilibriumSolution:
    """Solve (I - B) p_g = C p_data per bin by LU with partial pivoting."""
    P, grid = _stack(p_data, weights.n)
    A = np.eye(weights.n) - weights.B
    rhs = weights.C[:, None] * P
    X = np.linalg.solve(A, rhs)
    residual = float(np.abs(A @ X - rhs).max())
    if residual > DIRECT_RESIDUAL_TOL:
        # validated weights make A strictly diagonally dominant, so a bad
        # solve here is a bug, not a user error
        raise RuntimeError(f"direct solve residual {residual!r} out of range")
    p_g = [DistVector(X[i], grid) for i in range(weights.n)]
    return EquilibriumSolution(p_g, lambda_matrix(weights), 0, residual)


def jacobi_iterate(weights: MixingWeights, p_data, sweeps: int) -> np.ndarray:
    """Raw Jacobi iterate after a fixed number of sweeps, starting from 0.

    Sweep k yields the truncated Neumann series sum_{m<k} B^m C p_data, so
    intermediate iterates are not yet probability vectors; this low-level
    form exists for convergence analysis.
    """
    P, _ = _stack(p_data, weights.n)
    rhs = weights.C[:, None] * P
    p = np.zeros_like(P)
    for _ in range(sweeps):
        p = rhs + weights.B @ p
    return p


def solve_equilibrium_jacobi(weights: MixingWeights, p_data, tol: float = 1e-14,
                             max_iter: int = 20000) -> EquilibriumSolution:
    """Jacobi iteration p <- C p_data + B p from p = 0 until the residual

    max-norm |(I - B) p - C p_data| drops below tol (that residual equals
    the size of the next update).  The tight default tolerance keeps the
    returned bins summing to 1 well within validation slack.
    """
    if tol <= 0:
        raise ConfigError("tol must be positive")
    if max_iter < 1:
        raise ConfigError("max_iter must be >= 1")
    P, grid = _stack(p_data, weights.n)
    rhs = weights.C[:, None] * P
    B = weights.B
    p = np.zeros_like(P)
    residual = np.inf
    for it in range(1, max_iter + 1):
        p = rhs + B @ p
        residual = float(np.abs(rhs + B @ p - p).max())
        if residual < tol:
            p_g = [DistVector(p[i], grid) for i in range(weights.n)]
            return EquilibriumSolution(p_g, lambda_matrix(weights), it, residual)
    raise ConvergenceError(
        f"Jacobi did not reach tol={tol} in {max_iter} sweeps "
        f"(last residual {residual})",
        residual=residual,
        iterations=max_iter,
    )


def jsd(p: DistVector, q: DistVector) -> float:
    """Jensen-Shannon divergence in nats: 0 for identical, ln 2 for disjoint."""
    _same_grid([p, q])
    m = 0.5 * (p.bins + q.bins)

    def half_kl(a):
        mask = a > 0
        return 0.5 * float((a[mask] * np.log(a[mask] / m[mask])).sum())

    return max(0.0, half_kl(p.bins) + half_kl(q.bins))


def game_value(p_b, p_g) -> float:
    """Sum of per-agent divergences shifted so the floor sits at -n ln 4."""
    if len(p_b) != len(p_g):
        raise ConfigError("need matching mixture/generator lists")
    n = len(p_b)
    return -n * LN4 + sum(jsd(b, g) for b, g in zip(p_b, p_g))


def optimal_discriminator(p_b: DistVector, p_g: DistVector) -> np.ndarray:
    """Per-bin best response p_b / (p_b + p_g); 0.5 where both vanish."""
    _same_grid([p_b, p_g])
    denom = p_b.bins + p_g.bins
    out = np.full(p_b.k, 0.5)
    np.divide(p_b.bins, denom, out=out, where=denom > 0)
    return out
