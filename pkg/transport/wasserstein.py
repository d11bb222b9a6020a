"""Quadratic Wasserstein distances between weighted point clouds on T^d × R^d.

Positions use the geodesic torus distance per axis, velocities the Euclidean
one. Measures without velocities are position-only.
"""
from dataclasses import dataclass

import numpy as np
import ot
from django.conf import settings
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist
from scipy.stats import ortho_group

from core.utils import seeded_rng

TWO_PI = 2 * np.pi


class TransportException:
    class UnsupportedMeasures(Exception):
        pass

    class InvalidProjectionCount(Exception):
        pass

    class NonPositiveDensity(Exception):
        pass


@dataclass(frozen=True)
class EmpiricalMeasure:
    positions: np.ndarray
    velocities: np.ndarray = None
    weights: np.ndarray = None

    def __post_init__(self):
        positions = np.mod(np.atleast_2d(np.asarray(self.positions, dtype=float)), TWO_PI)
        object.__setattr__(self, "positions", positions)
        n = len(positions)
        if self.velocities is not None:
            velocities = np.atleast_2d(np.asarray(self.velocities, dtype=float))
            if len(velocities) != n:
                raise TransportException.UnsupportedMeasures(
                    f"{n} positions but {len(velocities)} velocities"
                )
            object.__setattr__(self, "velocities", velocities)
        weights = np.full(n, 1.0 / n) if self.weights is None else np.asarray(self.weights, dtype=float)
        if len(weights) != n or np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise TransportException.UnsupportedMeasures("weights must be non-negative and sum to 1")
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_cloud(cls, cloud, system="vp"):
        if system == "vp":
            return cls(cloud.x_vp, cloud.xi_vp, cloud.weights)
        if system == "vm":
            return cls(cloud.x_vm, cloud.xi_vm, cloud.weights)
        raise ValueError(f"unknown system {system!r}")

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def has_velocities(self) -> bool:
        return self.velocities is not None

    @property
    def is_uniform(self) -> bool:
        return bool(np.allclose(self.weights, 1.0 / self.n, rtol=0, atol=1e-15))

    def translated(self, position_shift=0.0, velocity_shift=0.0) -> "EmpiricalMeasure":
        velocities = None if self.velocities is None else self.velocities + velocity_shift
        return EmpiricalMeasure(self.positions + position_shift, velocities, self.weights)


def torus_gap(x, y):
    """Per-axis geodesic distance, elementwise."""
    delta = np.abs(np.mod(x - y, TWO_PI))
    return np.minimum(delta, TWO_PI - delta)


def _check_compatible(mu: EmpiricalMeasure, nu: EmpiricalMeasure):
    if mu.positions.shape[1] != nu.positions.shape[1] or mu.has_velocities != nu.has_velocities:
        raise TransportException.UnsupportedMeasures("measures live on different spaces")


def cost_matrix(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> np.ndarray:
    """Squared product distance between every pair of points."""
    _check_compatible(mu, nu)
    cost = np.zeros((mu.n, nu.n))
    for a in range(mu.positions.shape[1]):
        cost += torus_gap(mu.positions[:, a, np.newaxis], nu.positions[np.newaxis, :, a]) ** 2
    if mu.has_velocities:
        cost += cdist(mu.velocities, nu.velocities, "sqeuclidean")
    return cost


def pairing_cost(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    """Σ w_i d(p_i, q_i)² for the index pairing of two equal-size clouds."""
    if mu.n != nu.n:
        raise TransportException.UnsupportedMeasures("the index pairing needs equal sizes")
    _check_compatible(mu, nu)
    squared = np.sum(torus_gap(mu.positions, nu.positions) ** 2, axis=1)
    if mu.has_velocities:
        squared += np.sum((mu.velocities - nu.velocities) ** 2, axis=1)
    return float(np.sum(mu.weights * squared))


def w2_exact(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    """Exact W2: assignment for equal uniform clouds, network simplex otherwise."""
    if mu.n == nu.n and mu.is_uniform and nu.is_uniform:
        if mu.n > settings.SIM_EXACT_OT_LIMIT:
            raise TransportException.UnsupportedMeasures(
                f"{mu.n} points exceed the exact assignment limit {settings.SIM_EXACT_OT_LIMIT}"
            )
        cost = cost_matrix(mu, nu)
        rows, cols = linear_sum_assignment(cost)
        return float(np.sqrt(max(cost[rows, cols].mean(), 0.0)))
    if max(mu.n, nu.n) > settings.SIM_LP_OT_LIMIT:
        raise TransportException.UnsupportedMeasures(
            f"weighted clouds of sizes {mu.n}, {nu.n} exceed the LP limit {settings.SIM_LP_OT_LIMIT}"
        )
    cost = cost_matrix(mu, nu)
    return float(np.sqrt(max(ot.emd2(mu.weights, nu.weights, cost), 0.0)))


def circular_w2_sq(a, b, chunk=256) -> float:
    """Squared W2 between equal-size uniform samples of the circle [0, 2π).

    The optimal matching pairs the sorted samples up to a cyclic shift.
    """
    a, b = np.sort(np.mod(a, TWO_PI)), np.sort(np.mod(b, TWO_PI))
    n = len(a)
    best = np.inf
    for start in range(0, n, chunk):
        shifts = np.arange(start, min(start + chunk, n))
        index = (np.arange(n)[np.newaxis, :] + shifts[:, np.newaxis]) % n
        costs = np.mean(torus_gap(a[np.newaxis, :], b[index]) ** 2, axis=1)
        best = min(best, float(costs.min()))
    return best


def _velocity_frames(rng, dim, n_frames):
    if dim == 1:
        return [np.ones((1, 1))] * n_frames
    return [ortho_group.rvs(dim, random_state=rng) for _ in range(n_frames)]


def w2_sliced(mu: EmpiricalMeasure, nu: EmpiricalMeasure, n_proj: int, seed=0) -> float:
    """Sliced estimate of W2, never above the exact value.

    Each torus axis contributes its circular 1-D transport cost; velocities
    are projected on ``n_proj`` random orthonormal frames and the 1-D costs of
    a frame's directions are summed, then averaged over frames.
    """
    if n_proj < 1:
        raise TransportException.InvalidProjectionCount(f"n_proj must be positive, got {n_proj}")
    _check_compatible(mu, nu)
    if mu.n != nu.n or not (mu.is_uniform and nu.is_uniform):
        raise TransportException.UnsupportedMeasures("sliced W2 needs equal-size uniform clouds")

    total = sum(
        circular_w2_sq(mu.positions[:, a], nu.positions[:, a]) for a in range(mu.positions.shape[1])
    )
    if mu.has_velocities:
        rng = seeded_rng(seed, "sliced")
        frames = _velocity_frames(rng, mu.velocities.shape[1], n_proj)
        velocity_part = 0.0
        for frame in frames:
            u, v = mu.velocities @ frame, nu.velocities @ frame
            velocity_part += sum(
                float(ot.wasserstein_1d(u[:, j], v[:, j], p=2)) for j in range(frame.shape[1])
            )
        total += velocity_part / n_proj
    return float(np.sqrt(max(total, 0.0)))
