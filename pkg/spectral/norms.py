from dataclasses import dataclass

import numpy as np
from django.conf import settings

from .fourier import SpectralException, SpectralField

# |k| in the weight δ^{|k|}
NORM_OF_K = "euclidean"


@dataclass(frozen=True)
class AnalyticNormParams:
    """Parameters of the shrinking analytic scale.

    ``delta`` is the working radius, ``delta0`` the initial one, ``eta`` the
    shrink rate and ``beta`` the derivative-loss exponent.
    """

    delta: float
    delta0: float
    eta: float
    beta: float
    n_delta: int = None

    def __post_init__(self):
        if self.delta0 <= 1 or self.delta <= 1:
            raise SpectralException.InvalidRadius(
                f"radii must exceed 1, got delta={self.delta}, delta0={self.delta0}"
            )
        if self.delta > self.delta0:
            raise SpectralException.InvalidRadius(
                f"delta={self.delta} exceeds delta0={self.delta0}"
            )
        if self.eta <= 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if self.n_delta is None:
            object.__setattr__(self, "n_delta", settings.SIM_DELTA_GRID)
        if self.n_delta < 1:
            raise ValueError("n_delta must be at least 1")

    def delta_grid(self):
        # j = J would give δ = 1, which the norm does not accept
        j = np.arange(self.n_delta) / self.n_delta
        return self.delta0 * (1 - j) + j

    def horizon(self, delta=None) -> float:
        """Time up to which radius ``delta`` is still inside the scale."""
        delta = self.delta if delta is None else delta
        return self.eta * (self.delta0 - delta)


def weighted_coefficient_sums(field: SpectralField, delta: float) -> np.ndarray:
    """Σ_k |F f(k)| δ^{|k|} per component; δ = 1 gives the Wiener norm."""
    weights = delta ** field.plan.k_norm
    spatial = field.plan.spatial_axes
    return np.sum(np.abs(field.coeffs) * weights, axis=spatial)


def analytic_norm(field: SpectralField, delta: float) -> float:
    if delta <= 1:
        raise SpectralException.InvalidRadius(f"delta must exceed 1, got {delta}")
    return float(np.max(weighted_coefficient_sums(field, delta)))


def jacobian(field: SpectralField) -> SpectralField:
    """All first derivatives of all components, stacked component-major."""
    k = field.plan.k
    parts = [
        field.coeffs[c] * (1j * k[a])
        for c in range(field.components)
        for a in range(field.dim)
    ]
    return SpectralField(np.stack(parts))


def shrinking_norm(trajectory, params: AnalyticNormParams, deltas=None) -> float:
    """Discrete sup of |u(t)|_δ + (δ0 - δ - t/η)^β |∇u(t)|_δ.

    ``trajectory`` is a sequence of ``(t, field)`` pairs; a pair contributes
    for the radii δ with t ≤ η(δ0 - δ).
    """
    trajectory = list(trajectory)
    if not trajectory:
        raise SpectralException.EmptyTrajectory("shrinking norm of an empty trajectory")
    deltas = params.delta_grid() if deltas is None else np.atleast_1d(deltas)

    samples = [(t, u, jacobian(u)) for t, u in trajectory]
    best = 0.0
    for delta in deltas:
        horizon = params.horizon(delta)
        for t, u, grad in samples:
            if t > horizon * (1 + 1e-12):
                continue
            margin = max(params.delta0 - delta - t / params.eta, 0.0)
            value = analytic_norm(u, delta) + margin**params.beta * analytic_norm(
                grad, delta
            )
            best = max(best, value)
    return best
