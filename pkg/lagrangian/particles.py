"""Paired characteristics of the Vlasov-Poisson and Vlasov-Maxwell flows.

Samples of f⁰ are drawn once and pushed by both flows; sample i of the VP
trajectory is always paired with sample i of the VM trajectory. Particles are
passive: they read the fluid fields and never feed a current back.
"""
import dataclasses
import logging
from dataclasses import dataclass

import numpy as np

from core.utils import NumericalAbort, seeded_rng
from multifluid.dynamics import RK4_NODES
from multifluid.ensemble import PhaseEnsemble, total_density
from spectral.calculus import gradient
from spectral.fourier import SpectralField, evaluate_at

TWO_PI = 2 * np.pi
MIN_EFFICIENCY = 1e-3
RK4_WEIGHTS = (1 / 6, 1 / 3, 1 / 3, 1 / 6)


@dataclass(frozen=True)
class ParticleCloud:
    x0: np.ndarray
    xi0: np.ndarray
    weights: np.ndarray
    phase_index: np.ndarray
    seed: int
    x_vp: np.ndarray
    xi_vp: np.ndarray
    x_vm: np.ndarray
    xi_vm: np.ndarray
    time: float = 0.0

    @classmethod
    def from_samples(cls, x0, xi0, weights=None, phase_index=None, seed=0):
        x0 = np.mod(np.asarray(x0, dtype=float), TWO_PI)
        xi0 = np.asarray(xi0, dtype=float)
        n = len(x0)
        weights = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
        if abs(weights.sum() - 1.0) > 1e-12 or np.any(weights < 0):
            raise ValueError("particle weights must be non-negative and sum to 1")
        phase_index = np.zeros(n, dtype=int) if phase_index is None else np.asarray(phase_index)
        return cls(
            x0=x0,
            xi0=xi0,
            weights=weights,
            phase_index=phase_index,
            seed=seed,
            x_vp=x0.copy(),
            xi_vp=xi0.copy(),
            x_vm=x0.copy(),
            xi_vm=xi0.copy(),
        )

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.x0.shape[1]

    def replace(self, **changes) -> "ParticleCloud":
        return dataclasses.replace(self, **changes)

    def subsample(self, indices) -> "ParticleCloud":
        """Same pairing restricted to ``indices``, weights renormalized."""
        weights = self.weights[indices]
        return self.replace(
            x0=self.x0[indices],
            xi0=self.xi0[indices],
            weights=weights / weights.sum(),
            phase_index=self.phase_index[indices],
            x_vp=self.x_vp[indices],
            xi_vp=self.xi_vp[indices],
            x_vm=self.x_vm[indices],
            xi_vm=self.xi_vm[indices],
        )


def wiener_bound(field: SpectralField) -> float:
    """Σ|F f(k)|, an upper bound of |f| everywhere."""
    return float(np.sum(np.abs(field.coeffs[0])))


def rejection_sample(density: SpectralField, n: int, rng, batch_size=4096) -> np.ndarray:
    """``n`` points distributed like the (non-negative part of the) density."""
    bound = wiener_bound(density)
    if bound <= 0:
        raise NumericalAbort("cannot sample a vanishing density")
    accepted = []
    n_accepted = proposed = 0
    while n_accepted < n:
        candidates = rng.uniform(0.0, TWO_PI, size=(batch_size, density.dim))
        values = evaluate_at(density, candidates)[:, 0]
        keep = candidates[rng.uniform(0.0, bound, size=batch_size) < values]
        accepted.append(keep)
        n_accepted += len(keep)
        proposed += batch_size
        if proposed >= 100 * batch_size and n_accepted / proposed < MIN_EFFICIENCY:
            raise NumericalAbort(
                f"rejection sampling efficiency {n_accepted / proposed:.2e} below {MIN_EFFICIENCY}"
            )
    return np.concatenate(accepted)[:n]


def sample_cloud(ens: PhaseEnsemble, n: int, seed) -> ParticleCloud:
    """Draw θ ∝ μ_θ⟨ρ_θ⟩, then x ~ ρ_θ and ξ = ξ_θ(x)."""
    if n < 1:
        raise ValueError("a cloud needs at least one sample")
    rng = seeded_rng(seed, "cloud")
    masses = np.array([p.weight * p.rho.coeffs[(0,) + p.rho.plan.zero].real for p in ens.phases])
    counts = rng.multinomial(n, masses / masses.sum())
    xs, xis, index = [], [], []
    for theta, (phase, count) in enumerate(zip(ens.phases, counts)):
        if count == 0:
            continue
        x = rejection_sample(phase.rho, count, rng)
        xs.append(x)
        xis.append(evaluate_at(phase.xi, x))
        index.append(np.full(count, theta))
    logging.info(f"Sampled {n} particles with seed {seed}: phase counts {counts.tolist()}")
    return ParticleCloud.from_samples(
        np.concatenate(xs), np.concatenate(xis), phase_index=np.concatenate(index), seed=seed
    )


def _stages(fields):
    """A single field is frozen over the step; a sequence gives one per RK4 stage."""
    if fields is None or isinstance(fields, SpectralField):
        return [fields] * 4
    fields = list(fields)
    if len(fields) != 4:
        raise ValueError(f"expected 4 stage fields, got {len(fields)}")
    return fields


def _rk4(x, xi, dt, rhs):
    """Classical RK4 on (x, ξ); ``rhs(stage, x, ξ)`` returns (ẋ, ξ̇)."""
    slopes = []
    for n, node in enumerate(RK4_NODES):
        if n == 0:
            xs, xis = x, xi
        else:
            dx, dxi = slopes[-1]
            xs, xis = x + node * dt * dx, xi + node * dt * dxi
        slopes.append(rhs(n, np.mod(xs, TWO_PI), xis))
    new_x = x + dt * sum(w * s[0] for w, s in zip(RK4_WEIGHTS, slopes))
    new_xi = xi + dt * sum(w * s[1] for w, s in zip(RK4_WEIGHTS, slopes))
    return np.mod(new_x, TWO_PI), new_xi


def relativistic_speed(xi, eps):
    """v(ξ) per sample."""
    if eps == 0:
        return xi
    return xi / np.sqrt(1.0 + eps**2 * np.sum(xi**2, axis=1, keepdims=True))


def magnetic_force(v, b, eps):
    """ε v×B per sample; ``b`` holds one column for d=2 and three for d=3."""
    if v.shape[1] == 3:
        return eps * np.cross(v, b)
    return eps * np.column_stack([v[:, 1] * b[:, 0], -v[:, 0] * b[:, 0]])


def flow_vp_step(cloud: ParticleCloud, phi, dt) -> ParticleCloud:
    """Ẋ = Ξ, Ξ̇ = -∇φ(X); ``phi`` is one potential or the four stage potentials."""
    if dt == 0:
        raise ValueError("dt must be non-zero")
    forces = [None if p is None else -gradient(p) for p in _stages(phi)]

    def rhs(stage, x, xi):
        force = forces[stage]
        return xi, (np.zeros_like(xi) if force is None else evaluate_at(force, x))

    x, xi = _rk4(cloud.x_vp, cloud.xi_vp, dt, rhs)
    return cloud.replace(x_vp=x, xi_vp=xi)


def flow_vm_step(cloud: ParticleCloud, E, B, eps, dt) -> ParticleCloud:
    """Ẋ = v(Ξ), Ξ̇ = E(X) + ε v(Ξ)×B(X).

    ``E`` and ``B`` are single fields or four stage fields each; ``B`` is
    ignored for d=1 and may be ``None``.
    """
    if dt == 0:
        raise ValueError("dt must be non-zero")
    electric = _stages(E)
    magnetic = _stages(B if cloud.dim > 1 and eps > 0 else None)

    def rhs(stage, x, xi):
        v = relativistic_speed(xi, eps)
        force = np.zeros_like(xi) if electric[stage] is None else evaluate_at(electric[stage], x)
        if magnetic[stage] is not None:
            force = force + magnetic_force(v, evaluate_at(magnetic[stage], x), eps)
        return v, force

    x, xi = _rk4(cloud.x_vm, cloud.xi_vm, dt, rhs)
    return cloud.replace(x_vm=x, xi_vm=xi)


def advance_time(cloud: ParticleCloud, dt) -> ParticleCloud:
    return cloud.replace(time=cloud.time + dt)


@dataclass(frozen=True)
class ConsistencyReport:
    density_score: float
    max_residual: float
    mean_residual: float
    n_bins: int

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _cell_factors(modes, n_bins):
    """∫ over each cell of e^{ikx} dx / 2π, shape (n_bins, 2K+1)."""
    edges = np.linspace(0.0, TWO_PI, n_bins + 1)
    k = modes[np.newaxis, :]
    lo, hi = edges[:-1, np.newaxis], edges[1:, np.newaxis]
    k_safe = np.where(k == 0, 1, k)
    factors = (np.exp(1j * k_safe * hi) - np.exp(1j * k_safe * lo)) / (1j * k_safe * TWO_PI)
    return np.where(k == 0, (hi - lo) / TWO_PI, factors)


def cell_masses(density: SpectralField, n_bins: int) -> np.ndarray:
    """Exact mass of the density in each cell of a uniform n_bins^d partition."""
    factors = _cell_factors(density.plan.modes, n_bins)
    masses = density.coeffs[0]
    for _ in range(density.dim):
        # contract the leading mode axis, append the cell axis at the end
        masses = np.tensordot(masses, factors, axes=([0], [1]))
    return masses.real


def consistency_check(cloud: ParticleCloud, ens: PhaseEnsemble, system="vm", n_bins=8):
    """Histogram-vs-fluid density score and monokinetic residual |Ξ - ξ_θ(X)|."""
    x, xi = (cloud.x_vm, cloud.xi_vm) if system == "vm" else (cloud.x_vp, cloud.xi_vp)
    edges = [np.linspace(0.0, TWO_PI, n_bins + 1)] * cloud.dim
    histogram, _ = np.histogramdd(x, bins=edges, weights=cloud.weights)
    score = 0.5 * float(np.sum(np.abs(histogram - cell_masses(total_density(ens), n_bins))))

    residual = np.zeros(cloud.n)
    for theta, phase in enumerate(ens.phases):
        mask = cloud.phase_index == theta
        if np.any(mask):
            residual[mask] = np.linalg.norm(xi[mask] - evaluate_at(phase.xi, x[mask]), axis=1)
    return ConsistencyReport(
        density_score=score,
        max_residual=float(residual.max()),
        mean_residual=float(np.sum(cloud.weights * residual)),
        n_bins=n_bins,
    )
