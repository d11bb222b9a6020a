"""The coupling functional Q(t), the W2² ≤ 2Q check and the H⁻¹ vs W2 inequality."""
import logging
from dataclasses import asdict, dataclass

import numpy as np

from core.utils import seeded_rng
from lagrangian.particles import ParticleCloud, rejection_sample
from spectral.calculus import gradient, solve_poisson
from spectral.fourier import SpectralField

from .wasserstein import EmpiricalMeasure, TransportException, pairing_cost, w2_exact, w2_sliced

LOEPER_SLACK = 0.1
BOUND_SLACK_SIGMAS = 3.0


def coupling_Q(cloud: ParticleCloud) -> float:
    """½ Σ w_i (d_T(X^VP_i, X^VM_i)² + |Ξ^VP_i - Ξ^VM_i|²)."""
    vp = EmpiricalMeasure.from_cloud(cloud, "vp")
    vm = EmpiricalMeasure.from_cloud(cloud, "vm")
    return 0.5 * pairing_cost(vp, vm)


@dataclass(frozen=True)
class CouplingBound:
    time: float
    q: float
    w2_sq: float
    w2_sq_std: float
    slack: float
    subsample: int
    seeds: tuple
    holds: bool
    w2_sliced_sq: float = None

    def to_dict(self) -> dict:
        return asdict(self)


def subsampled_w2_sq(cloud: ParticleCloud, subsample: int, seed) -> tuple:
    """(W2², 2Q) on one subsample; both clouds keep the same indices."""
    if subsample < cloud.n:
        rng = seeded_rng(seed, "subsample")
        cloud = cloud.subsample(np.sort(rng.choice(cloud.n, size=subsample, replace=False)))
    vp = EmpiricalMeasure.from_cloud(cloud, "vp")
    vm = EmpiricalMeasure.from_cloud(cloud, "vm")
    return w2_exact(vp, vm) ** 2, pairing_cost(vp, vm)


def coupling_bound_check(
    cloud: ParticleCloud, subsample=1024, seed=0, n_repeats=3, n_projections=None
) -> CouplingBound:
    """Compare exact W2² on ``n_repeats`` subsamples with 2Q(t) of the full cloud.

    The slack is three standard deviations of the subsampled W2² across
    subsample seeds. With ``n_projections`` the sliced W2² of the full cloud,
    a lower bound of its exact W2², is reported as well.
    """
    seeds = tuple(int(seed) + r for r in range(n_repeats))
    values = [subsampled_w2_sq(cloud, subsample, s)[0] for s in seeds]
    logging.info(f"W2 subsample seeds {list(seeds)} at t={cloud.time:.6g}")
    q = coupling_Q(cloud)
    w2_sq = float(np.mean(values))
    std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    slack = BOUND_SLACK_SIGMAS * std
    sliced = None
    if n_projections is not None:
        vp = EmpiricalMeasure.from_cloud(cloud, "vp")
        vm = EmpiricalMeasure.from_cloud(cloud, "vm")
        sliced = w2_sliced(vp, vm, n_projections, seed=seed) ** 2
    return CouplingBound(
        time=cloud.time,
        q=q,
        w2_sq=w2_sq,
        w2_sq_std=std,
        slack=slack,
        subsample=min(subsample, cloud.n),
        seeds=seeds,
        holds=bool(w2_sq <= 2 * q + slack + 1e-12),
        w2_sliced_sq=sliced,
    )


@dataclass(frozen=True)
class LoeperResult:
    lhs: float
    rhs: float
    w2: float
    sup_density: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _require_positive(rho: SpectralField, name):
    floor = float(np.min(rho.to_grid()))
    if floor <= 0:
        raise TransportException.NonPositiveDensity(f"{name} reaches {floor:.3e}")


def field_gap(rho1: SpectralField, rho2: SpectralField) -> float:
    """‖∇ψ1 - ∇ψ2‖_{L²} by Parseval, -Δψ_i = ρ_i - 1."""
    return float(np.sqrt(gradient(solve_poisson(rho1) - solve_poisson(rho2)).l2_norm_sq()))


def loeper_check(rho1: SpectralField, rho2: SpectralField, n_samples=1024, seed=0, slack=LOEPER_SLACK):
    """‖∇ψ1 - ∇ψ2‖ ≤ max(‖ρ1‖∞, ‖ρ2‖∞)^{1/2} W2(ρ1, ρ2), W2 from samples."""
    _require_positive(rho1, "rho1")
    _require_positive(rho2, "rho2")
    lhs = field_gap(rho1, rho2)
    rng = seeded_rng(seed, "loeper")
    first = EmpiricalMeasure(rejection_sample(rho1, n_samples, rng))
    second = EmpiricalMeasure(rejection_sample(rho2, n_samples, rng))
    w2 = w2_exact(first, second)
    sup_density = max(rho1.sup_on_grid(), rho2.sup_on_grid())
    rhs = float(np.sqrt(sup_density) * w2)
    return LoeperResult(
        lhs=lhs,
        rhs=rhs,
        w2=w2,
        sup_density=sup_density,
        passed=bool(lhs <= rhs * (1 + slack) + 1e-12),
    )
