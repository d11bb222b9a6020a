"""Finite phase ensembles f(t, x, dξ) = Σ_θ μ_θ ρ_θ(t, x) δ(ξ - ξ_θ(t, x))."""
import logging
from dataclasses import dataclass

import numpy as np
from django.conf import settings
from rest_framework.exceptions import ValidationError

from core.utils import NumericalAbort
from fields.electromagnetic import field_energy
from spectral.calculus import gradient, mean, solve_poisson
from spectral.fourier import SpectralException, SpectralField, check_compatible
from spectral.norms import analytic_norm, weighted_coefficient_sums

GATE_LIMIT = 1 / np.sqrt(2)


@dataclass(frozen=True)
class Phase:
    weight: float
    rho: SpectralField
    xi: SpectralField
    label: str = ""


@dataclass(frozen=True)
class PhaseEnsemble:
    phases: tuple
    eps: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(self.phases))
        if not self.phases:
            raise ValueError("an ensemble needs at least one phase")
        fields = [p.rho for p in self.phases] + [p.xi for p in self.phases]
        check_compatible(*fields)
        for phase in self.phases:
            if not phase.rho.is_scalar or phase.xi.components != phase.rho.dim:
                raise SpectralException.DimensionMismatch(
                    f"phase {phase.label!r} needs a scalar density and a d-vector velocity"
                )

    @property
    def dim(self) -> int:
        return self.phases[0].rho.dim

    @property
    def cutoff(self) -> int:
        return self.phases[0].rho.cutoff

    @property
    def weights(self) -> np.ndarray:
        return np.array([p.weight for p in self.phases])

    @property
    def rhos(self):
        return [p.rho for p in self.phases]

    @property
    def xis(self):
        return [p.xi for p in self.phases]

    def with_fields(self, rhos, xis) -> "PhaseEnsemble":
        phases = [
            Phase(weight=p.weight, rho=rho, xi=xi, label=p.label)
            for p, rho, xi in zip(self.phases, rhos, xis)
        ]
        return PhaseEnsemble(phases=phases, eps=self.eps)

    def with_eps(self, eps) -> "PhaseEnsemble":
        return PhaseEnsemble(phases=self.phases, eps=eps)

    def validate(self, tol=None):
        """Probability weights, unit total mass and a positive grid density."""
        tol = settings.SIM_TOL_NORMALIZATION if tol is None else tol
        weights = self.weights
        if np.any(weights <= 0):
            raise ValidationError({"weights": "phase weights must be positive"})
        if abs(weights.sum() - 1.0) > tol:
            raise ValidationError({"weights": f"phase weights sum to {weights.sum():.12g}"})
        total = float(sum(p.weight * mean(p.rho)[0] for p in self.phases))
        if abs(total - 1.0) > tol:
            raise ValidationError({"neutrality": f"total mass is {total:.12g}, not 1"})
        floor = density_floor(self)
        if floor <= 0:
            raise ValidationError({"positivity": f"phase density reaches {floor:.3e}"})


def relativistic_velocity(xi: SpectralField, eps: float, delta=None) -> SpectralField:
    """v(ξ) = ξ / sqrt(1 + ε²|ξ|²) on the collocation grid.

    Refuses to run when ε|ξ|_δ exceeds 1/√2; without ``delta`` the Wiener
    norm (the δ → 1 limit) is used for the check.
    """
    if eps == 0:
        return xi
    gate = eps * _velocity_norm(xi, delta)
    if gate > GATE_LIMIT:
        raise NumericalAbort(f"validity gate violated: eps*|xi| = {gate:.4g} > 1/sqrt(2)")
    values = xi.to_grid()
    lorentz = np.sqrt(1.0 + eps**2 * np.sum(values**2, axis=0))
    return SpectralField.from_grid(values / lorentz, xi.cutoff)


def _velocity_norm(xi, delta=None):
    if delta is None:
        return float(np.max(weighted_coefficient_sums(xi, 1.0)))
    return analytic_norm(xi, delta)


def gate_value(ens: PhaseEnsemble, delta=None) -> float:
    """ε · sup_θ |ξ_θ|_δ."""
    return ens.eps * max(_velocity_norm(xi, delta) for xi in ens.xis)


def density_floor(ens: PhaseEnsemble) -> float:
    return float(min(np.min(rho.to_grid()) for rho in ens.rhos))


def check_state(ens: PhaseEnsemble, time=None, delta=None):
    """Abort on gate violation, non-finite data or a density undershoot."""
    for phase in ens.phases:
        if not (np.all(np.isfinite(phase.rho.coeffs)) and np.all(np.isfinite(phase.xi.coeffs))):
            raise NumericalAbort(f"non-finite values in phase {phase.label!r}", time=time)
    if ens.eps > 0:
        gate = gate_value(ens, delta)
        if gate > GATE_LIMIT:
            raise NumericalAbort(
                f"validity gate violated: eps*sup|xi| = {gate:.4g} > 1/sqrt(2)", time=time
            )
    floor = density_floor(ens)
    if floor < settings.SIM_POSITIVITY_ABORT:
        raise NumericalAbort(f"phase density undershoots to {floor:.3e}", time=time)
    if floor < 0:
        logging.warning(f"phase density undershoot {floor:.3e} at t={time}")


def total_density(ens: PhaseEnsemble) -> SpectralField:
    return sum(p.rho * p.weight for p in ens.phases)


def phase_velocities(ens: PhaseEnsemble, delta=None):
    return [relativistic_velocity(xi, ens.eps, delta) for xi in ens.xis]


def current_density(ens: PhaseEnsemble, velocities=None) -> SpectralField:
    """j = Σ μ_θ v(ξ_θ) ρ_θ."""
    velocities = phase_velocities(ens) if velocities is None else velocities
    values = sum(
        p.weight * v.to_grid() * p.rho.to_grid() for p, v in zip(ens.phases, velocities)
    )
    return SpectralField.from_grid(values, ens.cutoff)


@dataclass(frozen=True)
class Moments:
    rho_total: SpectralField
    j_total: SpectralField
    alpha: float
    m_alpha: np.ndarray
    fourth_moment: SpectralField

    @property
    def m_alpha_sup(self) -> float:
        return float(np.max(self.m_alpha))

    @property
    def fourth_moment_l1(self) -> float:
        return float(np.mean(np.abs(self.fourth_moment.to_grid())))


def moments(ens: PhaseEnsemble, alpha: float = 1.0) -> Moments:
    """Density, current, m_α on the grid and the fourth velocity moment."""
    velocities = phase_velocities(ens)
    m_alpha = 0.0
    fourth = 0.0
    for phase, v in zip(ens.phases, velocities):
        rho = phase.rho.to_grid()[0]
        speed = np.sqrt(np.sum(v.to_grid() ** 2, axis=0))
        m_alpha = m_alpha + phase.weight * speed**alpha * rho
        fourth = fourth + phase.weight * np.sum(phase.xi.to_grid() ** 2, axis=0) ** 2 * rho
    return Moments(
        rho_total=total_density(ens),
        j_total=current_density(ens, velocities),
        alpha=alpha,
        m_alpha=m_alpha,
        fourth_moment=SpectralField.from_grid(fourth[np.newaxis], ens.cutoff),
    )


def measure_eval(ens: PhaseEnsemble, phi_test) -> SpectralField:
    """x ↦ ∫ φ(ξ) f(x, dξ) = Σ μ_θ φ(ξ_θ(x)) ρ_θ(x).

    ``phi_test`` maps velocity grid values of shape (d, M, ..., M) to an array
    of shape (M, ..., M) or (c, M, ..., M).
    """
    total = 0.0
    for phase in ens.phases:
        values = np.asarray(phi_test(phase.xi.to_grid()), dtype=float)
        if values.ndim == ens.dim:
            values = values[np.newaxis]
        total = total + phase.weight * values * phase.rho.to_grid()
    return SpectralField.from_grid(total, ens.cutoff)


def kinetic_energy(ens: PhaseEnsemble) -> float:
    """Σ μ_θ ∫ ε^{-2}(sqrt(1 + ε²|ξ|²) - 1) ρ_θ dx; ½|ξ|² when ε = 0."""
    energy = 0.0
    for phase in ens.phases:
        xi_sq = np.sum(phase.xi.to_grid() ** 2, axis=0)
        # ε^{-2}(sqrt(1+ε²s) - 1) = s / (sqrt(1+ε²s) + 1)
        density = xi_sq / (np.sqrt(1.0 + ens.eps**2 * xi_sq) + 1.0)
        energy += phase.weight * float(np.mean(density * phase.rho.to_grid()[0]))
    return energy


def electrostatic_energy(ens: PhaseEnsemble) -> float:
    phi = solve_poisson(total_density(ens))
    return 0.5 * gradient(phi).l2_norm_sq()


def total_energy(ens: PhaseEnsemble, em=None) -> float:
    """Kinetic plus field energy; without ``em`` the field is the electrostatic one."""
    if em is None:
        return kinetic_energy(ens) + electrostatic_energy(ens)
    return kinetic_energy(ens) + field_energy(em)
