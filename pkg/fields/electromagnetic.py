"""Coulomb-gauge electromagnetic state and its exact per-mode wave integrator.

The vector potential obeys ε²∂²A - ΔA = εP(j). Each mode k ≠ 0 is a harmonic
oscillator of frequency |k|/ε, advanced by its exact rotation; the source is
taken linear in time over a step, for which the update is exact as well. The
mean of εȦ has no restoring force and simply integrates ⟨j⟩.
"""
import dataclasses
from dataclasses import dataclass

import numpy as np

from spectral.calculus import (
    biot_savart,
    curl,
    divergence_residual,
    gradient,
    leray_project,
    mean,
    solve_poisson,
)
from spectral.fourier import SpectralException, SpectralField

from .validators import validate_normalized_data


@dataclass(frozen=True)
class EMState:
    eps: float
    phi: SpectralField
    A: SpectralField
    eps_adot: SpectralField
    mean_b0: np.ndarray
    time: float = 0.0

    @property
    def dim(self) -> int:
        return self.phi.dim

    @property
    def cutoff(self) -> int:
        return self.phi.cutoff

    @property
    def mean_eps_adot(self) -> np.ndarray:
        return mean(self.eps_adot)

    def replace(self, **changes) -> "EMState":
        return dataclasses.replace(self, **changes)


def _mean_only(field: SpectralField) -> SpectralField:
    return SpectralField.zeros(field.dim, field.cutoff, field.components).shifted(
        mean(field)
    )


def init_em_state(rho0, j0_mean, E0, B0, eps, mean_e_bound=None, tol=None) -> EMState:
    """State at t=0 from normalized data.

    ``B0`` is a vector field for d=3, a scalar for d=2 and ``None`` for d=1.
    ``mean_e_bound`` relaxes ⟨E0⟩ = 0 to |⟨E0⟩| ≤ bound.
    """
    if eps < 0:
        raise ValueError(f"eps must be non-negative, got {eps}")
    validate_normalized_data(rho0, j0_mean, E0, B0, tol=tol, mean_e_bound=mean_e_bound)

    dim, cutoff = rho0.dim, rho0.cutoff
    phi = solve_poisson(rho0)
    # E = -∇φ - εȦ at t=0
    eps_adot = -(E0 + gradient(phi))
    if dim == 1:
        A = SpectralField.zeros(dim, cutoff, dim)
        mean_b0 = np.zeros(0)
    elif B0 is None:
        A = SpectralField.zeros(dim, cutoff, dim)
        mean_b0 = np.zeros(1 if dim == 2 else 3)
    else:
        A = biot_savart(B0)
        mean_b0 = mean(B0)
    if eps == 0:
        A = SpectralField.zeros(dim, cutoff, dim)
        eps_adot = _mean_only(eps_adot)
    return EMState(eps=eps, phi=phi, A=A, eps_adot=eps_adot, mean_b0=mean_b0)


def wave_step(state: EMState, source_j, dt, source_slope=None, source_curvature=None) -> EMState:
    """Advance (A, εȦ) over ``dt`` with source P(j0 + s·j1 + s²·j2), s ∈ [0, dt].

    ``source_j`` is the current at the start of the step, ``source_slope`` and
    ``source_curvature`` the linear and quadratic coefficients (zero when
    omitted, so a bare call holds the source frozen).
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    plan = state.A.plan
    zero = (slice(None),) + plan.zero
    s0 = leray_project(source_j).coeffs
    s1 = np.zeros_like(s0) if source_slope is None else leray_project(source_slope).coeffs
    s2 = np.zeros_like(s0) if source_curvature is None else leray_project(source_curvature).coeffs
    new_mean = (
        state.eps_adot.coeffs[zero]
        + dt * s0[zero]
        + 0.5 * dt**2 * s1[zero]
        + dt**3 / 3.0 * s2[zero]
    )

    if state.eps == 0:
        A = np.zeros_like(s0)
        W = np.zeros_like(s0)
    else:
        eps = state.eps
        k = plan.k_norm
        k_safe = np.where(k > 0, k, 1.0)
        cos, sin = np.cos(k * dt / eps), np.sin(k * dt / eps)
        # polynomial particular solution of ε²Ä + |k|²A = ε P j(s)
        offset = 2 * eps**3 * s2 * plan.inv_k_sq**2
        particular_start = eps * s0 * plan.inv_k_sq - offset
        particular_end = eps * (s0 + dt * s1 + dt**2 * s2) * plan.inv_k_sq - offset
        particular_w_start = eps**2 * s1 * plan.inv_k_sq
        particular_w_end = eps**2 * (s1 + 2 * dt * s2) * plan.inv_k_sq
        a = state.A.coeffs - particular_start
        w = state.eps_adot.coeffs - particular_w_start
        A = particular_end + cos * a + sin * w / k_safe
        W = particular_w_end - k * sin * a + cos * w
        A[zero] = 0
    W[zero] = new_mean
    return state.replace(
        A=SpectralField(A), eps_adot=SpectralField(W), time=state.time + dt
    )


def assemble_E(state: EMState) -> SpectralField:
    return -gradient(state.phi) - state.eps_adot


def assemble_B(state: EMState) -> SpectralField:
    """curl A + ⟨B0⟩: a vector for d=3, the planar scalar for d=2."""
    if state.dim == 1:
        raise SpectralException.DimensionMismatch("no magnetic field for d=1")
    return curl(state.A).shifted(state.mean_b0)


def mean_momentum_ledger(state: EMState, integrated_mean_j, initial_mean=None) -> float:
    """|⟨εȦ⟩(t) - ∫⟨j⟩ds - ⟨εȦ⟩(0)|."""
    initial_mean = 0.0 if initial_mean is None else np.asarray(initial_mean)
    residual = state.mean_eps_adot - np.asarray(integrated_mean_j) - initial_mean
    return float(np.linalg.norm(residual))


def field_energy(state: EMState) -> float:
    energy = assemble_E(state).l2_norm_sq()
    if state.dim > 1:
        energy += assemble_B(state).l2_norm_sq()
    return 0.5 * energy


def gauge_residuals(state: EMState):
    """(max mode-wise |k·Â|, |⟨A⟩|)."""
    return divergence_residual(state.A), float(np.linalg.norm(mean(state.A)))


def em_diagnostics(state: EMState, integrated_mean_j, initial_mean=None) -> dict:
    """One row of the per-step field diagnostics stream."""
    div_a, mean_a = gauge_residuals(state)
    row = {
        "t": state.time,
        "field_energy": field_energy(state),
        "gauge_div_a": div_a,
        "gauge_mean_a": mean_a,
        "ledger_residual": mean_momentum_ledger(state, integrated_mean_j, initial_mean),
    }
    if state.dim > 1:
        for i, value in enumerate(mean(assemble_B(state))):
            row[f"mean_b_{i + 1}"] = value
    return row
