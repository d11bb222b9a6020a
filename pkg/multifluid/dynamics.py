"""Time stepping of the multifluid Vlasov-Maxwell and Vlasov-Poisson systems.

Both steppers are the classical four-stage Runge-Kutta scheme on the phase
unknowns (ρ_θ, ξ_θ). On the VM side the wave part is integrated exactly: the
stage fields come from the wave integrator driven by polynomial fits of the
stage currents (an exponential fourth-order scheme that collapses to the
classical one for the phases), φ from the stage density. Callers that need the
stage fields (the particle flows) pass a list as ``stages`` and receive one
entry per stage.
"""
import numpy as np
from scipy.integrate import simpson, trapezoid

from core.utils import NumericalAbort
from fields.electromagnetic import EMState, assemble_B, assemble_E, wave_step
from spectral.calculus import (
    derivative,
    divergence,
    gradient,
    leray_project,
    mean,
    solve_poisson,
)
from spectral.fourier import SpectralField

from .ensemble import (
    PhaseEnsemble,
    check_state,
    current_density,
    phase_velocities,
    total_density,
)

RK4_NODES = (0.0, 0.5, 0.5, 1.0)


class MeanCurrentLedger:
    """Samples ⟨j⟩ at the step boundaries and integrates them by composite Simpson.

    The wave step integrates the mean mode from the stage currents, so the
    residual against ⟨εȦ⟩ measures two independent quadratures.
    """

    def __init__(self, dim):
        self.dim = dim
        self.times = []
        self.values = []

    def __len__(self):
        return len(self.times)

    def observe(self, time, mean_current):
        if self.times and time <= self.times[-1]:
            raise ValueError(f"ledger times must increase, got {time} after {self.times[-1]}")
        self.times.append(float(time))
        self.values.append(np.asarray(mean_current, dtype=float).reshape(self.dim))

    @property
    def integrated(self) -> np.ndarray:
        if len(self.times) < 2:
            return np.zeros(self.dim)
        values = np.stack(self.values)
        if len(self.times) == 2:
            return trapezoid(values, x=self.times, axis=0)
        return simpson(values, x=self.times, axis=0)


def advect(velocity: SpectralField, field: SpectralField) -> SpectralField:
    """(v·∇)F as a dealiased product."""
    v = velocity.to_grid()
    values = sum(v[a] * derivative(field, a).to_grid() for a in range(field.dim))
    return SpectralField.from_grid(values, field.cutoff)


def lorentz_force(velocity: SpectralField, B: SpectralField, eps: float):
    """ε v×B on the grid: the planar form ε(v2 B, -v1 B) for d=2."""
    v, b = velocity.to_grid(), B.to_grid()
    if velocity.dim == 3:
        values = np.cross(v, b, axis=0)
    else:
        values = np.stack([v[1] * b[0], -v[0] * b[0]])
    return SpectralField.from_grid(eps * values, velocity.cutoff)


def vm_rhs(ens: PhaseEnsemble, E: SpectralField, B=None, velocities=None):
    """Per-phase (∂tρ_θ, ∂tξ_θ) for given fields; ``B`` is ignored when ε = 0 or d = 1."""
    velocities = phase_velocities(ens) if velocities is None else velocities
    magnetic = B is not None and ens.eps > 0 and ens.dim > 1
    out = []
    for phase, v in zip(ens.phases, velocities):
        drho = -divergence(multiply_grid(phase.rho, v))
        dxi = E - advect(v, phase.xi)
        if magnetic:
            dxi = dxi + lorentz_force(v, B, ens.eps)
        if not (np.all(np.isfinite(drho.coeffs)) and np.all(np.isfinite(dxi.coeffs))):
            raise NumericalAbort(f"non-finite right-hand side in phase {phase.label!r}")
        out.append((drho, dxi))
    return out


def vp_rhs(ens: PhaseEnsemble, phi=None):
    phi = solve_poisson(total_density(ens)) if phi is None else phi
    return vm_rhs(ens.with_eps(0.0), -gradient(phi))


def multiply_grid(scalar: SpectralField, vector: SpectralField) -> SpectralField:
    return SpectralField.from_grid(scalar.to_grid() * vector.to_grid(), scalar.cutoff)


def _advance(ens: PhaseEnsemble, slopes, factor):
    rhos = [p.rho + drho * factor for p, (drho, _) in zip(ens.phases, slopes)]
    xis = [p.xi + dxi * factor for p, (_, dxi) in zip(ens.phases, slopes)]
    return ens.with_fields(rhos, xis)


def _combine(ens: PhaseEnsemble, stage_slopes, dt):
    weights = (1 / 6, 1 / 3, 1 / 3, 1 / 6)
    rhos, xis = [], []
    for i, phase in enumerate(ens.phases):
        rhos.append(phase.rho + sum(s[i][0] * (w * dt) for s, w in zip(stage_slopes, weights)))
        xis.append(phase.xi + sum(s[i][1] * (w * dt) for s, w in zip(stage_slopes, weights)))
    return ens.with_fields(rhos, xis)


def _stage_em(em: EMState, ens_stage, offset, current, slope=None):
    """Fields at t + offset: waves driven by ``current + s·slope``, φ from the stage density."""
    return wave_step(em, current, offset, slope).replace(
        phi=solve_poisson(total_density(ens_stage))
    )


def vm_step(ens: PhaseEnsemble, em: EMState, dt, ledger=None, stages=None):
    """One step of the coupled phase/field system; returns ``(ensemble, em)``.

    Stage n of the waves sees the current line through the earlier stage
    currents; the final update integrates the quadratic through
    (0, j1), (dt/2, (j2 + j3)/2) and (dt, j4).
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    magnetic = ens.dim > 1

    slopes, currents = [], []
    stage_ens, stage_em = ens, em
    for n, node in enumerate(RK4_NODES):
        if n > 0:
            stage_ens = _advance(ens, slopes[-1], node * dt)
            j1 = currents[0]
            if n == 1:
                stage_em = _stage_em(em, stage_ens, node * dt, j1)
            else:
                slope = (currents[-1] - j1) * (2.0 / (node * dt))
                stage_em = _stage_em(em, stage_ens, node * dt, j1, slope)
        velocities = phase_velocities(stage_ens)
        E = assemble_E(stage_em)
        B = assemble_B(stage_em) if magnetic else None
        if stages is not None:
            stages.append((E, B))
        slopes.append(vm_rhs(stage_ens, E, B, velocities))
        currents.append(current_density(stage_ens, velocities))

    new_ens = _combine(ens, slopes, dt)
    j1, j2, j3, j4 = currents
    middle = j2 + j3
    slope = (j1 * -3.0 + middle * 2.0 - j4) / dt
    curvature = (j1 - middle + j4) * (2.0 / dt**2)
    new_em = wave_step(em, j1, dt, slope, curvature)

    A = leray_project(new_em.A)
    A = A.shifted(-mean(A))
    new_em = new_em.replace(A=A, phi=solve_poisson(total_density(new_ens)))
    check_state(new_ens, time=new_em.time)
    if ledger is not None:
        if not len(ledger):
            ledger.observe(em.time, mean(j1))
        ledger.observe(new_em.time, mean(current_density(new_ens)))
    return new_ens, new_em


def vp_step(ens: PhaseEnsemble, dt, stages=None, time=None):
    """One classical RK4 step of the Vlasov-Poisson phases (v(ξ) = ξ, force -∇φ)."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    ens = ens.with_eps(0.0) if ens.eps != 0 else ens
    slopes = []
    stage_ens = ens
    for n, node in enumerate(RK4_NODES):
        if n > 0:
            stage_ens = _advance(ens, slopes[-1], node * dt)
        phi = solve_poisson(total_density(stage_ens))
        if stages is not None:
            stages.append(phi)
        slopes.append(vp_rhs(stage_ens, phi))
    new_ens = _combine(ens, slopes, dt)
    check_state(new_ens, time=time)
    return new_ens
