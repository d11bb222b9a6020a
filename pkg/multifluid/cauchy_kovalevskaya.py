"""Successive approximations of the multifluid Vlasov-Maxwell system.

Iterate n+1 solves linear equations whose coefficients are frozen at iterate
n: ρ^{n+1}(t) = ρ(0) - ∫∇·(v(ξ^n)ρ^n) and likewise for ξ, with the fields
(φ^n, A^n) rebuilt from iterate n. Time integrals are taken on a uniform node
set of [0, η(δ0 - δ1)] with the antiderivative of a cubic spline.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from fields.electromagnetic import EMState, assemble_B, assemble_E, wave_step
from spectral.calculus import solve_poisson
from spectral.fourier import SpectralField
from spectral.norms import AnalyticNormParams, analytic_norm, shrinking_norm

from .dynamics import vm_rhs
from .ensemble import PhaseEnsemble, current_density, phase_velocities, total_density

CONTRACTION_FACTOR = 0.75
DIVERGENCE_RUN = 3


@dataclass
class CKIterationReport:
    n_iters: int
    diffs_rho: list
    diffs_xi: list
    ratios: list
    eta: float
    delta0: float
    beta: float
    delta1: float
    times: np.ndarray
    constants: dict
    induction_bounds: list = field(default_factory=list)
    diverged: bool = False
    final: PhaseEnsemble = None
    contraction_factor: float = CONTRACTION_FACTOR

    def contracts(self, first=3, last=None) -> bool:
        """True when every ratio diff_n / diff_{n-1} with n in [first, last] is at most the factor."""
        selected = [
            r
            for n, r in enumerate(self.ratios, start=2)
            if n >= first and (last is None or n <= last)
        ]
        return all(r <= self.contraction_factor for r in selected)

    def to_dict(self) -> dict:
        return {
            "n_iters": self.n_iters,
            "diffs_rho": self.diffs_rho,
            "diffs_xi": self.diffs_xi,
            "ratios": self.ratios,
            "eta": self.eta,
            "delta0": self.delta0,
            "delta1": self.delta1,
            "beta": self.beta,
            "horizon": float(self.times[-1]),
            "constants": self.constants,
            "induction_bounds": self.induction_bounds,
            "diverged": self.diverged,
            "contracts": self.contracts(),
            "contraction_factor": self.contraction_factor,
        }


def ck_constants(init: PhaseEnsemble, em0: EMState, delta0: float) -> dict:
    """C0 from the data at radius δ0 and the derived C1 = 4C0, C2 = 8C1, ε0."""
    rho_bound = max(analytic_norm(rho, delta0) for rho in init.rhos)
    xi_bound = max(analytic_norm(xi, delta0) for xi in init.xis)
    field_bound = analytic_norm(assemble_E(em0), delta0)
    if init.dim > 1:
        field_bound += analytic_norm(assemble_B(em0), delta0)
    c0 = max(rho_bound, xi_bound, field_bound)
    c1 = 4 * c0
    return {
        "c0": c0,
        "c1": c1,
        "c2": 8 * c1,
        "eps0": 1 / (np.sqrt(2) * c1) if c1 > 0 else float("inf"),
        "rho0_norm": rho_bound,
        "xi0_norm": xi_bound,
        "field0_norm": field_bound,
    }


def _ratio(current, previous):
    if previous == 0:
        return 0.0 if current == 0 else float("inf")
    return current / previous


def _fields_along(iterate, init, em0, times):
    """Electric and magnetic fields at every node, driven by the iterate's current."""
    em = em0
    out = []
    currents = [current_density(ens) for ens in iterate]
    for i, ens in enumerate(iterate):
        if i > 0:
            dt = times[i] - times[i - 1]
            slope = (currents[i] - currents[i - 1]) / dt
            em = wave_step(em, currents[i - 1], dt, slope)
        em = em.replace(phi=solve_poisson(total_density(ens)))
        B = assemble_B(em) if init.dim > 1 else None
        out.append((assemble_E(em), B))
    return out


def _integrate(times, samples):
    """Antiderivative from 0 of node samples (first axis = time)."""
    spline = CubicSpline(times, samples, axis=0)
    return spline.antiderivative()(times)


def _next_iterate(iterate, init, em0, times):
    fields = _fields_along(iterate, init, em0, times)
    n_phases = len(init.phases)
    drho = [[] for _ in range(n_phases)]
    dxi = [[] for _ in range(n_phases)]
    for ens, (E, B) in zip(iterate, fields):
        for theta, (r, x) in enumerate(vm_rhs(ens, E, B, phase_velocities(ens))):
            drho[theta].append(r.coeffs)
            dxi[theta].append(x.coeffs)

    rhos_t = []
    xis_t = []
    for theta, phase in enumerate(init.phases):
        rho_int = _integrate(times, np.array(drho[theta]))
        xi_int = _integrate(times, np.array(dxi[theta]))
        rhos_t.append([SpectralField(phase.rho.coeffs + r).symmetrized() for r in rho_int])
        xis_t.append([SpectralField(phase.xi.coeffs + x).symmetrized() for x in xi_int])
    return [
        init.with_fields([rhos_t[th][i] for th in range(n_phases)], [xis_t[th][i] for th in range(n_phases)])
        for i in range(len(times))
    ]


def _sup_difference(new, old, times, params, component):
    worst = 0.0
    for theta in range(len(new[0].phases)):
        traj = [
            (t, getattr(a.phases[theta], component) - getattr(b.phases[theta], component))
            for t, a, b in zip(times, new, old)
        ]
        worst = max(worst, shrinking_norm(traj, params))
    return worst


def _sup_norm(iterate, times, params, component):
    return max(
        shrinking_norm([(t, getattr(e.phases[theta], component)) for t, e in zip(times, iterate)], params)
        for theta in range(len(iterate[0].phases))
    )


def ck_iterate(
    init: PhaseEnsemble, em0: EMState, params: AnalyticNormParams, n_max: int, n_nodes=16
) -> CKIterationReport:
    """Run up to ``n_max`` successive approximations on [0, η(δ0 - δ)].

    ``params.delta`` plays the role of δ1, the radius the solution is
    guaranteed at the end of the interval.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    if n_nodes < 4:
        raise ValueError("the time quadrature needs at least 4 intervals")
    horizon = params.horizon()
    times = np.linspace(0.0, horizon, n_nodes + 1)
    constants = ck_constants(init, em0, params.delta0)
    c1 = constants["c1"]

    iterate = [init] * len(times)
    diffs_rho, diffs_xi, ratios, bounds = [], [], [], []
    growth = 0
    diverged = False
    for n in range(1, n_max + 1):
        new = _next_iterate(iterate, init, em0, times)
        diffs_rho.append(_sup_difference(new, iterate, times, params, "rho"))
        diffs_xi.append(_sup_difference(new, iterate, times, params, "xi"))
        rho_norm = _sup_norm(new, times, params, "rho")
        xi_norm = _sup_norm(new, times, params, "xi")
        bounds.append(
            {
                "iteration": n,
                "rho_norm": rho_norm,
                "xi_norm": xi_norm,
                "rho_within_c1": rho_norm <= c1,
                "xi_within_2c1": xi_norm <= 2 * c1,
            }
        )
        if n > 1:
            ratio = max(
                _ratio(diffs_rho[-1], diffs_rho[-2]), _ratio(diffs_xi[-1], diffs_xi[-2])
            )
            ratios.append(ratio)
            growth = growth + 1 if ratio > 1 else 0
        iterate = new
        logging.info(
            f"CK iteration {n}: diff rho {diffs_rho[-1]:.3e}, diff xi {diffs_xi[-1]:.3e}"
        )
        if growth >= DIVERGENCE_RUN:
            diverged = True
            logging.error(
                f"CK iteration diverging: differences grew {growth} times in a row at n={n}"
            )
            break
        if diffs_rho[-1] == 0 and diffs_xi[-1] == 0:
            break

    return CKIterationReport(
        n_iters=len(diffs_rho),
        diffs_rho=diffs_rho,
        diffs_xi=diffs_xi,
        ratios=ratios,
        eta=params.eta,
        delta0=params.delta0,
        beta=params.beta,
        delta1=params.delta,
        times=times,
        constants=constants,
        induction_bounds=bounds,
        diverged=diverged,
        final=iterate[-1],
    )
