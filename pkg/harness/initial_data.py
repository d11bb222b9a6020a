"""Normalized initial data assembled from a run configuration."""
import logging

import numpy as np

from fields.electromagnetic import EMState, init_em_state
from multifluid.ensemble import Phase, PhaseEnsemble, current_density, total_density
from spectral.calculus import gradient, leray_project, mean, solve_poisson
from spectral.fourier import SpectralField

from .config import RunConfig, mode_table_field


def build_ensemble(cfg: RunConfig, eps: float) -> PhaseEnsemble:
    phases = [
        Phase(
            weight=phase.weight,
            rho=mode_table_field(cfg.dim, cfg.cutoff, phase.rho),
            xi=mode_table_field(cfg.dim, cfg.cutoff, *phase.xi),
            label=phase.name,
        )
        for phase in cfg.phases
    ]
    return PhaseEnsemble(phases=phases, eps=eps)


def _rough_scale(cfg: RunConfig, eps: float) -> float:
    """ε^{-γ} for the transverse fields; 1 when γ = 0 or ε = 0."""
    if cfg.gamma == 0 or eps == 0:
        return 1.0
    return eps ** (-cfg.gamma)


def initial_fields(cfg: RunConfig, ens: PhaseEnsemble, eps: float):
    """(E0, B0) with E0 = -∇φ0 + transverse part + ⟨E0⟩ and B0 = curl part + ⟨B0⟩."""
    dim, cutoff = cfg.dim, cfg.cutoff
    scale = _rough_scale(cfg, eps)
    E0 = -gradient(solve_poisson(total_density(ens)))
    if cfg.e0:
        E0 = E0 + leray_project(mode_table_field(dim, cutoff, *cfg.e0)) * scale
    if cfg.e0_mean:
        E0 = E0.shifted(cfg.e0_mean)

    if dim == 1:
        return E0, None
    components = 1 if dim == 2 else 3
    B0 = SpectralField.zeros(dim, cutoff, components)
    if cfg.b0:
        fluctuation = mode_table_field(dim, cutoff, *cfg.b0)
        B0 = fluctuation.shifted(-mean(fluctuation)) * scale
    if cfg.b0_mean:
        B0 = B0.shifted(cfg.b0_mean)
    return E0, B0


def mean_field_bound(cfg: RunConfig, eps: float):
    """C0 ε^{δ_E} when a non-zero ⟨E0⟩ is configured."""
    if not cfg.e0_mean:
        return None
    return cfg.c0 * eps**cfg.e0_mean_exponent


def initial_state(cfg: RunConfig, eps: float):
    """(ensemble, EM state) at t=0; raises ValidationError on non-normalized data."""
    ens = build_ensemble(cfg, eps)
    ens.validate()
    E0, B0 = initial_fields(cfg, ens, eps)
    j0_mean = mean(current_density(ens))
    em: EMState = init_em_state(
        total_density(ens), j0_mean, E0, B0, eps, mean_e_bound=mean_field_bound(cfg, eps)
    )
    logging.info(
        f"Initial data: d={cfg.dim}, K={cfg.cutoff}, {len(ens.phases)} phases, eps={eps}, "
        f"|<E0>|={np.linalg.norm(mean(E0)):.3e}"
    )
    return ens, em
