import numpy as np

from fields.electromagnetic import init_em_state
from spectral.calculus import gradient, mean, solve_poisson
from spectral.fourier import SpectralField

from .ensemble import Phase, PhaseEnsemble, current_density, total_density


def trig(dim, cutoff, *terms, const=0.0):
    return SpectralField.from_terms(dim, cutoff, [(const, list(terms))])


def vector(dim, cutoff, *components):
    """``components`` are ``(const, terms)`` pairs, one per axis."""
    return SpectralField.from_terms(dim, cutoff, list(components))


def uniform_ensemble(dim=2, cutoff=3, velocities=((0.0, 0.0),), eps=0.0):
    """Equal-weight uniform phases with constant velocities."""
    weight = 1.0 / len(velocities)
    phases = [
        Phase(
            weight=weight,
            rho=SpectralField.constant(dim, cutoff, [1.0]),
            xi=SpectralField.constant(dim, cutoff, list(c)),
            label=f"uniform{i}",
        )
        for i, c in enumerate(velocities)
    ]
    return PhaseEnsemble(phases=phases, eps=eps)


def crossed_streams(cutoff=3, eps=0.2, amplitude=0.1, drift=0.2):
    """Two-phase d=2 data with zero mean current and well-prepared fields."""
    a, c = amplitude, drift
    phases = [
        Phase(
            weight=0.5,
            rho=trig(2, cutoff, ("cos", (1, 0), a), const=1.0),
            xi=vector(2, cutoff, (0.0, [("sin", (0, 1), a)]), (c, [])),
            label="up",
        ),
        Phase(
            weight=0.5,
            rho=trig(2, cutoff, ("sin", (0, 1), a / 2), const=1.0),
            xi=vector(2, cutoff, (0.0, [("cos", (1, 0), a)]), (-c, [])),
            label="down",
        ),
    ]
    ens = PhaseEnsemble(phases=phases, eps=eps)
    return ens, well_prepared_fields(ens)


def well_prepared_fields(ens, B0=None):
    rho = total_density(ens)
    E0 = -gradient(solve_poisson(rho))
    if B0 is None and ens.dim > 1:
        B0 = SpectralField.zeros(ens.dim, ens.cutoff, 1 if ens.dim == 2 else 3)
    return init_em_state(rho, mean(current_density(ens)), E0, B0, eps=ens.eps)


def plasma_wave(cutoff=4, amplitude=1e-3):
    """Single cold phase in d=1 with a density ripple."""
    phase = Phase(
        weight=1.0,
        rho=trig(1, cutoff, ("cos", (1,), amplitude), const=1.0),
        xi=SpectralField.zeros(1, cutoff, 1),
        label="cold",
    )
    return PhaseEnsemble(phases=[phase])


def mode_amplitude(field, k, component=0):
    """Real coefficient of mode ``k``."""
    index = (component,) + tuple(v + field.cutoff for v in k)
    return float(np.real(field.coeffs[index]))
