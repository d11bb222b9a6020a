import numpy as np

from .calculus import curl
from .fourier import SpectralField, get_plan


def random_field(rng, dim, cutoff, components=1, decay=0.6, scale=1.0):
    """Real random field with coefficients decaying like decay^{|k|}."""
    plan = get_plan(dim, cutoff)
    shape = (components,) + (plan.box_size,) * dim
    coeffs = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    coeffs *= scale * decay**plan.k_norm
    return SpectralField(coeffs).symmetrized()


def random_divergence_free(rng, dim, cutoff, decay=0.6):
    """Divergence-free magnetic-type field: vector for d=3, scalar for d=2."""
    potential = random_field(rng, dim, cutoff, components=dim, decay=decay)
    return curl(potential)


def random_density(rng, dim, cutoff, amplitude=0.3, decay=0.5):
    """Mean-one density bounded below by 1 - amplitude."""
    field = random_field(rng, dim, cutoff, decay=decay)
    coeffs = field.coeffs.copy()
    coeffs[(0,) + field.plan.zero] = 0
    wiener = np.sum(np.abs(coeffs))
    if wiener > 0:
        coeffs *= amplitude / wiener
    coeffs[(0,) + field.plan.zero] = 1.0
    return SpectralField(coeffs)
