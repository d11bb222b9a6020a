import numpy as np
from django.conf import settings
from rest_framework.exceptions import ValidationError

from spectral.calculus import divergence, divergence_residual, mean


def _tolerance(tol):
    return settings.SIM_TOL_NORMALIZATION if tol is None else tol


def validate_neutrality(rho0, tol=None):
    total = mean(rho0)[0]
    if abs(total - 1.0) > _tolerance(tol):
        raise ValidationError({"neutrality": f"mean density is {total:.12g}, not 1"})


def validate_gauss_law(E0, rho0, tol=None):
    residual = divergence(E0) - (rho0 - 1.0)
    defect = float(np.max(np.abs(residual.coeffs)))
    if defect > _tolerance(tol):
        raise ValidationError(
            {"gauss_law": f"div E0 differs from rho0 - 1 by {defect:.3e}"}
        )


def validate_magnetic_divergence(B0, tol=None):
    if B0 is None or B0.dim != 3:
        return
    defect = divergence_residual(B0)
    if defect > _tolerance(tol):
        raise ValidationError({"magnetic_divergence": f"div B0 is {defect:.3e}"})


def validate_mean_electric_field(E0, tol=None, bound=None):
    """⟨E0⟩ = 0, or |⟨E0⟩| ≤ bound when a relaxed bound is configured."""
    size = float(np.linalg.norm(mean(E0)))
    limit = _tolerance(tol) if bound is None else max(bound, _tolerance(tol))
    if size > limit:
        raise ValidationError(
            {"mean_electric_field": f"|<E0>| = {size:.3e} exceeds {limit:.3e}"}
        )


def validate_mean_current(j0_mean, tol=None):
    size = float(np.linalg.norm(j0_mean))
    if size > _tolerance(tol):
        raise ValidationError({"mean_current": f"|<j0>| = {size:.3e} is not zero"})


def validate_normalized_data(rho0, j0_mean, E0, B0, tol=None, mean_e_bound=None):
    validate_neutrality(rho0, tol)
    validate_gauss_law(E0, rho0, tol)
    validate_magnetic_divergence(B0, tol)
    validate_mean_electric_field(E0, tol, mean_e_bound)
    validate_mean_current(j0_mean, tol)
