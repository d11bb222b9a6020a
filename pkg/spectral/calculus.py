"""Differential operators, products and potentials for SpectralField."""
import logging

import numpy as np
from django.conf import settings
from scipy.special import binom

from .fourier import SpectralException, SpectralField, check_compatible
from .norms import analytic_norm, weighted_coefficient_sums


def _require_vector(field: SpectralField, name="field"):
    if field.components != field.dim:
        raise SpectralException.DimensionMismatch(
            f"{name} must have {field.dim} components, has {field.components}"
        )


def _require_scalar(field: SpectralField, name="field"):
    if not field.is_scalar:
        raise SpectralException.DimensionMismatch(
            f"{name} must be scalar, has {field.components} components"
        )


def derivative(field: SpectralField, axis: int) -> SpectralField:
    if not 0 <= axis < field.dim:
        raise ValueError(f"axis {axis} out of range for d={field.dim}")
    return SpectralField(field.coeffs * (1j * field.plan.k[axis]))


def gradient(field: SpectralField) -> SpectralField:
    _require_scalar(field)
    return SpectralField.stack(derivative(field, a) for a in range(field.dim))


def divergence(field: SpectralField) -> SpectralField:
    _require_vector(field)
    k = field.plan.k
    total = sum(1j * k[a] * field.coeffs[a] for a in range(field.dim))
    return SpectralField(total[np.newaxis])


def divergence_residual(field: SpectralField) -> float:
    """max_k |k·F f(k)|, the mode-wise divergence defect."""
    return float(np.max(np.abs(divergence(field).coeffs), initial=0.0))


def laplacian(field: SpectralField) -> SpectralField:
    return SpectralField(-field.coeffs * field.plan.k_sq)


def curl(field: SpectralField) -> SpectralField:
    """Vector curl for d=3, scalar planar curl ∂1A2 - ∂2A1 for d=2."""
    _require_vector(field)
    c = field.component
    if field.dim == 3:
        return SpectralField.stack(
            [
                derivative(c(2), 1) - derivative(c(1), 2),
                derivative(c(0), 2) - derivative(c(2), 0),
                derivative(c(1), 0) - derivative(c(0), 1),
            ]
        )
    if field.dim == 2:
        return derivative(c(1), 0) - derivative(c(0), 1)
    raise SpectralException.DimensionMismatch("curl is undefined for d=1")


def mean(field: SpectralField) -> np.ndarray:
    return field.coeffs[(slice(None),) + field.plan.zero].real.copy()


def apply_pointwise(field: SpectralField, func) -> SpectralField:
    """Apply ``func`` to the collocation values (shape (m, M, ..., M)) and project back."""
    values = np.asarray(func(field.to_grid()), dtype=float)
    if values.ndim == field.dim:
        values = values[np.newaxis]
    return SpectralField.from_grid(values, field.cutoff)


# products


def multiply(f: SpectralField, g: SpectralField) -> SpectralField:
    """Dealiased product; a scalar factor broadcasts over the other's components."""
    check_compatible(f, g)
    if f.components != g.components and not (f.is_scalar or g.is_scalar):
        raise SpectralException.DimensionMismatch(
            f"cannot multiply fields with {f.components} and {g.components} components"
        )
    return SpectralField.from_grid(f.to_grid() * g.to_grid(), f.cutoff)


def dot(f: SpectralField, g: SpectralField) -> SpectralField:
    check_compatible(f, g)
    if f.components != g.components:
        raise SpectralException.DimensionMismatch(
            f"dot product of {f.components}- and {g.components}-component fields"
        )
    values = np.sum(f.to_grid() * g.to_grid(), axis=0, keepdims=True)
    return SpectralField.from_grid(values, f.cutoff)


def cross(f: SpectralField, g: SpectralField) -> SpectralField:
    """f × g for d=3; for d=2 with scalar g the planar form (f2 g, -f1 g)."""
    check_compatible(f, g)
    _require_vector(f)
    if f.dim == 3:
        _require_vector(g, "second factor")
        values = np.cross(f.to_grid(), g.to_grid(), axis=0)
        return SpectralField.from_grid(values, f.cutoff)
    if f.dim == 2:
        _require_scalar(g, "planar magnetic field")
        fv, gv = f.to_grid(), g.to_grid()[0]
        return SpectralField.from_grid(np.stack([fv[1] * gv, -fv[0] * gv]), f.cutoff)
    raise SpectralException.DimensionMismatch("cross product is undefined for d=1")


# analytic composition


def binomial_series(exponent: float):
    """Coefficients a_n = C(exponent, n) of (1 + z)^exponent."""
    return lambda n: float(binom(exponent, n))


def _coefficient_list(coefficients, n_terms):
    if callable(coefficients):
        return [coefficients(n) for n in range(n_terms + 1)]
    coefficients = list(coefficients)
    return coefficients[: n_terms + 1]


def composition_tail(coefficients, norm: float, n_terms: int, extra_terms=200) -> float:
    """Majorant Σ_{n>N} |a_n| |f|^n of the truncated series remainder."""
    if not callable(coefficients):
        coefficients = list(coefficients)
        terms = coefficients[n_terms + 1 :]
        return float(sum(abs(a) * norm ** (n_terms + 1 + i) for i, a in enumerate(terms)))
    tail = 0.0
    for n in range(n_terms + 1, n_terms + 1 + extra_terms):
        term = abs(coefficients(n)) * norm**n
        tail += term
        if term < 1e-18 * max(tail, 1.0):
            break
    return tail


def compose_analytic(
    coefficients, field: SpectralField, radius: float, delta=None, n_terms=None
) -> SpectralField:
    """Σ_{n≤N} a_n f^n by Horner's rule with dealiased products.

    ``coefficients`` is a callable n -> a_n or a sequence. ``delta`` is the
    radius at which |f|_δ < R is checked; without it the Wiener norm
    (the δ → 1 limit) is used.
    """
    _require_scalar(field)
    n_terms = settings.SIM_COMPOSITION_TERMS if n_terms is None else n_terms
    if delta is None:
        norm = float(np.max(weighted_coefficient_sums(field, 1.0)))
    else:
        norm = analytic_norm(field, delta)
    if norm >= radius:
        raise SpectralException.CompositionDomain(
            f"|f|={norm:.6g} outside the convergence radius {radius}"
        )

    series = _coefficient_list(coefficients, n_terms)
    result = SpectralField.constant(field.dim, field.cutoff, [series[-1]])
    for a_n in reversed(series[:-1]):
        result = multiply(result, field) + a_n

    tail = composition_tail(coefficients, norm, len(series) - 1)
    logging.debug(f"analytic composition with {len(series)} terms, tail bound {tail:.3e}")
    return result


# potentials


def solve_poisson(rho: SpectralField, tol=None) -> SpectralField:
    """Zero-mean φ with -Δφ = ρ - 1."""
    _require_scalar(rho, "density")
    tol = settings.SIM_TOL_NEUTRALITY if tol is None else tol
    total = mean(rho)[0]
    if abs(total - 1.0) > tol:
        raise SpectralException.NeutralityViolated(
            f"mean density {total:.12g} differs from 1 by more than {tol}"
        )
    return SpectralField(rho.coeffs * rho.plan.inv_k_sq)


def leray_project(field: SpectralField) -> SpectralField:
    _require_vector(field)
    plan = field.plan
    k_dot = np.sum(plan.k * field.coeffs, axis=0)
    return SpectralField(field.coeffs - plan.k * (k_dot * plan.inv_k_sq))


def helmholtz_decompose(field: SpectralField):
    """Return ``(grad_part, divfree_part)`` with field = grad_part + divfree_part."""
    divfree = leray_project(field)
    return field - divfree, divfree


def biot_savart(field: SpectralField, tol=1e-9) -> SpectralField:
    """Zero-mean divergence-free A with curl A = B - ⟨B⟩."""
    plan = field.plan
    if field.dim == 3:
        _require_vector(field, "magnetic field")
        scale = max(float(np.max(np.abs(field.coeffs))), 1.0)
        residual = divergence_residual(field)
        if residual > tol * scale:
            raise SpectralException.NotDivergenceFree(
                f"magnetic field divergence {residual:.3e} exceeds {tol}"
            )
        ik = 1j * plan.k
        coeffs = np.cross(ik, field.coeffs, axis=0) * plan.inv_k_sq
        return SpectralField(coeffs)
    if field.dim == 2:
        _require_scalar(field, "planar magnetic field")
        psi = field.coeffs[0] * plan.inv_k_sq
        return SpectralField(np.stack([1j * plan.k[1] * psi, -1j * plan.k[0] * psi]))
    raise SpectralException.DimensionMismatch("no magnetic field for d=1")
