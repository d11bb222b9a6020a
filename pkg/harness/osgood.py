"""Smallest constant C for which a measured Q(t) obeys the Osgood-type inequality

    Q(t) ≤ C(1+T)² ε^κ + ∫_0^t C(1+T)² Q(s)(1 + log⁺(1/Q(s))) ds

with the integral taken by the trapezoid rule on the run's snapshot times.
The right-hand side is linear in C, so the minimum is a ratio per time.
"""
from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

STABILITY_TOLERANCE = 0.2


def osgood_modulus(q):
    """z(1 + log⁺(1/z)), continuous at z = 0."""
    q = np.asarray(q, dtype=float)
    safe = np.where(q > 0, q, 1.0)
    return np.where(q > 0, q * (1 + np.maximum(np.log(1 / safe), 0.0)), 0.0)


def minimal_constant(times, q, eps, kappa, t_final=None) -> float:
    times = np.asarray(times, dtype=float)
    q = np.asarray(q, dtype=float)
    if len(times) != len(q) or len(times) == 0:
        raise ValueError("times and Q must be non-empty and of equal length")
    if np.all(q == 0):
        return 0.0
    t_final = times[-1] if t_final is None else t_final
    integral = cumulative_trapezoid(osgood_modulus(q), times, initial=0.0)
    scale = (1 + t_final) ** 2 * (eps**kappa + integral)
    return float(np.max(q / scale))


@dataclass(frozen=True)
class OsgoodDiagnostic:
    c: float
    kappa: float
    eps: float
    refined_c: float = None
    relative_change: float = None

    @property
    def stable(self):
        if self.relative_change is None:
            return None
        return self.relative_change <= STABILITY_TOLERANCE

    def to_dict(self) -> dict:
        return {**asdict(self), "stable": self.stable}


def osgood_diagnostic(report: dict, refined: dict = None) -> OsgoodDiagnostic:
    """Minimal C of a run report, compared with a dt/2 run when given."""
    kappa = report["ledger"]["kappa"]
    eps = report["eps"]
    c = _report_constant(report, eps, kappa)
    if refined is None:
        return OsgoodDiagnostic(c=c, kappa=kappa, eps=eps)
    refined_c = _report_constant(refined, eps, kappa)
    reference = max(abs(c), np.finfo(float).tiny)
    change = 0.0 if c == refined_c else abs(refined_c - c) / reference
    return OsgoodDiagnostic(c=c, kappa=kappa, eps=eps, refined_c=refined_c, relative_change=change)


def _report_constant(report, eps, kappa):
    times = [row["t"] for row in report["rows"]]
    q = [row["q"] for row in report["rows"]]
    return minimal_constant(times, q, eps, kappa, report.get("t_final"))
