"""ε-sweeps: paired runs at several ε with the same data and seed, and a log-log rate fit."""
import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from django.conf import settings
from rest_framework.exceptions import ValidationError
from scipy.stats import linregress

from core.utils import config_fingerprint, resolve_output_dir

from .config import RunConfig
from .ledger import kappa_from_exponents
from .models import SweepRun

MIN_SWEEP_POINTS = 3
SWEEP_COLUMNS = ("eps", "sup_w2", "max_q", "aborted", "truncation_time", "osgood_c")


def fit_rate(eps_values, sup_w2):
    """Least-squares slope and R² of log sup W2 against log ε.

    Points with a vanishing distance carry no rate information and are
    left out; fewer than two usable points give ``(None, None)``.
    """
    eps_values = np.asarray(eps_values, dtype=float)
    sup_w2 = np.asarray(sup_w2, dtype=float)
    usable = (eps_values > 0) & (sup_w2 > 0)
    if np.count_nonzero(usable) < 2:
        return None, None
    fit = linregress(np.log(eps_values[usable]), np.log(sup_w2[usable]))
    return float(fit.slope), float(fit.rvalue**2)


def theoretical_floor(kappa, c, t_final):
    """κ exp(-C(1+T)²): the rate guaranteed by the Osgood-type envelope for a given C."""
    if c is None:
        return None
    return kappa * math.exp(-c * (1 + t_final) ** 2)


@dataclass
class SweepReport:
    eps_list: tuple
    kappa: float
    t_final: float
    members: list = field(default_factory=list)
    output_dir: str = None
    sweep_pk: int = None

    @property
    def partial(self) -> bool:
        return len(self.members) < len(self.eps_list) or any(m["aborted"] for m in self.members)

    @property
    def complete_members(self):
        return sorted((m for m in self.members if not m["aborted"]), key=lambda m: m["eps"])

    @property
    def fit(self):
        members = self.complete_members
        return fit_rate([m["eps"] for m in members], [m["sup_w2"] for m in members])

    @property
    def monotone(self) -> bool:
        """sup_t W2 strictly decreases as ε decreases."""
        values = [m["sup_w2"] for m in self.complete_members]
        return all(a < b for a, b in zip(values, values[1:]))

    @property
    def osgood_c(self):
        constants = [m["osgood_c"] for m in self.complete_members if m["osgood_c"] is not None]
        return max(constants) if constants else None

    def to_dict(self) -> dict:
        kappa_measured, r_squared = self.fit
        return {
            "eps_list": list(self.eps_list),
            "kappa": self.kappa,
            "kappa_measured": kappa_measured,
            "r_squared": r_squared,
            "monotone": self.monotone,
            "partial": self.partial,
            "osgood_c": self.osgood_c,
            "kappa_floor": theoretical_floor(self.kappa, self.osgood_c, self.t_final),
            "members": self.members,
            "output_dir": self.output_dir,
            "sweep_pk": self.sweep_pk,
        }

    def write(self, directory) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        with (directory / "sweep.csv").open("w", newline="") as stream:
            writer = csv.DictWriter(stream, fieldnames=SWEEP_COLUMNS)
            writer.writeheader()
            for member in sorted(self.members, key=lambda m: -m["eps"]):
                writer.writerow({key: member[key] for key in SWEEP_COLUMNS})
        path = directory / "sweep.json"
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        return path


def member_summary(report: dict) -> dict:
    osgood = report.get("osgood") or {}
    return {
        "eps": report["eps"],
        "sup_w2": report["sup_w2"],
        "max_q": report["max_q"],
        "aborted": report["aborted"],
        "truncation_time": report["truncation_time"],
        "osgood_c": osgood.get("c"),
    }


def validate_eps_list(eps_list):
    eps_list = tuple(float(e) for e in eps_list)
    if len(set(eps_list)) < MIN_SWEEP_POINTS:
        raise ValidationError(
            {"eps": f"a sweep needs at least {MIN_SWEEP_POINTS} distinct eps values, got {list(eps_list)}"}
        )
    return eps_list


def run_sweep(cfg: RunConfig, eps_list=None) -> SweepReport:
    """Dispatch one paired run per ε as a Celery task and fit the rate."""
    from .tasks import run_sweep_member

    eps_list = validate_eps_list(cfg.eps if eps_list is None else eps_list)
    payload = cfg.to_dict()
    directory = resolve_output_dir(cfg.output_dir)
    sweep = SweepRun.objects.create(
        fingerprint=config_fingerprint(payload),
        config=payload,
        eps_list=list(eps_list),
        output_dir=str(directory),
    )

    results = []
    for eps in eps_list:
        logging.info(f"Dispatching sweep {sweep.pk} member eps={eps}")
        if settings.IS_TESTING:
            results.append(run_sweep_member.apply((payload, eps, sweep.pk)))
        else:
            results.append(run_sweep_member.delay(payload, eps, sweep.pk))

    report = SweepReport(
        eps_list=eps_list,
        kappa=kappa_from_exponents(cfg.alpha, cfg.hyp_beta, cfg.gamma1, cfg.gamma2),
        t_final=cfg.t_final,
        output_dir=str(directory),
        sweep_pk=sweep.pk,
    )
    for eps, result in zip(eps_list, results):
        member = result.get()
        if member is None:
            logging.warning(f"Sweep {sweep.pk} member eps={eps} was skipped (already running)")
            continue
        report.members.append(member_summary(member))

    summary = report.to_dict()
    report.write(directory)
    sweep.kappa_measured = summary["kappa_measured"]
    sweep.r_squared = summary["r_squared"]
    sweep.partial = summary["partial"]
    sweep.summary = summary
    sweep.save()
    logging.info(
        f"Sweep {sweep.pk} finished: kappa_measured={summary['kappa_measured']}, "
        f"R^2={summary['r_squared']}, partial={summary['partial']}"
    )
    return report
