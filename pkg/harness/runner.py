"""Paired VM/VP runs: both fluid states and one shared particle cloud on a common time grid."""
import csv
import json
import logging
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from core.utils import NumericalAbort, TimeGrid, config_fingerprint, dump_state, resolve_output_dir
from fields.electromagnetic import (
    assemble_B,
    assemble_E,
    em_diagnostics,
    gauge_residuals,
    mean_momentum_ledger,
)
from lagrangian.checkpoints import write_checkpoint
from lagrangian.particles import (
    advance_time,
    consistency_check,
    flow_vm_step,
    flow_vp_step,
    sample_cloud,
)
from multifluid.dynamics import MeanCurrentLedger, vm_step, vp_step
from multifluid.ensemble import check_state, current_density, moments, total_density, total_energy
from spectral.calculus import mean
from spectral.norms import analytic_norm
from spectral.snapshots import write_grid_csv, write_snapshot
from transport.coupling import coupling_bound_check

from .config import RunConfig
from .initial_data import initial_state, mean_field_bound
from .ledger import HypothesisLedger
from .osgood import osgood_diagnostic

RUN_COLUMNS = (
    "t",
    "q",
    "w2_sq",
    "w2_sq_std",
    "w2_sliced_sq",
    "w2_slack",
    "coupling_holds",
    "energy_vm",
    "energy_vp",
    "mean_b_drift",
    "mean_j_vp_drift",
    "ledger_residual",
    "gauge_div_a",
    "gauge_mean_a",
    "l1_rho_vm",
    "sup_rho_vm",
    "sup_rho_vp",
    "sup_m_alpha",
    "fourth_moment_vp",
    "e_l2",
    "eps_adot_l2",
    "b_l2",
    "rho_delta1",
    "xi_delta1",
    "fields_delta1",
    "residual_vm",
    "residual_vp",
)
SINGLE_COLUMNS = (
    "t",
    "energy",
    "energy_drift",
    "min_rho",
    "sup_rho",
    "sup_m_alpha",
    "fourth_moment",
    "mean_j_drift",
    "rho_delta1",
    "xi_delta1",
)
CSV_NAME = "run.csv"
FIELDS_CSV_NAME = "fields.csv"
REPORT_NAME = "report.json"
SNAPSHOT_NAME = "fields_final.snap"
DENSITY_GRID_NAME = "density_final.csv"
CHECKPOINT_DIR = "checkpoints"


@dataclass
class RunReport:
    eps: float
    t_final: float
    dt: float
    seed: int
    fingerprint: str
    ledger: HypothesisLedger
    rows: list = field(default_factory=list)
    aborted: bool = False
    truncation_time: float = None
    abort_reason: str = ""
    dump_path: str = None
    output_dir: str = None
    osgood: dict = None

    @property
    def sup_w2(self) -> float:
        return max((float(np.sqrt(max(row["w2_sq"], 0.0))) for row in self.rows), default=0.0)

    @property
    def max_q(self) -> float:
        return max((row["q"] for row in self.rows), default=0.0)

    def add_row(self, row: dict):
        self.rows.append(row)
        self.ledger.observe(row)

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "t_final": self.t_final,
            "dt": self.dt,
            "seed": self.seed,
            "fingerprint": self.fingerprint,
            "aborted": self.aborted,
            "truncation_time": self.truncation_time,
            "abort_reason": self.abort_reason,
            "dump_path": self.dump_path,
            "output_dir": self.output_dir,
            "sup_w2": self.sup_w2,
            "max_q": self.max_q,
            "coupling_violations": sum(1 for row in self.rows if not row["coupling_holds"]),
            "ledger": self.ledger.to_dict(),
            "osgood": self.osgood,
            "columns": list(RUN_COLUMNS),
            "rows": self.rows,
        }

    def write(self, directory) -> Path:
        directory = Path(directory)
        write_rows(directory / CSV_NAME, self.rows)
        path = directory / REPORT_NAME
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        return path


def write_rows(path, rows, columns=RUN_COLUMNS):
    with Path(path).open("w", newline="") as stream:
        writer = csv.DictWriter(stream, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _csv_value(row[key]) for key in columns})


def read_rows(path) -> list:
    with Path(path).open(newline="") as stream:
        return [
            {key: (value == "True" if key == "coupling_holds" else float(value)) for key, value in row.items()}
            for row in csv.DictReader(stream)
        ]


def write_field_rows(path, rows):
    """The per-step field diagnostics stream; columns follow the first row."""
    if rows:
        write_rows(path, rows, columns=tuple(rows[0]))


def _csv_value(value):
    return repr(float(value)) if not isinstance(value, bool) else str(value)


def phase_table(ens) -> list:
    return [
        {"id": i, "label": phase.label, "weight": phase.weight} for i, phase in enumerate(ens.phases)
    ]


class FieldStream:
    """Per-step field diagnostics of one VM state, ledger included."""

    def __init__(self, em) -> None:
        self.initial_mean = em.mean_eps_adot
        self.current_ledger = MeanCurrentLedger(em.dim)
        self.rows = [self.row(em)]

    def row(self, em) -> dict:
        return em_diagnostics(em, self.current_ledger.integrated, initial_mean=self.initial_mean)

    def append(self, em):
        self.rows.append(self.row(em))


class PairedRun:
    """Stepping state of one paired run at a fixed ε."""

    def __init__(self, cfg: RunConfig, eps: float) -> None:
        self.cfg = cfg
        self.eps = eps
        self.grid = TimeGrid(cfg.t_final, cfg.dt)
        self.ens_vm, self.em = initial_state(cfg, eps)
        check_state(self.ens_vm, time=0.0)
        self.em0 = self.em
        self.ens_vp = self.ens_vm.with_eps(0.0)
        self.field_stream = FieldStream(self.em)
        self.cloud = sample_cloud(self.ens_vm, cfg.n_particles, cfg.seed)
        self.mean_j_vp0 = mean(current_density(self.ens_vp))
        self.mean_b0 = mean(assemble_B(self.em)) if cfg.dim > 1 else None

    @property
    def time(self) -> float:
        return self.em.time

    @property
    def current_ledger(self) -> MeanCurrentLedger:
        return self.field_stream.current_ledger

    def step(self):
        dt = self.grid.dt
        vm_stages, vp_stages = [], []
        self.ens_vm, self.em = vm_step(
            self.ens_vm, self.em, dt, ledger=self.current_ledger, stages=vm_stages
        )
        self.field_stream.append(self.em)
        self.ens_vp = vp_step(self.ens_vp, dt, stages=vp_stages, time=self.em.time)
        cloud = flow_vm_step(
            self.cloud, [E for E, _ in vm_stages], [B for _, B in vm_stages], self.eps, dt
        )
        cloud = flow_vp_step(cloud, vp_stages, dt)
        self.cloud = advance_time(cloud, dt)

    def snapshot(self) -> dict:
        cfg, em = self.cfg, self.em
        bound = coupling_bound_check(
            self.cloud, cfg.subsample, seed=cfg.seed, n_projections=cfg.n_projections
        )
        vm_moments = moments(self.ens_vm, alpha=cfg.alpha)
        vp_moments = moments(self.ens_vp)
        rho_vm = vm_moments.rho_total.to_grid()
        E = assemble_E(em)
        B = assemble_B(em) if cfg.dim > 1 else None
        div_a, mean_a = gauge_residuals(em)
        fields_delta1 = analytic_norm(E, cfg.delta1)
        if B is not None:
            fields_delta1 += analytic_norm(B, cfg.delta1)
        mean_j_vp = mean(current_density(self.ens_vp))
        return {
            "t": float(em.time),
            "q": bound.q,
            "w2_sq": bound.w2_sq,
            "w2_sq_std": bound.w2_sq_std,
            "w2_sliced_sq": bound.w2_sliced_sq,
            "w2_slack": bound.slack,
            "coupling_holds": bound.holds,
            "energy_vm": total_energy(self.ens_vm, em),
            "energy_vp": total_energy(self.ens_vp),
            "mean_b_drift": 0.0 if B is None else float(np.linalg.norm(mean(B) - self.mean_b0)),
            "mean_j_vp_drift": float(np.linalg.norm(mean_j_vp - self.mean_j_vp0)),
            "ledger_residual": mean_momentum_ledger(
                em, self.current_ledger.integrated, initial_mean=self.em0.mean_eps_adot
            ),
            "gauge_div_a": div_a,
            "gauge_mean_a": mean_a,
            "l1_rho_vm": float(np.mean(np.abs(rho_vm))),
            "sup_rho_vm": float(np.max(rho_vm)),
            "sup_rho_vp": total_density(self.ens_vp).sup_on_grid(),
            "sup_m_alpha": vm_moments.m_alpha_sup,
            "fourth_moment_vp": vp_moments.fourth_moment_l1,
            "e_l2": float(np.sqrt(E.l2_norm_sq())),
            "eps_adot_l2": float(np.sqrt(em.eps_adot.l2_norm_sq())),
            "b_l2": 0.0 if B is None else float(np.sqrt(B.l2_norm_sq())),
            "rho_delta1": max(analytic_norm(rho, cfg.delta1) for rho in self.ens_vm.rhos),
            "xi_delta1": max(analytic_norm(xi, cfg.delta1) for xi in self.ens_vm.xis),
            "fields_delta1": fields_delta1,
            "residual_vm": consistency_check(self.cloud, self.ens_vm, "vm").max_residual,
            "residual_vp": consistency_check(self.cloud, self.ens_vp, "vp").max_residual,
        }

    def state_arrays(self) -> dict:
        arrays = {"phi": self.em.phi.coeffs, "A": self.em.A.coeffs, "eps_adot": self.em.eps_adot.coeffs}
        for i, phase in enumerate(self.ens_vm.phases):
            arrays[f"rho_{i}"] = phase.rho.coeffs
            arrays[f"xi_{i}"] = phase.xi.coeffs
        return arrays

    def write_fields(self, path):
        """Both ensembles and the VM fields; the header carries the phase table (θ id, μ_θ)."""
        fields = {"phi": self.em.phi, "A": self.em.A, "eps_adot": self.em.eps_adot}
        for i, phase in enumerate(self.ens_vm.phases):
            fields[f"rho_vm_{i}"] = phase.rho
            fields[f"xi_vm_{i}"] = phase.xi
        for i, phase in enumerate(self.ens_vp.phases):
            fields[f"rho_vp_{i}"] = phase.rho
            fields[f"xi_vp_{i}"] = phase.xi
        return write_snapshot(
            path, fields, t=self.time, eps=self.eps, phases=phase_table(self.ens_vm)
        )


def run_directory(cfg: RunConfig, eps: float) -> Path:
    directory = resolve_output_dir(cfg.output_dir) / f"eps_{eps:g}"
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def run_pair(cfg: RunConfig, eps: float, output_dir=None) -> RunReport:
    """Advance VM at ``eps``, VP and the shared cloud to ``cfg.t_final``.

    A numerical abort truncates the run; the report keeps every snapshot up
    to the truncation time and points to a dump of the offending state.
    """
    directory = Path(output_dir) if output_dir is not None else run_directory(cfg, eps)
    directory.mkdir(parents=True, exist_ok=True)
    shutil.rmtree(directory / CHECKPOINT_DIR, ignore_errors=True)
    ledger = HypothesisLedger(
        eps=eps,
        dim=cfg.dim,
        alpha=cfg.alpha,
        beta=cfg.hyp_beta,
        gamma1=cfg.gamma1,
        gamma2=cfg.gamma2,
        c0=cfg.c0,
        mean_e0_bound=mean_field_bound(cfg, eps),
    )
    report = RunReport(
        eps=eps,
        t_final=cfg.t_final,
        dt=cfg.dt,
        seed=cfg.seed,
        fingerprint=config_fingerprint(cfg.to_dict()),
        ledger=ledger,
        output_dir=str(directory),
    )
    logging.info(f"Starting paired run eps={eps} T={cfg.t_final} dt={cfg.dt} in {directory}")

    run = None
    try:
        run = PairedRun(cfg, eps)
        ledger.mean_e0 = float(np.linalg.norm(mean(assemble_E(run.em))))
        _record(report, run, directory, 0)
        for step in range(1, run.grid.n_steps + 1):
            run.step()
            if step % cfg.snapshot_every == 0 or step == run.grid.n_steps:
                _record(report, run, directory, step)
        run.write_fields(directory / SNAPSHOT_NAME)
    except NumericalAbort as e:
        report.aborted = True
        report.truncation_time = e.time if e.time is not None else (run.time if run else 0.0)
        report.abort_reason = str(e)
        dump = dump_state(directory / "abort_state.npz", **(run.state_arrays() if run else {}))
        report.dump_path = None if dump is None else str(dump)
        logging.error(f"Run eps={eps} aborted at t={report.truncation_time:.6g}: {e}")

    if run is not None:
        write_field_rows(directory / FIELDS_CSV_NAME, run.field_stream.rows)
    if report.rows:
        report.osgood = osgood_diagnostic(report.to_dict()).to_dict()
    report.write(directory)
    logging.info(
        f"Finished paired run eps={eps}: sup W2={report.sup_w2:.4e}, aborted={report.aborted}"
    )
    return report


def _record(report, run, directory, step):
    report.add_row(run.snapshot())
    write_checkpoint(directory / CHECKPOINT_DIR, run.cloud, step)


# single-system runs


@dataclass
class SingleReport:
    system: str
    eps: float
    t_final: float
    dt: float
    fingerprint: str
    rows: list = field(default_factory=list)
    aborted: bool = False
    truncation_time: float = None
    abort_reason: str = ""
    dump_path: str = None
    output_dir: str = None

    @property
    def energy_drift(self) -> float:
        return max((row["energy_drift"] for row in self.rows), default=0.0)

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "eps": self.eps,
            "t_final": self.t_final,
            "dt": self.dt,
            "fingerprint": self.fingerprint,
            "aborted": self.aborted,
            "truncation_time": self.truncation_time,
            "abort_reason": self.abort_reason,
            "dump_path": self.dump_path,
            "output_dir": self.output_dir,
            "energy_drift": self.energy_drift,
            "columns": list(SINGLE_COLUMNS),
            "rows": self.rows,
        }

    def write(self, directory) -> Path:
        directory = Path(directory)
        write_rows(directory / CSV_NAME, self.rows, columns=SINGLE_COLUMNS)
        path = directory / REPORT_NAME
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        return path


class SingleRun:
    """One multifluid system on its own: VM at ``eps`` or VP, without particles."""

    def __init__(self, cfg: RunConfig, eps: float, system: str) -> None:
        if system not in ("vm", "vp"):
            raise ValueError(f"system must be 'vm' or 'vp', got {system!r}")
        self.cfg = cfg
        self.system = system
        self.grid = TimeGrid(cfg.t_final, cfg.dt)
        ens, em = initial_state(cfg, eps)
        if system == "vp":
            ens, em = ens.with_eps(0.0), None
        check_state(ens, time=0.0)
        self.ens, self.em = ens, em
        self.time = 0.0
        self.field_stream = FieldStream(em) if em is not None else None
        self.mean_j0 = mean(current_density(ens))
        self.energy0 = self.energy()

    @property
    def eps(self) -> float:
        return self.ens.eps

    def energy(self) -> float:
        return total_energy(self.ens, self.em)

    def step(self):
        dt = self.grid.dt
        if self.system == "vm":
            self.ens, self.em = vm_step(
                self.ens, self.em, dt, ledger=self.field_stream.current_ledger
            )
            self.field_stream.append(self.em)
            self.time = self.em.time
        else:
            self.ens = vp_step(self.ens, dt, time=self.time + dt)
            self.time += dt

    def snapshot(self) -> dict:
        cfg = self.cfg
        m = moments(self.ens, alpha=cfg.alpha)
        rho = m.rho_total.to_grid()
        energy = self.energy()
        drift = abs(energy - self.energy0)
        if self.energy0:
            drift /= abs(self.energy0)
        return {
            "t": float(self.time),
            "energy": energy,
            "energy_drift": drift,
            "min_rho": float(np.min(rho)),
            "sup_rho": float(np.max(rho)),
            "sup_m_alpha": m.m_alpha_sup,
            "fourth_moment": m.fourth_moment_l1,
            "mean_j_drift": float(np.linalg.norm(mean(m.j_total) - self.mean_j0)),
            "rho_delta1": max(analytic_norm(r, cfg.delta1) for r in self.ens.rhos),
            "xi_delta1": max(analytic_norm(x, cfg.delta1) for x in self.ens.xis),
        }

    def state_arrays(self) -> dict:
        arrays = {}
        if self.em is not None:
            arrays.update(phi=self.em.phi.coeffs, A=self.em.A.coeffs, eps_adot=self.em.eps_adot.coeffs)
        for i, phase in enumerate(self.ens.phases):
            arrays[f"rho_{i}"] = phase.rho.coeffs
            arrays[f"xi_{i}"] = phase.xi.coeffs
        return arrays

    def write_fields(self, path):
        fields = {}
        if self.em is not None:
            fields.update(phi=self.em.phi, A=self.em.A, eps_adot=self.em.eps_adot)
        for i, phase in enumerate(self.ens.phases):
            fields[f"rho_{i}"] = phase.rho
            fields[f"xi_{i}"] = phase.xi
        return write_snapshot(
            path,
            fields,
            t=self.time,
            eps=self.eps,
            system=self.system,
            phases=phase_table(self.ens),
        )


def single_directory(cfg: RunConfig, eps: float, system: str) -> Path:
    name = "vp" if system == "vp" else f"vm/eps_{eps:g}"
    directory = resolve_output_dir(cfg.output_dir) / name
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def run_single(cfg: RunConfig, eps: float, system: str, output_dir=None) -> SingleReport:
    """Advance one system to ``cfg.t_final``; ``eps`` is ignored for VP.

    Writes run.csv, report.json, the final snapshot, the final total density
    on the collocation grid and, for VM, the per-step fields.csv stream.
    """
    eps = 0.0 if system == "vp" else eps
    directory = Path(output_dir) if output_dir is not None else single_directory(cfg, eps, system)
    directory.mkdir(parents=True, exist_ok=True)
    report = SingleReport(
        system=system,
        eps=eps,
        t_final=cfg.t_final,
        dt=cfg.dt,
        fingerprint=config_fingerprint(cfg.to_dict()),
        output_dir=str(directory),
    )
    logging.info(f"Starting {system} run eps={eps} T={cfg.t_final} dt={cfg.dt} in {directory}")

    run = None
    try:
        run = SingleRun(cfg, eps, system)
        report.rows.append(run.snapshot())
        for step in range(1, run.grid.n_steps + 1):
            run.step()
            if step % cfg.snapshot_every == 0 or step == run.grid.n_steps:
                report.rows.append(run.snapshot())
        run.write_fields(directory / SNAPSHOT_NAME)
        write_grid_csv(directory / DENSITY_GRID_NAME, total_density(run.ens))
    except NumericalAbort as e:
        report.aborted = True
        report.truncation_time = e.time if e.time is not None else (run.time if run else 0.0)
        report.abort_reason = str(e)
        dump = dump_state(directory / "abort_state.npz", **(run.state_arrays() if run else {}))
        report.dump_path = None if dump is None else str(dump)
        logging.error(f"{system} run eps={eps} aborted at t={report.truncation_time:.6g}: {e}")

    if run is not None and run.field_stream is not None:
        write_field_rows(directory / FIELDS_CSV_NAME, run.field_stream.rows)
    report.write(directory)
    logging.info(
        f"Finished {system} run eps={eps}: energy drift={report.energy_drift:.3e}, aborted={report.aborted}"
    )
    return report
