import json

from django.core.management.base import BaseCommand, CommandError

from core.utils import config_fingerprint, resolve_output_dir
from harness.cli import EXIT_ABORTED, add_config_arguments, command_errors, load_config
from harness.models import SimulationRun
from harness.runner import run_pair, run_single
from harness.successive import run_ck


class Command(BaseCommand):
    help = (
        "Run the configured mode: vm or vp steps one system, ck runs the successive "
        "approximations, every other mode a paired VM/VP run per eps"
    )

    def add_arguments(self, parser):
        add_config_arguments(parser)
        parser.add_argument("--iterations", type=int, default=8, help="successive approximations in ck mode")

    def handle(self, *args, **options):
        with command_errors():
            cfg = load_config(options)
        payload = cfg.to_dict()
        if cfg.mode == SimulationRun.Mode.CK:
            aborted = self.run_ck(cfg, payload, options["iterations"])
        elif cfg.mode == SimulationRun.Mode.VP:
            aborted = self.run_single(cfg, payload, [0.0], SimulationRun.Mode.VP)
        elif cfg.mode == SimulationRun.Mode.VM:
            aborted = self.run_single(cfg, payload, cfg.eps, SimulationRun.Mode.VM)
        else:
            aborted = self.run_pairs(cfg, payload)
        if aborted:
            raise CommandError(f"numerical abort: {', '.join(aborted)}", returncode=EXIT_ABORTED)

    def create_run(self, mode, eps, payload) -> SimulationRun:
        return SimulationRun.objects.create(
            mode=mode, eps=eps, config=payload, fingerprint=config_fingerprint(payload)
        )

    def run_pairs(self, cfg, payload) -> list:
        aborted = []
        for eps in cfg.eps:
            run = self.create_run(SimulationRun.Mode.PAIR, eps, payload)
            with command_errors():
                report = run_pair(cfg, eps)
            run.record(report.to_dict())
            self.stdout.write(
                json.dumps(
                    {
                        "run": run.pk,
                        "mode": run.mode,
                        "eps": eps,
                        "sup_w2": report.sup_w2,
                        "aborted": report.aborted,
                        "output_dir": report.output_dir,
                    }
                )
            )
            if report.aborted:
                aborted.append(f"eps={eps} at t={report.truncation_time:.6g}")
        return aborted

    def run_single(self, cfg, payload, eps_list, mode) -> list:
        aborted = []
        for eps in eps_list:
            run = self.create_run(mode, eps, payload)
            with command_errors():
                report = run_single(cfg, eps, mode)
            run.record(report.to_dict())
            self.stdout.write(
                json.dumps(
                    {
                        "run": run.pk,
                        "mode": run.mode,
                        "eps": eps,
                        "energy_drift": report.energy_drift,
                        "aborted": report.aborted,
                        "output_dir": report.output_dir,
                    }
                )
            )
            if report.aborted:
                aborted.append(f"{mode} eps={eps} at t={report.truncation_time:.6g}")
        return aborted

    def run_ck(self, cfg, payload, n_max) -> list:
        eps = cfg.eps[0]
        run = self.create_run(SimulationRun.Mode.CK, eps, payload)
        directory = resolve_output_dir(cfg.output_dir) / "ck"
        with command_errors():
            result = run_ck(cfg, eps, n_max=n_max, output_dir=directory)
        run.record({**result, "aborted": result["diverged"], "output_dir": str(directory)})
        self.stdout.write(
            json.dumps(
                {
                    "run": run.pk,
                    "mode": run.mode,
                    **{key: result[key] for key in ("eps", "n_iters", "contracts", "diverged", "stepped_gap")},
                }
            )
        )
        return ["successive approximations diverged"] if result["diverged"] else []
