import json

from django.core.management.base import BaseCommand

from harness.cli import add_config_arguments, command_errors, load_config
from harness.sweep import run_sweep


class Command(BaseCommand):
    help = "Sweep eps, fit the convergence rate of sup_t W2 and write sweep.csv / sweep.json"

    def add_arguments(self, parser):
        add_config_arguments(parser)

    def handle(self, *args, **options):
        with command_errors():
            cfg = load_config(options)
            report = run_sweep(cfg)
        summary = report.to_dict()
        self.stdout.write(
            json.dumps(
                {key: summary[key] for key in ("sweep_pk", "kappa_measured", "r_squared", "monotone", "partial")}
            )
        )
