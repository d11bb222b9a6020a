import json

from django.core.management.base import BaseCommand, CommandError

from core.utils import config_fingerprint, resolve_output_dir
from harness.cli import EXIT_ABORTED, add_config_arguments, command_errors, load_config
from harness.models import SimulationRun
from harness.successive import run_ck


class Command(BaseCommand):
    help = "Run the successive-approximation scheme and report its contraction"

    def add_arguments(self, parser):
        add_config_arguments(parser)
        parser.add_argument("--iterations", type=int, default=8)

    def handle(self, *args, **options):
        with command_errors():
            cfg = load_config(options)
        eps = cfg.eps[0]
        payload = cfg.to_dict()
        run = SimulationRun.objects.create(
            mode=SimulationRun.Mode.CK, eps=eps, config=payload, fingerprint=config_fingerprint(payload)
        )
        directory = resolve_output_dir(cfg.output_dir) / "ck"
        with command_errors():
            result = run_ck(cfg, eps, n_max=options["iterations"], output_dir=directory)
        run.record({**result, "aborted": result["diverged"], "output_dir": str(directory)})
        self.stdout.write(
            json.dumps({key: result[key] for key in ("n_iters", "ratios", "contracts", "diverged", "stepped_gap")})
        )
        if result["diverged"]:
            raise CommandError("successive approximations diverged", returncode=EXIT_ABORTED)
