import json

from django.core.management.base import BaseCommand, CommandError

from core.utils import config_fingerprint, resolve_output_dir
from harness.cli import EXIT_FAILED, add_config_arguments, command_errors, load_config
from harness.models import SimulationRun
from harness.verify import FAULTS, verify_suite


class Command(BaseCommand):
    help = "Run the invariant battery and write verify.json"

    def add_arguments(self, parser):
        add_config_arguments(parser)
        parser.add_argument("--fault", dest="faults", action="append", choices=FAULTS, default=[])

    def handle(self, *args, **options):
        with command_errors():
            cfg = load_config(options)
            directory = resolve_output_dir(cfg.output_dir) / "verify"
            report = verify_suite(cfg, faults=options["faults"], output_dir=directory)
        payload = cfg.to_dict()
        run = SimulationRun.objects.create(
            mode=SimulationRun.Mode.VERIFY,
            eps=cfg.eps[0],
            config=payload,
            fingerprint=config_fingerprint(payload),
        )
        run.record({**report.to_dict(), "output_dir": str(directory)})
        for check in report.checks:
            status = "PASS" if check.passed else "FAIL"
            self.stdout.write(f"{status} {check.name} measured={check.measured} threshold={check.threshold}")
        self.stdout.write(json.dumps({"ok": report.ok, "failures": [c.name for c in report.failures]}))
        if not report.ok:
            raise CommandError(f"{len(report.failures)} checks failed", returncode=EXIT_FAILED)
