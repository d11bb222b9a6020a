import json
from pathlib import Path

from django.core.management.base import BaseCommand

from harness.cli import command_errors
from harness.replay import replay_run


class Command(BaseCommand):
    help = "Replay a run directory: recompute Q(t) from the checkpoints and the Osgood constant"

    def add_arguments(self, parser):
        parser.add_argument("run_dir")
        parser.add_argument("--refined", help="run directory of the same run at dt/2")

    def handle(self, *args, **options):
        with command_errors():
            result = replay_run(Path(options["run_dir"]), options.get("refined"))
        self.stdout.write(json.dumps({key: result[key] for key in ("max_q_gap", "osgood")}))
