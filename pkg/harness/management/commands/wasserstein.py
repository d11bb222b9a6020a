import json

import numpy as np
from django.core.management.base import BaseCommand

from core.utils import seeded_rng
from harness.cli import command_errors
from lagrangian.checkpoints import read_checkpoint
from transport.wasserstein import EmpiricalMeasure, w2_exact, w2_sliced

SYSTEMS = ("vp", "vm")


class Command(BaseCommand):
    help = "W2 distance between the particle clouds stored in two checkpoints"

    def add_arguments(self, parser):
        parser.add_argument("first")
        parser.add_argument("second")
        parser.add_argument("--first-system", choices=SYSTEMS, default="vp")
        parser.add_argument("--second-system", choices=SYSTEMS, default="vm")
        parser.add_argument("--sliced", action="store_true")
        parser.add_argument("--projections", type=int, default=64)
        parser.add_argument("--subsample", type=int)
        parser.add_argument("--seed", type=int, default=0)

    def handle(self, *args, **options):
        with command_errors():
            first = read_checkpoint(options["first"])
            second = read_checkpoint(options["second"])
            if options["subsample"] is not None:
                first, second = (
                    _subsample(cloud, options["subsample"], options["seed"], label)
                    for cloud, label in ((first, "first"), (second, "second"))
                )
            mu = EmpiricalMeasure.from_cloud(first, options["first_system"])
            nu = EmpiricalMeasure.from_cloud(second, options["second_system"])
            if options["sliced"]:
                distance = w2_sliced(mu, nu, options["projections"], seed=options["seed"])
            else:
                distance = w2_exact(mu, nu)
        self.stdout.write(
            json.dumps(
                {
                    "w2": distance,
                    "method": "sliced" if options["sliced"] else "exact",
                    "n": [mu.n, nu.n],
                    "times": [first.time, second.time],
                }
            )
        )


def _subsample(cloud, size, seed, label):
    if size >= cloud.n:
        return cloud
    rng = seeded_rng(seed, "wasserstein", label)
    return cloud.subsample(np.sort(rng.choice(cloud.n, size=size, replace=False)))
