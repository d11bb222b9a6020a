"""Columnar trajectory checkpoints and their index.

Each checkpoint is one ``.npz`` archive holding every column of the cloud at
one time; ``index.csv`` lists them in write order for replay.
"""
import csv
from pathlib import Path

import numpy as np

from .particles import ParticleCloud

INDEX_NAME = "index.csv"
COLUMNS = ("x0", "xi0", "weights", "phase_index", "x_vp", "xi_vp", "x_vm", "xi_vm")


def write_checkpoint(directory, cloud: ParticleCloud, step: int) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"cloud_{step:06d}.npz"
    np.savez(
        path,
        time=np.array(cloud.time),
        seed=np.array(cloud.seed),
        **{name: getattr(cloud, name) for name in COLUMNS},
    )
    index = directory / INDEX_NAME
    is_new = not index.exists()
    with index.open("a", newline="") as stream:
        writer = csv.writer(stream)
        if is_new:
            writer.writerow(["step", "t", "n", "file"])
        writer.writerow([step, repr(float(cloud.time)), cloud.n, path.name])
    return path


def read_checkpoint(path) -> ParticleCloud:
    with np.load(path) as data:
        return ParticleCloud(
            time=float(data["time"]),
            seed=int(data["seed"]),
            **{name: data[name] for name in COLUMNS},
        )


def load_checkpoints(directory):
    """All checkpoints listed in the index, in time order."""
    directory = Path(directory)
    index = directory / INDEX_NAME
    if not index.exists():
        raise FileNotFoundError(f"no checkpoint index in {directory}")
    with index.open(newline="") as stream:
        rows = list(csv.DictReader(stream))
    clouds = [read_checkpoint(directory / row["file"]) for row in rows]
    return sorted(clouds, key=lambda c: c.time)
