"""Field snapshot files.

A snapshot is one JSON header line followed by the raw complex128
coefficients of every stored field, concatenated in header order, each in
row-major (component, k_1, ..., k_d) order.
"""
import json
from pathlib import Path

import numpy as np

from .fourier import CONVENTION, SpectralException, SpectralField, get_plan

FORMAT_VERSION = 1


def write_snapshot(path, fields: dict, **meta) -> Path:
    """Write named fields sharing one (d, K) plus free-form metadata."""
    path = Path(path)
    items = list(fields.items())
    if not items:
        raise ValueError("a snapshot needs at least one field")
    first = items[0][1]
    header = {
        "version": FORMAT_VERSION,
        "dim": first.dim,
        "cutoff": first.cutoff,
        "convention": CONVENTION,
        "dtype": "complex128",
        "fields": [{"name": name, "components": f.components} for name, f in items],
        "meta": meta,
    }
    with path.open("wb") as stream:
        stream.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for name, field in items:
            if field.dim != first.dim or field.cutoff != first.cutoff:
                raise SpectralException.DimensionMismatch(
                    f"field {name!r} does not share the snapshot's (d, K)"
                )
            stream.write(np.ascontiguousarray(field.coeffs, dtype="<c16").tobytes())
    return path


def read_snapshot(path):
    """Return ``(header, {name: SpectralField})``."""
    with Path(path).open("rb") as stream:
        header = json.loads(stream.readline())
        payload = stream.read()
    if header.get("convention") != CONVENTION:
        raise ValueError(f"unsupported Fourier convention {header.get('convention')!r}")
    plan = get_plan(header["dim"], header["cutoff"])
    box = (plan.box_size,) * plan.dim
    fields, offset = {}, 0
    for entry in header["fields"]:
        shape = (entry["components"],) + box
        count = int(np.prod(shape))
        coeffs = np.frombuffer(payload, dtype="<c16", count=count, offset=offset)
        fields[entry["name"]] = SpectralField(coeffs.reshape(shape))
        offset += count * 16
    if offset != len(payload):
        raise ValueError(f"snapshot {path} has {len(payload) - offset} trailing bytes")
    return header, fields


def write_grid_csv(path, field: SpectralField) -> Path:
    """Collocation values for plotting: columns x_1..x_d then one per component."""
    path = Path(path)
    points = field.plan.grid_points()
    values = field.to_grid().reshape(field.components, -1).T
    columns = [f"x_{a + 1}" for a in range(field.dim)]
    columns += [f"c_{c + 1}" for c in range(field.components)]
    np.savetxt(
        path,
        np.hstack([points, values]),
        delimiter=",",
        header=",".join(columns),
        comments="",
        fmt="%.17g",
    )
    return path
