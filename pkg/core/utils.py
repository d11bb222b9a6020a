import hashlib
import json
import logging
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
from django.conf import settings
from django.core.cache import cache


@contextmanager
def memcache_lock(lock_id, oid, lock_expire=60 * 60):
    timeout_at = time.monotonic() + lock_expire
    # cache.add fails if the key already exists
    status = cache.add(lock_id, oid, lock_expire)
    try:
        yield status
    finally:
        # don't release the lock if we exceeded the timeout
        # to lessen the chance of releasing an expired lock
        # owned by someone else
        # also don't release the lock if we didn't acquire it
        if time.monotonic() < timeout_at and status:
            cache.delete(lock_id)


class NumericalAbort(Exception):
    """A run left the regime where the discretization is trustworthy.

    Raised on validity-gate violations, density undershoots below the abort
    threshold, non-finite values and pathological rejection sampling.
    """

    def __init__(self, message, time=None, dump_path=None):
        super().__init__(message)
        self.time = time
        self.dump_path = dump_path

    def __str__(self):
        text = super().__str__()
        if self.time is not None:
            text = f"{text} (t={self.time:.6g})"
        return text


class TimeGrid:
    """Uniform time grid 0 = t_0 < ... < t_n = t_final."""

    def __init__(self, t_final: float, dt: float) -> None:
        if dt <= 0 or t_final <= 0:
            raise ValueError("t_final and dt must be positive")
        n_steps = int(round(t_final / dt))
        if n_steps < 1 or abs(n_steps * dt - t_final) > 1e-9 * max(1.0, t_final):
            raise ValueError(f"dt={dt} does not divide t_final={t_final}")
        self.t_final = t_final
        self.dt = dt
        self.n_steps = n_steps

    @property
    def times(self):
        return np.arange(self.n_steps + 1) * self.dt

    def refined(self):
        return TimeGrid(self.t_final, self.dt / 2)


def seeded_rng(seed, *stream):
    """Independent deterministic generator per (seed, stream labels)."""
    labels = [abs(hash_label(s)) for s in stream]
    return np.random.default_rng([int(seed), *labels])


def hash_label(label) -> int:
    digest = hashlib.sha256(str(label).encode()).hexdigest()
    return int(digest[:12], 16)


def config_fingerprint(payload: dict) -> str:
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True, default=str).encode()
    ).hexdigest()[:16]


def resolve_output_dir(output_dir) -> Path:
    path = Path(output_dir)
    if not path.is_absolute():
        path = Path(settings.SIM_OUTPUT_ROOT) / path
    path.mkdir(parents=True, exist_ok=True)
    return path


def dump_state(path: Path, **arrays) -> Path:
    """Write the arrays describing an aborted state next to the run outputs."""
    try:
        np.savez_compressed(path, **arrays)
    except OSError:
        logging.exception(f"Could not write state dump {path}")
        return None
    return path
