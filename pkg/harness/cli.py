"""Shared plumbing of the harness management commands."""
import configparser
from contextlib import contextmanager

from django.core.management.base import CommandError
from rest_framework.exceptions import ValidationError

from core.utils import NumericalAbort
from spectral.fourier import SpectralException
from transport.wasserstein import TransportException

from .config import RunConfig

EXIT_FAILED = 1
EXIT_INVALID = 2
EXIT_ABORTED = 3

# flag -> INI key
FLAG_OVERRIDES = {
    "eps": "run.eps",
    "dt": "run.dt",
    "t_final": "run.t_final",
    "output_dir": "run.output_dir",
    "seed": "run.seed",
}


def add_config_arguments(parser):
    parser.add_argument("--config", help="INI path or bundled/<name>")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override one config key; repeatable",
    )
    parser.add_argument("--eps", help="comma separated eps values")
    parser.add_argument("--dt", type=float)
    parser.add_argument("--t-final", dest="t_final", type=float)
    parser.add_argument("--output-dir", dest="output_dir")
    parser.add_argument("--seed", type=int)


def load_config(options) -> RunConfig:
    if not options.get("config"):
        raise CommandError("--config is required", returncode=EXIT_INVALID)
    overrides = list(options.get("overrides") or [])
    for flag, key in FLAG_OVERRIDES.items():
        if options.get(flag) is not None:
            overrides.append(f"{key}={options[flag]}")
    return RunConfig.from_ini(options["config"], overrides)


def _message(error):
    if isinstance(error, ValidationError):
        return f"invalid configuration: {error.detail}"
    return str(error)


@contextmanager
def command_errors():
    """Translate domain errors into exit codes: 2 for bad input, 3 for numerical aborts."""
    try:
        yield
    except (
        ValidationError,
        FileNotFoundError,
        configparser.Error,
        SpectralException.DimensionMismatch,
        SpectralException.InvalidRadius,
        SpectralException.NeutralityViolated,
        TransportException.UnsupportedMeasures,
        TransportException.InvalidProjectionCount,
    ) as e:
        raise CommandError(_message(e), returncode=EXIT_INVALID)
    except NumericalAbort as e:
        raise CommandError(f"numerical abort: {e}", returncode=EXIT_ABORTED)
