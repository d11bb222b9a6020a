"""Run configuration: INI files with flat sections, validated by a DRF serializer.

Sections are ``[run]``, ``[norms]``, ``[hypotheses]``, ``[fields]`` and one
``[phase.<id>]`` per phase. Mode tables are kept verbatim so that a config
written back with :meth:`RunConfig.to_ini` reads identically.
"""
import configparser
import dataclasses
import io
from dataclasses import dataclass
from pathlib import Path

from django.conf import settings
from rest_framework.exceptions import ValidationError

from spectral.fourier import SpectralField

MODES = ("vm", "vp", "pair", "sweep", "ck", "verify")
BUNDLED_PREFIX = "bundled/"

RUN_KEYS = (
    "mode",
    "dim",
    "cutoff",
    "eps",
    "t_final",
    "dt",
    "n_particles",
    "seed",
    "subsample",
    "snapshot_every",
    "output_dir",
    "n_projections",
)
# INI key -> RunConfig attribute
NORM_KEYS = {"delta0": "delta0", "delta1": "delta1", "eta": "eta", "beta": "norm_beta", "n_delta": "n_delta"}
HYPOTHESIS_KEYS = {"alpha": "alpha", "beta": "hyp_beta", "gamma1": "gamma1", "gamma2": "gamma2", "c0": "c0"}
FIELD_SCALARS = ("gamma", "b0_mean", "e0_mean", "e0_mean_exponent")


def parse_mode_table(text: str):
    """``const ; cos k1,k2 amp ; sin k1,k2 amp`` -> (const, [(kind, k, amp)])."""
    const, terms = 0.0, []
    for chunk in (c.strip() for c in str(text).split(";")):
        if not chunk:
            continue
        parts = chunk.split()
        if len(parts) == 1:
            const += float(parts[0])
            continue
        if len(parts) != 3 or parts[0] not in ("cos", "sin"):
            raise ValueError(f"cannot read mode-table entry {chunk!r}")
        k = tuple(int(v) for v in parts[1].split(","))
        terms.append((parts[0], k, float(parts[2])))
    return const, terms


def mode_table_field(dim, cutoff, *tables) -> SpectralField:
    """One component per table."""
    return SpectralField.from_terms(dim, cutoff, [parse_mode_table(t) for t in tables])


def parse_float_list(value):
    if isinstance(value, str):
        return tuple(float(v) for v in value.split(",") if v.strip())
    return tuple(float(v) for v in value)


def format_float_list(values) -> str:
    return ",".join(repr(float(v)) for v in values)


@dataclass(frozen=True)
class PhaseConfig:
    name: str
    weight: float
    rho: str
    xi: tuple


@dataclass(frozen=True)
class RunConfig:
    dim: int
    cutoff: int
    eps: tuple
    t_final: float
    dt: float
    phases: tuple
    mode: str = "pair"
    n_particles: int = 4096
    seed: int = 0
    subsample: int = 1024
    snapshot_every: int = 10
    output_dir: str = "runs"
    n_projections: int = 64
    delta0: float = 1.5
    delta1: float = 1.2
    eta: float = 0.2
    norm_beta: float = 0.5
    n_delta: int = 16
    alpha: float = 0.5
    hyp_beta: float = 0.0
    gamma1: float = 0.0
    gamma2: float = 0.0
    c0: float = 1.0
    gamma: float = 0.0
    e0: tuple = ()
    b0: tuple = ()
    b0_mean: tuple = ()
    e0_mean: tuple = ()
    e0_mean_exponent: float = None

    @classmethod
    def from_payload(cls, payload: dict) -> "RunConfig":
        from .serializers import RunConfigSerializer

        serializer = RunConfigSerializer(data=payload)
        serializer.is_valid(raise_exception=True)
        data = dict(serializer.validated_data)
        data["phases"] = tuple(
            PhaseConfig(name=p["name"], weight=p["weight"], rho=p["rho"], xi=tuple(p["xi"]))
            for p in data["phases"]
        )
        for key in ("eps", "e0", "b0", "b0_mean", "e0_mean"):
            data[key] = tuple(data.get(key, ()))
        return cls(**data)

    from_dict = from_payload

    @classmethod
    def from_ini(cls, source, overrides=()) -> "RunConfig":
        """Read a config from a path, ``bundled/<name>`` or INI text."""
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        if isinstance(source, Path) or "\n" not in str(source):
            path = resolve_config_path(source)
            parser.read_string(path.read_text())
        else:
            parser.read_string(str(source))
        apply_overrides(parser, overrides)
        return cls.from_payload(ini_to_payload(parser))

    def to_ini(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        run = {key: getattr(self, key) for key in RUN_KEYS}
        run["eps"] = format_float_list(self.eps)
        parser["run"] = {k: _ini_value(v) for k, v in run.items()}
        parser["norms"] = {k: _ini_value(getattr(self, a)) for k, a in NORM_KEYS.items()}
        parser["hypotheses"] = {k: _ini_value(getattr(self, a)) for k, a in HYPOTHESIS_KEYS.items()}
        fields = {"gamma": _ini_value(self.gamma)}
        for i, table in enumerate(self.e0, start=1):
            fields[f"e0_{i}"] = table
        if len(self.b0) == 1:
            fields["b0"] = self.b0[0]
        else:
            for i, table in enumerate(self.b0, start=1):
                fields[f"b0_{i}"] = table
        if self.b0_mean:
            fields["b0_mean"] = format_float_list(self.b0_mean)
        if self.e0_mean:
            fields["e0_mean"] = format_float_list(self.e0_mean)
        if self.e0_mean_exponent is not None:
            fields["e0_mean_exponent"] = _ini_value(self.e0_mean_exponent)
        parser["fields"] = fields
        for phase in self.phases:
            section = {"weight": _ini_value(phase.weight), "rho": phase.rho}
            for i, table in enumerate(phase.xi, start=1):
                section[f"xi_{i}"] = table
            parser[f"phase.{phase.name}"] = section
        stream = io.StringIO()
        parser.write(stream)
        return stream.getvalue()

    def to_dict(self) -> dict:
        payload = dataclasses.asdict(self)
        for key in ("eps", "e0", "b0", "b0_mean", "e0_mean"):
            payload[key] = list(payload[key])
        payload["phases"] = [
            {"name": p.name, "weight": p.weight, "rho": p.rho, "xi": list(p.xi)} for p in self.phases
        ]
        return payload

    def replace(self, **changes) -> "RunConfig":
        return RunConfig.from_payload({**self.to_dict(), **changes})

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_ini())
        return path


def _ini_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def resolve_config_path(source) -> Path:
    text = str(source)
    if text.startswith(BUNDLED_PREFIX):
        name = text[len(BUNDLED_PREFIX):]
        path = Path(settings.SIM_BUNDLED_CONFIGS) / (name if name.endswith(".ini") else f"{name}.ini")
    else:
        path = Path(text)
    if not path.is_file():
        raise FileNotFoundError(f"config file {text} not found")
    return path


def apply_overrides(parser: configparser.ConfigParser, overrides):
    """Apply ``section.key=value`` strings; the section is everything before the last dot."""
    for override in overrides:
        target, sep, value = str(override).partition("=")
        section, dot, key = target.strip().rpartition(".")
        if not sep or not dot or not key:
            raise ValidationError({"overrides": f"expected section.key=value, got {override!r}"})
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, value.strip())


def ini_to_payload(parser: configparser.ConfigParser) -> dict:
    """Flatten the INI sections into the serializer's field names."""
    payload, phases = {}, []
    for section in parser.sections():
        values = dict(parser.items(section))
        if section == "run":
            _copy_known(values, {k: k for k in RUN_KEYS}, payload, section)
        elif section == "norms":
            _copy_known(values, NORM_KEYS, payload, section)
        elif section == "hypotheses":
            _copy_known(values, HYPOTHESIS_KEYS, payload, section)
        elif section == "fields":
            _read_fields(values, payload)
        elif section.startswith("phase."):
            phases.append(_read_phase(section, values))
        else:
            raise ValidationError({section: "unknown section"})
    payload["phases"] = phases
    return payload


def _copy_known(values, names, payload, section):
    for key, value in values.items():
        if key not in names:
            raise ValidationError({f"{section}.{key}": "unknown key"})
        payload[names[key]] = value


def _numbered(values, prefix):
    """Values of ``prefix_1, prefix_2, ...`` in order, removed from ``values``."""
    out, i = [], 1
    while f"{prefix}_{i}" in values:
        out.append(values.pop(f"{prefix}_{i}"))
        i += 1
    return out


def _read_fields(values, payload):
    values = dict(values)
    payload["e0"] = _numbered(values, "e0")
    payload["b0"] = [values.pop("b0")] if "b0" in values else _numbered(values, "b0")
    for key in FIELD_SCALARS:
        if key in values:
            payload[key] = values.pop(key)
    if values:
        raise ValidationError({f"fields.{sorted(values)[0]}": "unknown key"})


def _read_phase(section, values):
    values = dict(values)
    phase = {"name": section[len("phase."):], "xi": _numbered(values, "xi")}
    for key in ("weight", "rho"):
        if key in values:
            phase[key] = values.pop(key)
    if values:
        raise ValidationError({f"{section}.{sorted(values)[0]}": "unknown key"})
    return phase
