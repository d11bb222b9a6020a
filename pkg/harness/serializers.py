from rest_framework import serializers

from core.utils import TimeGrid
from spectral.fourier import SpectralException

from .config import MODES, mode_table_field, parse_float_list, parse_mode_table
from .ledger import kappa_from_exponents
from .models import SimulationRun, SweepRun


class FloatListField(serializers.Field):
    """A comma-separated string or a list of numbers."""

    default_error_messages = {"invalid": "Expected a comma-separated list of numbers."}

    def to_internal_value(self, data):
        try:
            return list(parse_float_list(data))
        except (TypeError, ValueError):
            self.fail("invalid")

    def to_representation(self, value):
        return list(value)


class ModeTableField(serializers.CharField):
    def to_internal_value(self, data):
        text = super().to_internal_value(data)
        try:
            parse_mode_table(text)
        except ValueError as e:
            raise serializers.ValidationError(str(e))
        return text


class PhaseSerializer(serializers.Serializer):
    name = serializers.CharField()
    weight = serializers.FloatField(min_value=0.0)
    rho = ModeTableField()
    xi = serializers.ListField(child=ModeTableField(), allow_empty=False)


class RunConfigSerializer(serializers.Serializer):
    mode = serializers.ChoiceField(choices=MODES, default="pair")
    dim = serializers.IntegerField(min_value=1, max_value=3)
    cutoff = serializers.IntegerField(min_value=1)
    eps = FloatListField()
    t_final = serializers.FloatField()
    dt = serializers.FloatField()
    n_particles = serializers.IntegerField(min_value=1, default=4096)
    seed = serializers.IntegerField(min_value=0, default=0)
    subsample = serializers.IntegerField(min_value=2, default=1024)
    snapshot_every = serializers.IntegerField(min_value=1, default=10)
    output_dir = serializers.CharField(default="runs")
    n_projections = serializers.IntegerField(min_value=1, default=64)

    delta0 = serializers.FloatField(default=1.5)
    delta1 = serializers.FloatField(default=1.2)
    eta = serializers.FloatField(min_value=0.0, default=0.2)
    norm_beta = serializers.FloatField(default=0.5)
    n_delta = serializers.IntegerField(min_value=1, default=16)

    alpha = serializers.FloatField(default=0.5)
    hyp_beta = serializers.FloatField(default=0.0)
    gamma1 = serializers.FloatField(default=0.0)
    gamma2 = serializers.FloatField(default=0.0)
    c0 = serializers.FloatField(min_value=0.0, default=1.0)

    gamma = serializers.FloatField(min_value=0.0, default=0.0)
    e0 = serializers.ListField(child=ModeTableField(), default=list)
    b0 = serializers.ListField(child=ModeTableField(), default=list)
    b0_mean = FloatListField(default=list)
    e0_mean = FloatListField(default=list)
    e0_mean_exponent = serializers.FloatField(allow_null=True, default=None)

    phases = PhaseSerializer(many=True, allow_empty=False)

    def validate_eps(self, value):
        if not value:
            raise serializers.ValidationError("at least one eps is required")
        if any(not 0 < e <= 1 for e in value):
            raise serializers.ValidationError("every eps must lie in (0, 1]")
        return value

    def validate(self, data):
        if not data["delta0"] > data["delta1"] > 1:
            raise serializers.ValidationError({"delta1": "radii must satisfy delta0 > delta1 > 1"})
        if not 0 < data["norm_beta"] < 1:
            raise serializers.ValidationError({"norm_beta": "must lie in (0, 1)"})
        try:
            TimeGrid(data["t_final"], data["dt"])
        except ValueError as e:
            raise serializers.ValidationError({"dt": str(e)})
        self._validate_exponents(data)
        self._validate_shapes(data)
        return data

    def _validate_exponents(self, data):
        for key in ("alpha", "hyp_beta", "gamma1", "gamma2"):
            if not 0 <= data[key] < 1:
                raise serializers.ValidationError({key: "exponents must lie in [0, 1)"})
        kappa = kappa_from_exponents(data["alpha"], data["hyp_beta"], data["gamma1"], data["gamma2"])
        if kappa <= 0:
            raise serializers.ValidationError({"kappa": f"exponents give kappa = {kappa:.4g} <= 0"})

    def _validate_shapes(self, data):
        dim, cutoff = data["dim"], data["cutoff"]
        magnetic = {1: (0,), 2: (0, 1), 3: (0, 3)}[dim]
        if len(data["e0"]) not in (0, dim):
            raise serializers.ValidationError({"e0": f"expected {dim} components"})
        if len(data["b0"]) not in magnetic:
            raise serializers.ValidationError({"b0": f"expected one of {magnetic} components for d={dim}"})
        if len(data["b0_mean"]) not in magnetic:
            raise serializers.ValidationError({"b0_mean": f"expected one of {magnetic} components for d={dim}"})
        if len(data["e0_mean"]) not in (0, dim):
            raise serializers.ValidationError({"e0_mean": f"expected {dim} components"})
        if data["e0_mean"] and data["e0_mean_exponent"] is None:
            raise serializers.ValidationError({"e0_mean_exponent": "required with e0_mean"})

        tables = list(data["e0"]) + list(data["b0"])
        for phase in data["phases"]:
            if len(phase["xi"]) != dim:
                raise serializers.ValidationError({"phases": f"{phase['name']}: xi needs {dim} components"})
            tables += [phase["rho"], *phase["xi"]]
        try:
            for table in tables:
                mode_table_field(dim, cutoff, table)
        except (ValueError, SpectralException.DimensionMismatch) as e:
            raise serializers.ValidationError({"mode_table": str(e)})


class SimulationRunSerializer(serializers.ModelSerializer):
    class Meta:
        model = SimulationRun
        fields = [
            "pk",
            "mode",
            "eps",
            "status",
            "fingerprint",
            "truncation_time",
            "output_dir",
            "sweep",
            "created_at",
            "finished_at",
            "config",
            "report",
        ]
        read_only_fields = fields


class SimpleSimulationRunSerializer(serializers.ModelSerializer):
    class Meta:
        model = SimulationRun
        fields = ["pk", "mode", "eps", "status", "truncation_time", "created_at"]
        read_only_fields = fields


class SweepRunSerializer(serializers.ModelSerializer):
    members = SimpleSimulationRunSerializer(many=True, read_only=True)

    class Meta:
        model = SweepRun
        fields = [
            "pk",
            "fingerprint",
            "eps_list",
            "kappa_measured",
            "r_squared",
            "partial",
            "summary",
            "members",
            "created_at",
        ]
        read_only_fields = fields
