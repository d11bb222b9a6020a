from django_filters import rest_framework as filters

from .models import SimulationRun, SweepRun


class SimulationRunFilter(filters.FilterSet):
    eps_min = filters.NumberFilter(field_name="eps", lookup_expr="gte")
    eps_max = filters.NumberFilter(field_name="eps", lookup_expr="lte")

    class Meta:
        model = SimulationRun
        fields = ["mode", "status", "sweep", "fingerprint"]


class SweepRunFilter(filters.FilterSet):
    class Meta:
        model = SweepRun
        fields = ["partial", "fingerprint"]
