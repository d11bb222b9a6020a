from django_filters.rest_framework import DjangoFilterBackend
from rest_framework.generics import ListAPIView, RetrieveAPIView

from .filters import SimulationRunFilter, SweepRunFilter
from .models import SimulationRun, SweepRun
from .paginations import RunResultsSetPagination
from .serializers import (
    SimpleSimulationRunSerializer,
    SimulationRunSerializer,
    SweepRunSerializer,
)


class SimulationRunListView(ListAPIView):
    queryset = SimulationRun.objects.all()
    serializer_class = SimpleSimulationRunSerializer
    pagination_class = RunResultsSetPagination
    filter_backends = [DjangoFilterBackend]
    filterset_class = SimulationRunFilter


class SimulationRunDetailView(RetrieveAPIView):
    queryset = SimulationRun.objects.all()
    serializer_class = SimulationRunSerializer


class SweepRunListView(ListAPIView):
    queryset = SweepRun.objects.prefetch_related("members").order_by("-pk")
    serializer_class = SweepRunSerializer
    pagination_class = RunResultsSetPagination
    filter_backends = [DjangoFilterBackend]
    filterset_class = SweepRunFilter
