from django.urls import path

from harness.views import (
    SimulationRunDetailView,
    SimulationRunListView,
    SweepRunListView,
)

app_name = "HARNESS"

urlpatterns = [
    path("runs/", SimulationRunListView.as_view(), name="run-list"),
    path("runs/<int:pk>/", SimulationRunDetailView.as_view(), name="run-detail"),
    path("sweeps/", SweepRunListView.as_view(), name="sweep-list"),
]
