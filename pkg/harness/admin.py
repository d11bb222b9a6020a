from django.contrib import admin

from harness.models import SimulationRun, SweepRun


class SimulationRunAdmin(admin.ModelAdmin):
    list_display = ["pk", "mode", "eps", "status", "truncation_time", "created_at"]
    list_filter = ["mode", "status"]
    search_fields = ["fingerprint"]
    readonly_fields = ["report", "config", "fingerprint"]


class SweepRunAdmin(admin.ModelAdmin):
    list_display = ["pk", "eps_list", "kappa_measured", "r_squared", "partial", "created_at"]
    list_filter = ["partial"]
    readonly_fields = ["summary", "config", "fingerprint"]


admin.site.register(SimulationRun, SimulationRunAdmin)
admin.site.register(SweepRun, SweepRunAdmin)
