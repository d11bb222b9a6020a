from django.db import models
from django.utils import timezone
from django.utils.translation import gettext_lazy as _


class SweepRun(models.Model):
    fingerprint = models.CharField(max_length=32, db_index=True)
    config = models.JSONField()
    eps_list = models.JSONField(default=list)
    kappa_measured = models.FloatField(null=True, blank=True)
    r_squared = models.FloatField(null=True, blank=True)
    partial = models.BooleanField(default=False)
    summary = models.JSONField(null=True, blank=True)
    output_dir = models.CharField(max_length=512, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    def __str__(self):
        return f"sweep {self.pk} over {self.eps_list}"


class SimulationRun(models.Model):
    class Mode(models.TextChoices):
        VM = "vm", _("Vlasov-Maxwell")
        VP = "vp", _("Vlasov-Poisson")
        PAIR = "pair", _("Paired run")
        SWEEP = "sweep", _("Sweep member")
        CK = "ck", _("Successive approximations")
        VERIFY = "verify", _("Verification suite")

    class Status(models.TextChoices):
        PENDING = "PENDING", _("Pending")
        FINISHED = "FINISHED", _("Finished")
        ABORTED = "ABORTED", _("Aborted")

    mode = models.CharField(max_length=8, choices=Mode.choices, default=Mode.PAIR)
    eps = models.FloatField(null=True, blank=True)
    config = models.JSONField()
    fingerprint = models.CharField(max_length=32, db_index=True)
    status = models.CharField(max_length=10, choices=Status.choices, default=Status.PENDING)
    truncation_time = models.FloatField(null=True, blank=True)
    report = models.JSONField(null=True, blank=True)
    output_dir = models.CharField(max_length=512, blank=True)
    sweep = models.ForeignKey(
        SweepRun, on_delete=models.CASCADE, null=True, blank=True, related_name="members"
    )
    created_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ["-pk"]

    def __str__(self):
        return f"{self.mode} run {self.pk} (eps={self.eps})"

    @property
    def is_aborted(self):
        return self.status == self.Status.ABORTED

    def record(self, report: dict):
        """Store a finished or truncated report."""
        self.report = report
        self.output_dir = report.get("output_dir", self.output_dir)
        if report.get("aborted"):
            self.status = self.Status.ABORTED
            self.truncation_time = report.get("truncation_time")
        else:
            self.status = self.Status.FINISHED
        self.finished_at = timezone.now()
        self.save()
