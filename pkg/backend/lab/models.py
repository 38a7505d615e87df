from django.db import models
from core.models import Core


class RunRecord(Core):
    """
    One scenario run of a laboratory command, kept for sweep aggregation.
    The files written to output_dir remain the reference artifacts.
    """
    scenario = models.CharField(max_length=255)
    command = models.CharField(max_length=64)
    exit_code = models.PositiveSmallIntegerField()
    passed = models.BooleanField(default=False)
    output_dir = models.CharField(max_length=1024, blank=True)
    manifest = models.JSONField(default=dict)
    report = models.JSONField(default=dict)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.command} {self.scenario} -> {self.exit_code}"


class CalibrationRecord(Core):
    """
    Dispersive constants found by the calibrate command.
    """
    run = models.ForeignKey(RunRecord, on_delete=models.SET_NULL, null=True, blank=True, related_name='calibrations')
    n = models.PositiveSmallIntegerField()
    c_tilde = models.FloatField()
    delta_n = models.FloatField()
    worst_ratio = models.FloatField()
    profiles_used = models.PositiveIntegerField()

    def __str__(self):
        return f"n={self.n}: c_tilde={self.c_tilde:.6g}, delta_n={self.delta_n:.6g}"
