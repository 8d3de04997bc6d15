from django.db import models
from django.utils import timezone


class ExperimentRun(models.Model):
    """One management command invocation and its resolved configuration"""
    STATUS_CHOICES = [
        ('running', 'Running'),
        ('succeeded', 'Succeeded'),
        ('failed', 'Failed'),
    ]

    command = models.CharField(max_length=64, db_index=True)
    config = models.JSONField(default=dict)
    seed = models.BigIntegerField(null=True, blank=True)
    output_dir = models.CharField(max_length=1024, blank=True)
    status = models.CharField(max_length=16, choices=STATUS_CHOICES, default='running')
    exit_code = models.IntegerField(null=True, blank=True)
    error_message = models.TextField(blank=True)
    started_at = models.DateTimeField(default=timezone.now)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ['-started_at']
        indexes = [
            models.Index(fields=['command', 'status'], name='experiment_command_status_idx'),
        ]

    def __str__(self):
        return f"{self.command} [{self.status}] seed={self.seed}"

    @property
    def duration_seconds(self):
        if self.finished_at is None:
            return None
        return (self.finished_at - self.started_at).total_seconds()

    def mark_succeeded(self):
        self.status = 'succeeded'
        self.exit_code = 0
        self.finished_at = timezone.now()
        self.save(update_fields=['status', 'exit_code', 'finished_at'])

    def mark_failed(self, exit_code: int, message: str):
        self.status = 'failed'
        self.exit_code = exit_code
        self.error_message = message
        self.finished_at = timezone.now()
        self.save(update_fields=['status', 'exit_code', 'error_message', 'finished_at'])
