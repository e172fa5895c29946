from django.db import models


class ExperimentRun(models.Model):
    """A finished bench run, keyed by the hash of its validated config."""
    STATUS_CHOICES = [
        ('complete', 'Complete'),
        ('checked', 'Checked'),
        ('failed_checks', 'Failed checks'),
    ]

    config_hash = models.CharField(max_length=64, unique=True)
    name = models.CharField(max_length=100)
    seed = models.CharField(max_length=20, help_text='Master seed, an unsigned 64-bit integer')
    output_dir = models.CharField(max_length=500, blank=True)
    status = models.CharField(max_length=20, choices=STATUS_CHOICES, default='complete')
    created_at = models.DateTimeField(auto_now_add=True)
    updated_at = models.DateTimeField(auto_now=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.name} ({self.config_hash[:12]})"

    @property
    def table_names(self):
        return list(self.rows.order_by('table').values_list('table', flat=True).distinct())


class ReportRow(models.Model):
    """One epsilon row of one results table."""
    run = models.ForeignKey(ExperimentRun, on_delete=models.CASCADE, related_name='rows')
    table = models.CharField(max_length=100)
    position = models.PositiveIntegerField()
    epsilon = models.FloatField()
    effective_epsilon = models.FloatField()
    aurc_x1000 = models.FloatField()
    nll = models.FloatField()
    brier = models.FloatField()
    accuracy_percent = models.FloatField()
    selective_risk = models.FloatField(null=True, blank=True)
    coverage = models.FloatField(null=True, blank=True)
    mean_queries = models.FloatField(null=True, blank=True)

    class Meta:
        ordering = ['run', 'table', 'position']
        constraints = [
            models.UniqueConstraint(fields=['run', 'table', 'position'], name='unique_row_per_table'),
        ]
        indexes = [
            models.Index(fields=['run', 'table'], name='ace_row_run_table_idx'),
        ]

    def __str__(self):
        return f"{self.table} eps={self.epsilon:g}"
