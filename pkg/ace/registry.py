"""Storing run manifests in the results database."""

import logging
from dataclasses import asdict

from django.db import transaction

from .models import ExperimentRun, ReportRow

logger = logging.getLogger(__name__)


@transaction.atomic
def record_manifest(manifest, output_dir="", status="complete"):
    """Create or replace the run with this config hash, rows included."""
    run, created = ExperimentRun.objects.update_or_create(
        config_hash=manifest.config_hash,
        defaults={
            'name': manifest.name,
            'seed': str(manifest.seed),
            'output_dir': str(output_dir),
            'status': status,
        },
    )
    run.rows.all().delete()
    ReportRow.objects.bulk_create([
        ReportRow(run=run, table=table, position=position, **asdict(row))
        for table, rows in manifest.tables.items()
        for position, row in enumerate(sorted(rows, key=lambda r: r.epsilon))
    ])
    logger.info("%s run %s with %d rows", "recorded" if created else "replaced", run, run.rows.count())
    return run
