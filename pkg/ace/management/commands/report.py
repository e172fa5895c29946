from pathlib import Path

from ace.checks import FAIL, PASS, run_checks
from ace.exceptions import ConfigurationError
from ace.reporting import (
    MANIFEST_NAME, RunManifest, read_report_csv, render_rows, report_csv, report_csv_text, report_table,
)
from ace.registry import record_manifest

from ._lab import LabCommand


class Command(LabCommand):
    help = 'Print the tables of a finished run from its manifest, or the rows of one report CSV'

    def add_lab_arguments(self, parser):
        parser.add_argument('run_dir', help='directory written by bench, or a CSV written by eval --csv')
        parser.add_argument('--format', choices=['text', 'csv'], default='text')
        parser.add_argument('--checks', action='store_true', help='also evaluate the acceptance checks')
        parser.add_argument('--record', action='store_true', help='store the run in the results database')

    def run(self, cfg, **options):
        run_dir = Path(options['run_dir'])
        if run_dir.is_file():
            self.report_rows(run_dir, **options)
            return
        try:
            manifest = RunManifest.from_json((run_dir / MANIFEST_NAME).read_text())
        except OSError as exc:
            raise ConfigurationError(f'cannot read {run_dir / MANIFEST_NAME}: {exc}') from exc
        if options['format'] == 'csv':
            self.stdout.write(report_csv(manifest), ending='')
        else:
            self.stdout.write(report_table(manifest), ending='')
        if options['checks']:
            write_checks(self, run_checks(manifest))
        if options['record']:
            run = record_manifest(manifest, run_dir)
            self.stdout.write(self.style.SUCCESS(f'Recorded {run}'))

    def report_rows(self, path, **options):
        if options['checks'] or options['record']:
            raise ConfigurationError('--checks and --record need a run directory')
        rows = read_report_csv(path)
        if not rows:
            raise ConfigurationError(f'{path} has no report rows')
        if options['format'] == 'csv':
            self.stdout.write(report_csv_text(rows), ending='')
        else:
            self.stdout.write(render_rows(rows))


def write_checks(command, results):
    styles = {PASS: command.style.SUCCESS, FAIL: command.style.ERROR}
    for result in results:
        style = styles.get(result.status, command.style.WARNING)
        kind = 'hard' if result.hard else 'soft'
        command.stdout.write(style(f'[{result.status}] {result.name} ({kind}): {result.detail}'))
