from ace.checks import hard_failures, run_checks
from ace.exceptions import AcceptanceError
from ace.harness import run_experiment
from ace.registry import record_manifest
from ace.reporting import report_table

from ._lab import LabCommand
from .report import write_checks


class Command(LabCommand):
    help = 'Run the full experiment matrix: every scenario over the epsilon grid'

    def add_lab_arguments(self, parser):
        parser.add_argument('--check', action='store_true',
                            help='evaluate the acceptance checks; hard failures exit with code 4')
        parser.add_argument('--record', action='store_true', help='store the run in the results database')

    def run(self, cfg, **options):
        self.stdout.write(f'bench {cfg.experiment.name}: seed {cfg.seed}, scenarios {", ".join(cfg.experiment.scenarios)}')
        out_dir = options.get('out')
        manifest = run_experiment(cfg, out_dir=out_dir, workers=cfg.workers, notify=self.say)
        self.stdout.write(report_table(manifest), ending='')

        failures = []
        status = 'complete'
        if options['check']:
            results = run_checks(manifest)
            write_checks(self, results)
            failures = hard_failures(results)
            status = 'failed_checks' if failures else 'checked'
        if options['record']:
            run = record_manifest(manifest, out_dir or cfg.output_dir / manifest.config_hash[:12], status=status)
            self.stdout.write(self.style.SUCCESS(f'Recorded {run}'))
        if failures:
            raise AcceptanceError('acceptance checks failed: ' + ', '.join(f.name for f in failures))
        self.stdout.write(self.style.SUCCESS(f'Run {manifest.config_hash[:12]} finished'))
