from ace.confidence import score_dataset
from ace.datasets import read_dataset_csv
from ace.metrics import evaluate
from ace.reporting import render_rows, write_report_csv
from ace.selnet import calibrate_threshold

from ._lab import ScoringCommand

TABLE = 'cli_eval'


class Command(ScoringCommand):
    help = 'Score a dataset CSV and print AURC, NLL, Brier and accuracy'

    def add_lab_arguments(self, parser):
        super().add_lab_arguments(parser)
        parser.add_argument('--epsilon', type=float, default=0.0, help='budget the data was attacked with')
        parser.add_argument('--effective-epsilon', type=float, default=0.0,
                            help='mean effective budget reported by the attack')
        parser.add_argument('--theta', type=float, help='selection threshold for selective risk and coverage')
        parser.add_argument('--calibrate', help='validation CSV to calibrate a selnet threshold on')
        parser.add_argument('--csv', help='also write the row to this CSV file')

    def run(self, cfg, **options):
        scorer = self.build_scorer(cfg, options, TABLE)
        data = read_dataset_csv(options['data'], split='test', class_count=scorer.class_count)
        theta = options.get('theta')
        if options.get('calibrate'):
            validation = read_dataset_csv(options['calibrate'], split='validation', class_count=scorer.class_count)
            calibrated = calibrate_threshold(scorer.victim, validation, cfg.selnet.coverage)
            theta = calibrated.theta
            self.say(f'calibrated theta {theta:.6g} at coverage {calibrated.coverage:.4f}')
        items = score_dataset(scorer, data)
        row = evaluate(items, epsilon=options['epsilon'], effective_epsilon=options['effective_epsilon'],
                       theta=theta)
        self.say(render_rows([row]))
        if options.get('csv'):
            write_report_csv([row], options['csv'])
            self.stdout.write(self.style.SUCCESS(f"Wrote {options['csv']}"))
