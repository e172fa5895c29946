from pathlib import Path

from ace.confidence import score_dataset
from ace.datasets import read_dataset_csv
from ace.metrics import rc_curve, worst_case_for, write_rc_csv
from ace.svg import render_rc_svg

from ._lab import ScoringCommand

TABLE = 'cli_rc_curve'


class Command(ScoringCommand):
    help = 'Write the risk-coverage curve of a scored dataset as CSV and SVG'

    def add_lab_arguments(self, parser):
        super().add_lab_arguments(parser)
        parser.add_argument('--name', default='observed', help='curve name in the legend')
        parser.add_argument('--title', help='plot title')

    def run(self, cfg, **options):
        scorer = self.build_scorer(cfg, options, TABLE)
        data = read_dataset_csv(options['data'], split='test', class_count=scorer.class_count)
        items = score_dataset(scorer, data)
        curve = rc_curve(items)
        out = Path(options['out']) if options.get('out') else cfg.output_dir / 'rc'
        out.mkdir(parents=True, exist_ok=True)
        name = options['name']
        write_rc_csv(curve, out / f'{name}.csv')
        render_rc_svg([(name, curve), ('worst case', worst_case_for(items), 'worst')], out / f'{name}.svg',
                      title=options.get('title'))
        self.stdout.write(self.style.SUCCESS(
            f'AURC x1000 {curve.area() * 1000.0:.2f} over {len(curve)} points -> {out}'))
