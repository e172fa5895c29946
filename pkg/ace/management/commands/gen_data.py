from pathlib import Path

from ace.datasets import gen_splits, write_dataset_csv
from ace.rng import RngState, Stage

from ._lab import LabCommand


class Command(LabCommand):
    help = 'Generate the synthetic train/validation/test splits of a config as CSV files'

    def run(self, cfg, **options):
        out = Path(options['out']) if options.get('out') else cfg.output_dir / 'data'
        out.mkdir(parents=True, exist_ok=True)
        splits = gen_splits(cfg.dataset, RngState(cfg.seed).seed_for(Stage.DATA))
        for name, data in splits.named().items():
            path = out / f'{name}.csv'
            write_dataset_csv(data, path)
            self.say(f'{name}: {len(data)} samples -> {path}')
        self.stdout.write(self.style.SUCCESS(f'Generated {cfg.dataset.kind} data with seed {cfg.seed}'))
