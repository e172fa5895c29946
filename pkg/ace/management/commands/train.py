from pathlib import Path

from ace.datasets import gen_splits, read_splits
from ace.harness import ModelZoo
from ace.modelfile import save_model
from ace.rng import RngState, Stage

from ._lab import LabCommand

MODELS = ('victim', 'ensemble', 'proxy', 'foreign_proxy', 'mc_victim', 'selnet')


class Command(LabCommand):
    help = 'Train one model family of a config and save it as model files'

    def add_lab_arguments(self, parser):
        parser.add_argument('--model', choices=MODELS, default='victim', dest='family',
                            help='which model family to train')
        parser.add_argument('--data', help='directory written by gen_data; generated from the config otherwise')

    def run(self, cfg, **options):
        root = RngState(cfg.seed)
        if options.get('data'):
            splits = read_splits(options['data'], class_count=cfg.dataset.classes)
        else:
            splits = gen_splits(cfg.dataset, root.seed_for(Stage.DATA))
        zoo = ModelZoo(cfg, splits, root, cfg.workers)
        family = options['family']
        if family == 'ensemble':
            trained = zoo.ensemble(max(cfg.ensemble.sizes))
        else:
            trained = getattr(zoo, family)()

        out = Path(options['out']) if options.get('out') else cfg.output_dir / 'models'
        out.mkdir(parents=True, exist_ok=True)
        members = trained if isinstance(trained, tuple) else (trained,)
        for j, model in enumerate(members):
            suffix = f'_{j}' if isinstance(trained, tuple) else ''
            path = out / f'{family}{suffix}.model'
            save_model(model, path)
            self.say(f'{path}: train accuracy {model.train_accuracy:.4f}')
        self.stdout.write(self.style.SUCCESS(f'Trained {len(members)} {family} model(s)'))
