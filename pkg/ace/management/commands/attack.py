from pathlib import Path

import numpy as np

from ace.attack import BLACK_BOX, DIRECT, AttackConfig, LabelOracle, attack_dataset
from ace.confidence import SELECTOR_HEAD, ensemble_probs
from ace.datasets import read_dataset_csv, write_dataset_csv
from ace.exceptions import ConfigurationError
from ace.harness import table_key
from ace.modelfile import load_model
from ace.rng import RngState, Stage

from ._lab import ScoringCommand

TABLE = 'cli_attack'


class Command(ScoringCommand):
    help = 'Attack the confidence of a victim on a dataset CSV and write the perturbed copies'
    attack_flags = True

    def add_lab_arguments(self, parser):
        super().add_lab_arguments(parser)
        parser.add_argument('--proxy', action='append', default=[],
                            help='proxy model file for black-box or indirect attacks; repeat for an ensemble')

    def _source(self, cfg, scorer, proxies):
        a = cfg.attack
        if a.mode == BLACK_BOX:
            if not proxies:
                raise ConfigurationError('a black-box attack needs --proxy model files')
            return tuple(proxies)
        if a.target == DIRECT:
            return None
        if proxies:
            return tuple(proxies)
        # white-box indirect: the victim's own softmax
        return scorer.victim if scorer.kind == SELECTOR_HEAD or len(scorer.models) == 1 else scorer.models

    def run(self, cfg, **options):
        scorer = self.build_scorer(cfg, options, TABLE)
        data = read_dataset_csv(options['data'], split='test', class_count=scorer.class_count)
        proxies = [load_model(path) for path in options['proxy']]
        source = self._source(cfg, scorer, proxies)
        truth = None
        if cfg.attack.truth == 'proxy':
            if not proxies:
                raise ConfigurationError('attack.truth = proxy needs --proxy model files')
            truth = np.argmax(ensemble_probs(proxies, data.features), axis=-1)

        out = Path(options['out']) if options.get('out') else cfg.output_dir / 'attacked'
        out.mkdir(parents=True, exist_ok=True)
        root = RngState(cfg.seed)
        a = cfg.attack
        grid = a.grid()
        for index, epsilon in enumerate(grid):
            if epsilon == 0:
                continue
            attack_cfg = AttackConfig(epsilon=epsilon, epsilon_decay=a.epsilon_decay,
                                      max_iterations=a.max_iterations, mode=a.mode, target=a.target,
                                      clamp_domain=a.clamp_domain)
            oracle = LabelOracle(scorer)
            outcomes, summary = attack_dataset(
                oracle, source, scorer, data, attack_cfg,
                rng=root.derive(Stage.ATTACK, table_key(TABLE), index),
                workers=cfg.workers, truth=truth)
            attacked = data.with_features(np.stack([o.x_tilde for o in outcomes]))
            path = out / f'eps{index}.csv'
            write_dataset_csv(attacked, path)
            self.say(f'eps={epsilon:g}: effective eps {summary.mean_effective_epsilon:.6g}, '
                     f'perturbed {summary.fraction_perturbed:.4f}, '
                     f'queries/sample {summary.mean_queries:.2f} -> {path}')
        self.stdout.write(self.style.SUCCESS(f'Attacked {len(data)} samples ({a.mode}, {a.target})'))
