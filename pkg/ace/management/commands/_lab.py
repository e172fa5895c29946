"""Shared plumbing of the lab commands: common flags, config overrides, exit codes."""

import logging

from django.core.management.base import BaseCommand, CommandError

from ace.attack import BLACK_BOX, DIRECT, INDIRECT_SOFTMAX, WHITE_BOX
from ace.confidence import KINDS, ConfidenceScorer
from ace.exceptions import LabError
from ace.expconfig import load_config
from ace.harness import table_key
from ace.modelfile import load_model
from ace.rng import RngState, Stage

logger = logging.getLogger('ace.commands')

MODES = {'whitebox': WHITE_BOX, 'blackbox': BLACK_BOX}
TARGETS = {'direct': DIRECT, 'indirect': INDIRECT_SOFTMAX}


def u64(value):
    seed = int(value)
    if not 0 <= seed < 2 ** 64:
        raise ValueError(value)
    return seed


class LabCommand(BaseCommand):
    """Base for the lab commands.

    Subclasses implement `run(cfg, **options)`; lab errors leave with their
    exit code.
    """
    attack_flags = False

    def add_arguments(self, parser):
        parser.add_argument('--config', help='experiment config file (defaults apply without one)')
        parser.add_argument('--seed', type=u64, help='master seed, overrides the config and ACE_MASTER_SEED')
        parser.add_argument('--out', help='output directory')
        parser.add_argument('--epsilons', help='comma list of attack budgets, e.g. 0.01,0.05,0.2')
        parser.add_argument('--workers', type=int, help='worker threads')
        if self.attack_flags:
            parser.add_argument('--mode', choices=sorted(MODES), help='attacker access to the victim')
            parser.add_argument('--target', choices=sorted(TARGETS), help='which confidence the step follows')
        self.add_lab_arguments(parser)

    def add_lab_arguments(self, parser):
        pass

    def load_lab_config(self, options):
        cfg = load_config(options.get('config'))
        attack = {'epsilons': options.get('epsilons')}
        if options.get('mode'):
            attack['mode'] = MODES[options['mode']]
        if options.get('target'):
            attack['target'] = TARGETS[options['target']]
        return cfg.updated(
            experiment={'seed': options.get('seed'), 'workers': options.get('workers')},
            attack=attack,
            output={'directory': options.get('out')},
        )

    def handle(self, *args, **options):
        try:
            cfg = self.load_lab_config(options)
            return self.run(cfg, **options)
        except LabError as exc:
            logger.debug('command failed', exc_info=True)
            raise CommandError(str(exc), returncode=exc.exit_code) from exc

    def run(self, cfg, **options):
        raise NotImplementedError

    def say(self, message):
        self.stdout.write(message)


class ScoringCommand(LabCommand):
    """A command that loads models from files and scores with them."""

    def add_lab_arguments(self, parser):
        parser.add_argument('--model', action='append', required=True,
                            help='model file; repeat for an ensemble')
        parser.add_argument('--data', required=True, help='dataset CSV (label,f0,f1,...)')
        parser.add_argument('--scorer', choices=KINDS, help='confidence score, defaults to [scorer] kind')
        parser.add_argument('--passes', type=int, help='MC-dropout passes, defaults to [scorer] passes')

    def build_scorer(self, cfg, options, table):
        models = [load_model(path) for path in options['model']]
        kind = options.get('scorer') or cfg.scorer.kind
        passes = options.get('passes') or cfg.scorer.passes
        rng = RngState(cfg.seed).derive(Stage.EVAL, table_key(table))
        return ConfidenceScorer(kind, models, passes=passes, rng=rng,
                                variance_statistic=cfg.mc.variance_statistic)
