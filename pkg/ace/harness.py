"""Experiment runner.

Generates the splits, trains every model a scenario needs, attacks the test
split at each epsilon of the grid, and writes the tables, RC curves,
histograms and plots of the run. All randomness is derived from the master
seed per (stage, table, epsilon index, sample index), so worker count does not
change any output byte.
"""

import logging
import os
import shutil
import tempfile
import zlib
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .attack import BLACK_BOX, DIRECT, INDIRECT_SOFTMAX, WHITE_BOX, AttackConfig, LabelOracle, attack_dataset
from .confidence import (
    ENSEMBLE_MEAN_SOFTMAX, MC_ENTROPY, MC_VARIANCE, SELECTOR_HEAD, SOFTMAX_RESPONSE, ConfidenceScorer,
    ensemble_probs, score_dataset,
)
from .datasets import gen_splits, write_dataset_csv
from .engine import TrainHyper, mlp_specs, train_ensemble, train_sgd
from .exceptions import ConfigurationError, LabError, StageError
from .metrics import (
    confidence_histograms, empirical_coverage, evaluate, rc_curve, worst_case_for, write_histogram_csv, write_rc_csv,
)
from .modelfile import save_model
from .reporting import MANIFEST_NAME, RunManifest, report_csv, report_table, write_report_csv
from .rng import RngState, Stage
from .selnet import SelNetSpecs, SelNetTrainConfig, calibrate_threshold, selnet_train
from .svg import render_rc_svg

logger = logging.getLogger(__name__)


@contextmanager
def stage(name):
    try:
        yield
    except StageError:
        raise
    except LabError as exc:
        raise StageError(name, exc) from exc


def table_key(name):
    """Stable integer key of a table name, for deriving its random streams."""
    return zlib.crc32(name.encode())


@dataclass(frozen=True, eq=False)
class Scenario:
    table: str
    scorer: ConfidenceScorer
    source: object = None
    mode: str = WHITE_BOX
    target: str = DIRECT
    selnet: object = None

    def details(self):
        out = {"scorer": self.scorer.kind, "mode": self.mode, "target": self.target}
        if self.scorer.is_mc:
            out["passes"] = self.scorer.passes
        return out


class ModelZoo:
    """Trains each model a run needs, once, on first use."""

    def __init__(self, cfg, splits, root, workers=1):
        self.cfg = cfg
        self.splits = splits
        self.root = root
        self.workers = workers
        self._cache = {}

    def _hyper(self, seed):
        v = self.cfg.victim
        return TrainHyper(lr=v.lr, epochs=v.epochs, batch=v.batch, seed=seed, momentum=v.momentum)

    def _specs(self, hidden, dropout_rate=0.0):
        data = self.splits.train
        return mlp_specs(data.dimensions, hidden, data.class_count, dropout_rate)

    def _get(self, key, build):
        if key not in self._cache:
            with stage("train"):
                self._cache[key] = build()
        return self._cache[key]

    @property
    def trained(self):
        return dict(self._cache)

    def victim(self):
        return self._get("victim", lambda: train_sgd(
            self._specs(self.cfg.victim.hidden), self.splits.train,
            self._hyper(self.root.seed_for(Stage.VICTIM))))

    def ensemble(self, size):
        members = self._get("ensemble", lambda: train_ensemble(
            self._specs(self.cfg.victim.hidden), self.splits.train, self._hyper(0),
            [self.root.seed_for(Stage.ENSEMBLE, j) for j in range(max(self.cfg.ensemble.sizes))],
            self.workers))
        return members[:size]

    def _proxy_data(self):
        if not self.cfg.proxy.disjoint_data:
            return self.splits.train
        if self.splits.proxy is None:
            raise ConfigurationError("proxy.disjoint_data needs dataset.n_proxy > 0")
        return self.splits.proxy

    def proxy(self):
        p = self.cfg.proxy
        return self._get("proxy", lambda: train_ensemble(
            self._specs(p.hidden), self._proxy_data(), self._hyper(0),
            [self.root.seed_for(Stage.PROXY, j) for j in range(p.size)], self.workers))

    def foreign_proxy(self):
        p = self.cfg.proxy
        return self._get("foreign_proxy", lambda: train_ensemble(
            self._specs(p.foreign_hidden), self._proxy_data(), self._hyper(0),
            [self.root.seed_for(Stage.FOREIGN_PROXY, j) for j in range(p.size)], self.workers))

    def mc_victim(self):
        return self._get("mc_victim", lambda: train_sgd(
            self._specs(self.cfg.victim.hidden, self.cfg.mc_dropout_rate), self.splits.train,
            self._hyper(self.root.seed_for(Stage.MC_VICTIM))))

    def selnet(self):
        s = self.cfg.selnet
        data = self.splits.train

        def build():
            specs = SelNetSpecs.build(data.dimensions, self.cfg.victim.hidden, data.class_count, s.selector_hidden)
            train_cfg = SelNetTrainConfig(target_coverage=s.coverage, constraint_weight=s.constraint_weight,
                                          aux_mix=s.aux_mix, hyper=self._hyper(self.root.seed_for(Stage.SELNET)))
            return selnet_train(specs, data, train_cfg)
        return self._get("selnet", build)


def _ensemble_scorer(members):
    if len(members) == 1:
        return ConfidenceScorer(SOFTMAX_RESPONSE, members)
    return ConfidenceScorer(ENSEMBLE_MEAN_SOFTMAX, members)


def build_scenarios(cfg, zoo, root):
    """The tables of the experiment matrix, in report order."""
    groups = cfg.experiment.scenarios
    out = []

    def eval_rng(table):
        return root.derive(Stage.EVAL, table_key(table))

    if "softmax" in groups:
        victim = ConfidenceScorer(SOFTMAX_RESPONSE, zoo.victim())
        out.append(Scenario("softmax_whitebox", victim))
        out.append(Scenario("softmax_blackbox", victim, source=zoo.proxy(), mode=BLACK_BOX))
    if "ensemble" in groups:
        for size in cfg.ensemble.sizes:
            out.append(Scenario(f"ensemble{size}_whitebox", _ensemble_scorer(zoo.ensemble(size))))
    if "ensemble_proxy" in groups:
        size = max(cfg.ensemble.sizes)
        victim = _ensemble_scorer(zoo.ensemble(size))
        out.append(Scenario(f"ensemble{size}_blackbox_matching", victim, source=zoo.proxy(), mode=BLACK_BOX))
        out.append(Scenario(f"ensemble{size}_blackbox_foreign", victim, source=zoo.foreign_proxy(), mode=BLACK_BOX))
    for group, kind in (("mc_entropy", MC_ENTROPY), ("mc_variance", MC_VARIANCE)):
        if group not in groups:
            continue
        model = zoo.mc_victim()
        for passes in cfg.mc.passes:
            scorers = {
                suffix: ConfidenceScorer(kind, model, passes=passes, rng=eval_rng(f"{group}{passes}_{suffix}"),
                                         variance_statistic=cfg.mc.variance_statistic)
                for suffix in ("direct", "indirect", "blackbox")
            }
            out.append(Scenario(f"{group}{passes}_direct", scorers["direct"]))
            out.append(Scenario(f"{group}{passes}_indirect", scorers["indirect"], source=model,
                                target=INDIRECT_SOFTMAX))
            # the proxy ensemble's softmax steers the attack; the victim only answers label queries
            out.append(Scenario(f"{group}{passes}_blackbox", scorers["blackbox"], source=zoo.proxy(),
                                mode=BLACK_BOX))
    if "selnet" in groups:
        model = zoo.selnet()
        scorer = ConfidenceScorer(SELECTOR_HEAD, model)
        out.append(Scenario("selnet_direct", scorer, selnet=model))
        out.append(Scenario("selnet_indirect", scorer, source=model, target=INDIRECT_SOFTMAX, selnet=model))
    return out


class ExperimentRunner:
    def __init__(self, cfg, workers=None, notify=None):
        # pin the master seed so it is part of the config hash
        self.cfg = cfg.updated(experiment={"seed": cfg.seed})
        self.seed = self.cfg.seed
        self.workers = workers or cfg.workers
        self.root = RngState(self.seed)
        self.notify = notify or (lambda message: None)

    def _say(self, message):
        logger.info(message)
        self.notify(message)

    def run(self, out_dir=None):
        cfg = self.cfg
        target = Path(out_dir) if out_dir is not None else cfg.output_dir / cfg.config_hash[:12]
        target.parent.mkdir(parents=True, exist_ok=True)
        staging = Path(tempfile.mkdtemp(prefix=f".{target.name}-", dir=target.parent))
        try:
            manifest = self._run_into(staging)
            if target.exists():
                shutil.rmtree(target)
            os.replace(staging, target)
        except BaseException:
            shutil.rmtree(staging, ignore_errors=True)
            raise
        self._say(f"wrote {len(manifest.files)} files to {target}")
        return manifest

    def _write(self, staging, manifest, relative, writer, *args):
        path = staging / relative
        path.parent.mkdir(parents=True, exist_ok=True)
        writer(*args, path)
        manifest.files.append(relative)

    def _run_into(self, staging):
        cfg = self.cfg
        manifest = RunManifest(config_hash=cfg.config_hash, name=cfg.experiment.name, seed=self.seed)
        with stage("data"):
            splits = gen_splits(cfg.dataset, self.root.seed_for(Stage.DATA))
        for name, data in splits.named().items():
            self._write(staging, manifest, f"data/{name}.csv", write_dataset_csv, data)
        self._say(f"data: {', '.join(f'{k}={len(v)}' for k, v in splits.named().items())}")

        zoo = ModelZoo(cfg, splits, self.root, self.workers)
        with stage("scenarios"):
            scenarios = build_scenarios(cfg, zoo, self.root)
        if not scenarios:
            raise ConfigurationError("no scenarios selected")
        for key, model in zoo.trained.items():
            models = model if isinstance(model, tuple) else (model,)
            for j, m in enumerate(models):
                suffix = f"_{j}" if isinstance(model, tuple) else ""
                self._write(staging, manifest, f"models/{key}{suffix}.model", save_model, m)
            accuracy = ", ".join(f"{m.train_accuracy:.4f}" for m in models)
            self._say(f"trained {key}: train accuracy {accuracy}")

        truth = None
        if cfg.attack.truth == "proxy":
            with stage("train"):
                truth = np.argmax(ensemble_probs(zoo.proxy(), splits.test.features), axis=-1)

        for scenario in scenarios:
            rows = self._run_scenario(scenario, splits, truth, staging, manifest)
            manifest.tables[scenario.table] = rows

        report_path = staging / "report.txt"
        report_path.write_text(report_table(manifest))
        (staging / "report.csv").write_text(report_csv(manifest))
        manifest.files.extend(["report.txt", "report.csv"])
        (staging / MANIFEST_NAME).write_text(manifest.to_json())
        return manifest

    def _attack_config(self, scenario, epsilon):
        a = self.cfg.attack
        return AttackConfig(epsilon=epsilon, epsilon_decay=a.epsilon_decay, max_iterations=a.max_iterations,
                            mode=scenario.mode, target=scenario.target, clamp_domain=a.clamp_domain)

    def _run_scenario(self, scenario, splits, truth, staging, manifest):
        table = scenario.table
        test = splits.test
        theta = None
        details = scenario.details()
        if scenario.selnet is not None:
            with stage("calibrate"):
                calibrated = calibrate_threshold(scenario.selnet, splits.validation, self.cfg.selnet.coverage)
            theta = calibrated.theta
            details.update(theta=float(theta), calibrated_coverage=calibrated.coverage)
        manifest.details[table] = details

        with stage("eval"):
            clean = score_dataset(scenario.scorer, test)
        test_coverage = None
        if theta is not None:
            # attacked rows are read at the coverage the clean test set reached at theta
            test_coverage = empirical_coverage(clean, theta)
            details["test_coverage"] = test_coverage
        rows, curves, attacked_items = [], [], {}
        grid = self.cfg.attack.grid()
        for index, epsilon in enumerate(grid):
            if epsilon == 0:
                items, summary = clean, None
            else:
                cfg = self._attack_config(scenario, epsilon)
                oracle = LabelOracle(scenario.scorer)
                with stage("attack"):
                    outcomes, summary = attack_dataset(
                        oracle, scenario.source, scenario.scorer, test, cfg,
                        rng=self.root.derive(Stage.ATTACK, table_key(table), index),
                        workers=self.workers, truth=truth)
                with stage("eval"):
                    items = score_dataset(scenario.scorer, test, np.stack([o.x_tilde for o in outcomes]))
            with stage("eval"):
                row = evaluate(
                    items, epsilon=epsilon,
                    effective_epsilon=0.0 if summary is None else summary.mean_effective_epsilon,
                    fixed_coverage=test_coverage,
                    mean_queries=summary.mean_queries if summary is not None and scenario.mode == BLACK_BOX else None,
                )
                curve = rc_curve(items)
            rows.append(row)
            curves.append((f"eps={epsilon:g}", curve))
            attacked_items[index] = items
            self._write(staging, manifest, f"rc/{table}/eps{index}.csv", write_rc_csv, curve)
            self._say(f"{table} eps={epsilon:g}: AURC x1000 {row.aurc_x1000:.2f}, "
                      f"accuracy {row.accuracy_percent:.2f}%, effective eps {row.effective_epsilon:.6g}")

        bins = self.cfg.output.bins
        last = len(grid) - 1
        labelled = [("clean", 0)] + ([(f"eps{last}", last)] if last > 0 else [])
        for label, index in labelled:
            hist = confidence_histograms(attacked_items[index], bins)
            self._write(staging, manifest, f"hist/{table}_{label}.csv", write_histogram_csv, hist)
        worst = worst_case_for(clean)
        self._write(staging, manifest, f"svg/{table}.svg",
                    lambda c, path: render_rc_svg(c, path, title=table), curves + [("worst case", worst, "worst")])
        self._write(staging, manifest, f"tables/{table}.csv", write_report_csv, rows)
        return rows


def run_experiment(cfg, out_dir=None, workers=None, notify=None):
    """Run every selected scenario over the epsilon grid; the clean row comes first in each table."""
    return ExperimentRunner(cfg, workers=workers, notify=notify).run(out_dir)
