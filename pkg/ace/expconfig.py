"""Experiment configuration files.

`key = value` lines under [section] headers, validated into pydantic models.
Every field has a default, and the defaults are the desk benchmark, so an
empty file is a valid config.
"""

import configparser
import hashlib
import json
import logging
from pathlib import Path
from typing import Annotated, Literal

from django.conf import settings
from pydantic import BeforeValidator, Field, ValidationError, field_validator, model_validator

from .datasets import DatasetSpec
from .exceptions import ConfigurationError
from .schema import FloatList, IntList, Section, describe, split_list

logger = logging.getLogger(__name__)

SCENARIO_GROUPS = ("softmax", "ensemble", "ensemble_proxy", "mc_entropy", "mc_variance", "selnet")
ScenarioGroup = Literal[SCENARIO_GROUPS]


class ExperimentSection(Section):
    name: str = "desk"
    seed: int | None = Field(None, ge=0, lt=2 ** 64)
    scenarios: Annotated[tuple[ScenarioGroup, ...], BeforeValidator(split_list)] = SCENARIO_GROUPS
    workers: int | None = Field(None, ge=1)


class VictimSection(Section):
    hidden: IntList = (32, 32)
    epochs: int = Field(30, ge=0)
    lr: float = Field(0.05, gt=0)
    batch: int = Field(32, ge=1)
    momentum: float = Field(0.0, ge=0, lt=1)
    dropout_rate: float | None = Field(None, ge=0, lt=1)

    @field_validator("hidden")
    @classmethod
    def _positive_widths(cls, value):
        if not value or any(w < 1 for w in value):
            raise ValueError("hidden widths must be positive and non-empty")
        return value


class ProxySection(Section):
    size: int = Field(5, ge=1)
    hidden: IntList = (32, 32)
    foreign_hidden: IntList = (64,)
    disjoint_data: bool = False


class EnsembleSection(Section):
    sizes: IntList = (1, 3, 5)

    @field_validator("sizes")
    @classmethod
    def _sizes(cls, value):
        if not value or any(m < 1 for m in value):
            raise ValueError("ensemble sizes must be positive")
        return tuple(sorted(set(value)))


class MCSection(Section):
    passes: IntList = (10, 30)
    variance_statistic: Literal["label", "vector"] = "label"

    @field_validator("passes")
    @classmethod
    def _passes(cls, value):
        if not value or any(n < 2 for n in value):
            raise ValueError("MC pass counts must be at least 2")
        return tuple(sorted(set(value)))


class SelNetSection(Section):
    coverage: float = Field(0.7, gt=0, le=1)
    constraint_weight: float = Field(32.0, gt=0)
    aux_mix: float = Field(0.5, ge=0, le=1)
    selector_hidden: int = Field(16, ge=1)


class ScorerSection(Section):
    kind: Literal["softmax_response", "ensemble_mean_softmax", "mc_entropy", "mc_variance",
                  "selector_head"] = "softmax_response"
    passes: int = Field(10, ge=1)


class AttackSection(Section):
    epsilons: FloatList = (0.01, 0.05, 0.2)
    epsilon_decay: float = Field(0.5, gt=0, lt=1)
    max_iterations: int = Field(15, ge=1)
    mode: Literal["white_box", "black_box"] = "white_box"
    target: Literal["direct", "indirect_softmax"] = "direct"
    clamp_low: float | None = None
    clamp_high: float | None = None
    truth: Literal["ground", "proxy"] = "ground"

    @field_validator("epsilons")
    @classmethod
    def _epsilons(cls, value):
        if any(not 0 <= e < float("inf") for e in value):
            raise ValueError("epsilons must be finite and non-negative")
        return value

    @model_validator(mode="after")
    def _clamp(self):
        if (self.clamp_low is None) != (self.clamp_high is None):
            raise ValueError("set both clamp_low and clamp_high, or neither")
        if self.clamp_low is not None and self.clamp_low > self.clamp_high:
            raise ValueError("clamp_low exceeds clamp_high")
        return self

    @property
    def clamp_domain(self):
        return None if self.clamp_low is None else (self.clamp_low, self.clamp_high)

    def grid(self):
        """The epsilon grid with the clean baseline first, ascending."""
        return tuple(sorted({0.0, *self.epsilons}))


class OutputSection(Section):
    directory: str | None = None
    bins: int = Field(20, ge=1)


class ExperimentConfig(Section):
    experiment: ExperimentSection = ExperimentSection()
    dataset: DatasetSpec = DatasetSpec()
    victim: VictimSection = VictimSection()
    proxy: ProxySection = ProxySection()
    ensemble: EnsembleSection = EnsembleSection()
    mc: MCSection = MCSection()
    selnet: SelNetSection = SelNetSection()
    scorer: ScorerSection = ScorerSection()
    attack: AttackSection = AttackSection()
    output: OutputSection = OutputSection()

    @property
    def seed(self):
        return settings.ACE_MASTER_SEED if self.experiment.seed is None else self.experiment.seed

    @property
    def workers(self):
        return settings.ACE_WORKERS if self.experiment.workers is None else self.experiment.workers

    @property
    def mc_dropout_rate(self):
        rate = self.victim.dropout_rate
        return settings.ACE_MC_DROPOUT_RATE if rate is None else rate

    @property
    def output_dir(self):
        return Path(self.output.directory or settings.ACE_OUTPUT_DIR)

    def canonical(self):
        """Sorted-key JSON of everything that can change a result."""
        data = self.model_dump(mode="json", exclude={"experiment": {"workers"}, "output": {"directory"}})
        return json.dumps(data, sort_keys=True, separators=(",", ":"))

    @property
    def config_hash(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def updated(self, **sections):
        """Copy with some fields replaced: updated(attack={"mode": "black_box"})."""
        data = self.model_dump()
        for name, values in sections.items():
            data[name].update({k: v for k, v in values.items() if v is not None})
        return ExperimentConfig.build(**data)


def parse_config(text, source="<string>"):
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigurationError(f"{source}: {exc}") from exc
    known = set(ExperimentConfig.model_fields)
    unknown = [s for s in parser.sections() if s not in known]
    if unknown:
        raise ConfigurationError(f"{source}: unknown section(s) {', '.join(unknown)}")
    # blank values fall back to the defaults
    data = {name: {k: v for k, v in parser[name].items() if v.strip()} for name in parser.sections()}
    try:
        config = ExperimentConfig(**data)
    except ValidationError as exc:
        raise ConfigurationError(f"{source}: {describe(exc)}") from exc
    logger.debug("loaded config %s (%s)", source, config.config_hash[:12])
    return config


def load_config(path=None):
    """Read a config file; no path gives the defaults."""
    if path is None:
        return ExperimentConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, source=str(path))
