"""Synthetic labeled datasets: Gaussian blobs, concentric rings, label noise."""

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import Field, model_validator

from .exceptions import ConfigurationError, DimensionError, DomainError
from .rng import RngState, Stage
from .schema import Section

logger = logging.getLogger(__name__)

SPLITS = ("train", "validation", "test", "proxy", "pool")


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    features: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)
    split: str = "train"
    class_count: int = 2

    def __post_init__(self):
        features = np.array(self.features, dtype=np.float64)
        labels = np.array(self.labels, dtype=np.int64)
        if features.ndim != 2 or len(features) != len(labels):
            raise DimensionError(f"features {features.shape} do not match {len(labels)} labels")
        if not np.all(np.isfinite(features)):
            raise DomainError("dataset features contain NaN or Inf")
        if labels.size and (labels.min() < 0 or labels.max() >= self.class_count):
            raise DomainError(f"labels out of range for {self.class_count} classes")
        if self.split not in SPLITS:
            raise DomainError(f"unknown split {self.split!r}")
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.labels)

    @property
    def dimensions(self):
        return self.features.shape[1]

    def subset(self, rows, split=None):
        return LabeledDataset(self.features[rows], self.labels[rows], split or self.split, self.class_count)

    def with_features(self, features):
        return LabeledDataset(features, self.labels, self.split, self.class_count)


class DatasetSpec(Section):
    """Generator settings. Defaults are the desk benchmark."""

    kind: Literal["blobs", "rings"] = "blobs"
    n_train: int = Field(4000, ge=1)
    n_validation: int = Field(1000, ge=0)
    n_test: int = Field(2000, ge=1)
    n_proxy: int = Field(0, ge=0)
    dimensions: int = Field(2, ge=1)
    classes: int = Field(4, ge=2)
    margin: float = Field(2.5, gt=0)
    spread: float = Field(1.0, gt=0)
    noise: float = Field(0.1, ge=0, le=1)
    standardize: bool = True

    @model_validator(mode="after")
    def _check_shape(self):
        if self.total < self.classes:
            raise ValueError(f"need at least as many samples ({self.total}) as classes ({self.classes})")
        if self.kind == "rings" and (self.classes != 2 or self.dimensions < 2):
            raise ValueError("rings need exactly 2 classes and at least 2 dimensions")
        return self

    @property
    def total(self):
        return self.n_train + self.n_validation + self.n_test + self.n_proxy


def blob_centers(classes, dimensions, margin):
    """Adjacent centers sit 2*margin apart: on a circle in the first two axes, or a line in 1-D."""
    if dimensions == 1:
        return ((np.arange(classes) - (classes - 1) / 2.0) * 2.0 * margin)[:, None]
    radius = margin / np.sin(np.pi / classes)
    angles = 2.0 * np.pi * np.arange(classes) / classes
    centers = np.zeros((classes, dimensions))
    centers[:, 0] = radius * np.cos(angles)
    centers[:, 1] = radius * np.sin(angles)
    return centers


def _balanced_labels(n, classes, generator):
    return generator.permutation(np.arange(n) % classes)


def _blobs(spec, n, generator):
    labels = _balanced_labels(n, spec.classes, generator)
    centers = blob_centers(spec.classes, spec.dimensions, spec.margin)
    features = centers[labels] + spec.spread * generator.standard_normal((n, spec.dimensions))
    return features, labels


def _rings(spec, n, generator):
    labels = _balanced_labels(n, 2, generator)
    radius = spec.margin * (1.0 + labels)
    angle = generator.uniform(0.0, 2.0 * np.pi, n)
    features = spec.spread * generator.standard_normal((n, spec.dimensions))
    features[:, 0] += radius * np.cos(angle)
    features[:, 1] += radius * np.sin(angle)
    return features, labels


def flip_labels(labels, rate, classes, generator):
    """Move exactly round(rate * n) labels, chosen uniformly, to a different class."""
    labels = np.array(labels, dtype=np.int64)
    count = int(round(rate * len(labels)))
    rows = generator.choice(len(labels), size=count, replace=False)
    labels[rows] = (labels[rows] + generator.integers(1, classes, size=count)) % classes
    return labels


def gen_dataset(spec, seed, n=None, split="pool"):
    """`n` samples (default: every split's worth) from the generator named by `spec`."""
    if not isinstance(spec, DatasetSpec):
        raise ConfigurationError("gen_dataset needs a DatasetSpec")
    n = spec.total if n is None else n
    if n < spec.classes:
        raise ConfigurationError(f"need at least {spec.classes} samples, got {n}")
    root = RngState(seed)
    generator = root.derive(Stage.DATA).generator()
    features, labels = (_blobs if spec.kind == "blobs" else _rings)(spec, n, generator)
    if spec.noise > 0:
        labels = flip_labels(labels, spec.noise, spec.classes, root.derive(Stage.LABEL_NOISE).generator())
    return LabeledDataset(features, labels, split, spec.classes)


@dataclass(frozen=True)
class Splits:
    train: LabeledDataset
    validation: LabeledDataset
    test: LabeledDataset
    proxy: LabeledDataset | None
    mean: np.ndarray = field(repr=False)
    scale: np.ndarray = field(repr=False)

    def named(self):
        out = {"train": self.train, "validation": self.validation, "test": self.test}
        if self.proxy is not None:
            out["proxy"] = self.proxy
        return out


def gen_splits(spec, seed):
    """One generated pool cut into disjoint splits.

    With `spec.standardize` every split is scaled by the train split's moments;
    otherwise features keep the generator's raw units.
    """
    pool = gen_dataset(spec, seed)
    if spec.standardize:
        mean = pool.features[:spec.n_train].mean(axis=0)
        scale = pool.features[:spec.n_train].std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
    else:
        mean = np.zeros(spec.dimensions)
        scale = np.ones(spec.dimensions)
    standard = (pool.features - mean) / scale
    bounds = np.cumsum([0, spec.n_train, spec.n_validation, spec.n_test, spec.n_proxy])
    parts = {}
    for name, lo, hi in zip(("train", "validation", "test", "proxy"), bounds[:-1], bounds[1:]):
        parts[name] = LabeledDataset(standard[lo:hi], pool.labels[lo:hi], name, spec.classes) if hi > lo else None
    if parts["validation"] is None:
        raise ConfigurationError("n_validation must be positive to build the splits")
    logger.info("generated %s: %s", spec.kind, ", ".join(f"{k}={hi - lo}" for k, lo, hi in
                                                       zip(("train", "validation", "test", "proxy"), bounds[:-1], bounds[1:])))
    return Splits(mean=mean, scale=scale, **parts)


def write_dataset_csv(data, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["label"] + [f"f{j}" for j in range(data.dimensions)])
        for label, row in zip(data.labels, data.features):
            writer.writerow([int(label)] + ["%.17g" % v for v in row])


def read_dataset_csv(path, split="train", class_count=None):
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = list(reader)
    except (OSError, StopIteration) as exc:
        raise ConfigurationError(f"cannot read dataset {path}: {exc}") from exc
    if not header or header[0] != "label" or header[1:] != [f"f{j}" for j in range(len(header) - 1)]:
        raise ConfigurationError(f"{path}: expected header label,f0,f1,...")
    try:
        labels = np.array([int(r[0]) for r in rows], dtype=np.int64)
        features = np.array([[float(v) for v in r[1:]] for r in rows], dtype=np.float64).reshape(len(rows), len(header) - 1)
    except ValueError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    if class_count is None:
        class_count = max(2, int(labels.max()) + 1 if labels.size else 2)
    return LabeledDataset(features, labels, split, class_count)


def read_splits(directory, class_count=None):
    """Splits previously written by write_dataset_csv into `directory` (train.csv, validation.csv, ...)."""
    directory = Path(directory)
    parts = {}
    for name in ("train", "validation", "test", "proxy"):
        path = directory / f"{name}.csv"
        parts[name] = read_dataset_csv(path, split=name, class_count=class_count) if path.exists() else None
    if parts["train"] is None:
        raise ConfigurationError(f"{directory}: no train.csv")
    if class_count is None:
        # the largest label seen in any split fixes the class count
        class_count = max(d.class_count for d in parts.values() if d is not None)
        parts = {k: None if d is None else LabeledDataset(d.features, d.labels, k, class_count)
                 for k, d in parts.items()}
    d = parts["train"].dimensions
    return Splits(mean=np.zeros(d), scale=np.ones(d), **parts)
