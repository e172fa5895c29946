"""Confidence scores kappa(x, y_hat | f) and their input gradients.

Every score is oriented so that larger means more confident: predictive
entropy and pass variance are returned negated. Only the ranking a score
induces is used downstream, so no normalization is promised.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .engine import (
    EntropyHead, NetworkParams, SoftmaxHead, VarianceHead, _labels, as_input, draw_masks,
    forward, head_value, input_gradient, predict, run_layers, softmax,
)
from .exceptions import ConfigurationError, DimensionError, NumericError
from .rng import RngState
from .selnet import SelectorHead, SelNetParams, selnet_forward, selnet_input_gradient, selnet_predict

logger = logging.getLogger(__name__)

SOFTMAX_RESPONSE = "softmax_response"
ENSEMBLE_MEAN_SOFTMAX = "ensemble_mean_softmax"
MC_ENTROPY = "mc_entropy"
MC_VARIANCE = "mc_variance"
SELECTOR_HEAD = "selector_head"

KINDS = (SOFTMAX_RESPONSE, ENSEMBLE_MEAN_SOFTMAX, MC_ENTROPY, MC_VARIANCE, SELECTOR_HEAD)
MC_KINDS = (MC_ENTROPY, MC_VARIANCE)
VARIANCE_STATISTICS = ("label", "vector")

# rows per MC scoring chunk; N passes of every row are held at once
MC_CHUNK = 128


def _scalar(value):
    value = np.asarray(value)
    return float(value) if value.ndim == 0 else value


def _pick(probs, label, class_count):
    labels = _labels(label, probs.shape[:-1], class_count)
    return np.take_along_axis(probs, labels[..., None], axis=-1)[..., 0]


def kappa_softmax(f, x, label):
    """Softmax response of `label` on the dropout-disabled pass."""
    logits, _ = forward(f, x)
    return _scalar(_pick(softmax(logits), label, f.class_count))


def check_ensemble(models):
    models = tuple(models)
    if len(models) < 2:
        raise ConfigurationError(f"an ensemble needs at least 2 members, got {len(models)}")
    if not all(isinstance(m, NetworkParams) for m in models):
        raise ConfigurationError("ensemble members must be plain classifiers")
    if len({m.class_count for m in models}) != 1:
        raise ConfigurationError("ensemble members disagree on class_count")
    if len({m.in_dim for m in models}) != 1:
        raise ConfigurationError("ensemble members disagree on input dimension")
    return models


def ensemble_probs(models, x):
    return np.mean(np.stack([softmax(forward(m, x)[0]) for m in models]), axis=0)


def kappa_ensemble(models, x, label):
    """Mean over members of the softmax response at `label`."""
    models = check_ensemble(models)
    return _scalar(_pick(ensemble_probs(models, x), label, models[0].class_count))


def mc_traces(f, x, passes, rng, indices=None):
    """Traces of `passes` dropout-enabled forward passes.

    A single sample draws its masks from `rng`; row i of a batch draws from
    rng.derive(indices[i]), so a row scored in a batch sees exactly the masks
    it would see alone under rng.derive(index).
    """
    x = as_input(x, f.in_dim)
    if passes < 1:
        raise ConfigurationError(f"MC scoring needs at least one pass, got {passes}")
    if rng is None:
        raise ConfigurationError("MC scoring needs an rng")
    if x.ndim == 1:
        drawn = draw_masks(f.layers, (passes,), rng)
        masks = [tuple(None if m is None else m[k] for m in drawn) for k in range(passes)]
    elif x.ndim == 2:
        if indices is None:
            indices = range(len(x))
        per_row = [draw_masks(f.layers, (passes,), rng.derive(int(i))) for i in indices]
        if len(per_row) != len(x):
            raise DimensionError("need one sample index per row")
        masks = []
        for k in range(passes):
            masks.append(tuple(
                None if per_row[0][l] is None else np.stack([row[l][k] for row in per_row])
                for l in range(len(f.layers))
            ))
    else:
        raise DimensionError(f"MC scoring takes one sample or a batch, got shape {x.shape}")
    return [run_layers(f.layers, x, m)[1] for m in masks]


def pass_probabilities(traces):
    return np.stack([softmax(t.logits) for t in traces])


def kappa_mc_entropy(f, x, N, rng, indices=None):
    """-H of the mean softmax over N dropout passes."""
    traces = mc_traces(f, x, N, rng, indices)
    return _scalar(head_value(f, EntropyHead(), traces))


def kappa_mc_variance(f, x, N, rng, label=None, statistic="label", indices=None):
    """-(population variance over N passes) of the label probability.

    `label` defaults to the dropout-disabled prediction.
    """
    if N < 2:
        raise ConfigurationError(f"variance over passes needs N >= 2, got {N}")
    if statistic not in VARIANCE_STATISTICS:
        raise ConfigurationError(f"unknown variance statistic {statistic!r}")
    if label is None:
        label = predict(f, x)
    traces = mc_traces(f, x, N, rng, indices)
    return _scalar(head_value(f, VarianceHead(label, statistic), traces))


def kappa_selector(selnet, x):
    if not isinstance(selnet, SelNetParams):
        raise ConfigurationError("the selector score needs a selnet model")
    _, selector, _ = selnet_forward(selnet, x)
    return _scalar(selector)


@dataclass(frozen=True, eq=False)
class ScoreBatch:
    predicted: np.ndarray
    kappa: np.ndarray
    probs: np.ndarray = field(repr=False)


@dataclass(frozen=True, eq=False)
class ConfidenceScorer:
    """Which kappa is computed, over which models.

    MC kinds keep `rng` as the root of their per-sample mask streams.
    """
    kind: str
    models: tuple
    passes: int = 1
    rng: RngState | None = None
    variance_statistic: str = "label"

    def __post_init__(self):
        models = (self.models,) if isinstance(self.models, (NetworkParams, SelNetParams)) else tuple(self.models)
        object.__setattr__(self, "models", models)
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown scorer kind {self.kind!r}")
        if not models:
            raise ConfigurationError("a scorer needs at least one model")
        if self.kind == ENSEMBLE_MEAN_SOFTMAX:
            check_ensemble(models)
            return
        if len(models) != 1:
            raise ConfigurationError(f"{self.kind} scores a single model, got {len(models)}")
        model = models[0]
        if self.kind == SELECTOR_HEAD:
            if not isinstance(model, SelNetParams):
                raise ConfigurationError("the selector score needs a selnet model")
            return
        if not isinstance(model, NetworkParams):
            raise ConfigurationError(f"{self.kind} needs a plain classifier")
        if self.kind in MC_KINDS:
            if not model.has_dropout:
                raise ConfigurationError("MC scoring needs a model with dropout")
            if self.rng is None:
                raise ConfigurationError("MC scoring needs an rng")
            minimum = 2 if self.kind == MC_VARIANCE else 1
            if self.passes < minimum:
                raise ConfigurationError(f"{self.kind} needs at least {minimum} passes, got {self.passes}")
            if self.variance_statistic not in VARIANCE_STATISTICS:
                raise ConfigurationError(f"unknown variance statistic {self.variance_statistic!r}")

    @property
    def victim(self):
        return self.models[0]

    @property
    def class_count(self):
        return self.victim.class_count

    @property
    def in_dim(self):
        return self.victim.in_dim

    @property
    def is_mc(self):
        return self.kind in MC_KINDS

    def predict(self, x):
        """Predicted labels. MC kinds use the dropout-disabled pass."""
        if self.kind == ENSEMBLE_MEAN_SOFTMAX:
            return np.argmax(ensemble_probs(self.models, x), axis=-1)
        if self.kind == SELECTOR_HEAD:
            return selnet_predict(self.victim, x)
        return predict(self.victim, x)

    def _mc_head(self, labels):
        if self.kind == MC_ENTROPY:
            return EntropyHead()
        return VarianceHead(labels, self.variance_statistic)

    def evaluate(self, x, indices=None):
        """Predicted labels, kappa and probability vectors for a batch."""
        x = as_input(x, self.in_dim)
        if x.ndim != 2:
            raise DimensionError(f"evaluate takes a batch, got shape {x.shape}")
        if self.kind == SOFTMAX_RESPONSE:
            probs = softmax(forward(self.victim, x)[0])
        elif self.kind == ENSEMBLE_MEAN_SOFTMAX:
            probs = ensemble_probs(self.models, x)
        elif self.kind == SELECTOR_HEAD:
            probs, selector, _ = selnet_forward(self.victim, x)
            return ScoreBatch(predicted=np.argmax(probs, axis=-1), kappa=selector, probs=probs)
        else:
            return self._evaluate_mc(x, indices)
        predicted = np.argmax(probs, axis=-1)
        return ScoreBatch(predicted=predicted, kappa=_pick(probs, predicted, self.class_count), probs=probs)

    def _evaluate_mc(self, x, indices):
        indices = np.arange(len(x)) if indices is None else np.asarray(indices)
        predicted, kappa, probs = [], [], []
        for start in range(0, len(x), MC_CHUNK):
            rows = slice(start, start + MC_CHUNK)
            labels = predict(self.victim, x[rows])
            traces = mc_traces(self.victim, x[rows], self.passes, self.rng, indices[rows])
            predicted.append(labels)
            kappa.append(head_value(self.victim, self._mc_head(labels), traces))
            probs.append(pass_probabilities(traces).mean(axis=0))
        if not predicted:
            k = self.class_count
            return ScoreBatch(np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros((0, k)))
        return ScoreBatch(np.concatenate(predicted), np.concatenate(kappa), np.concatenate(probs))

    def kappa(self, x, label=None, indices=None):
        """kappa at `label` (default: the predicted label)."""
        if label is None:
            label = self.predict(x)
        if self.kind == SOFTMAX_RESPONSE:
            return kappa_softmax(self.victim, x, label)
        if self.kind == ENSEMBLE_MEAN_SOFTMAX:
            return kappa_ensemble(self.models, x, label)
        if self.kind == SELECTOR_HEAD:
            return kappa_selector(self.victim, x)
        if self.kind == MC_ENTROPY:
            return kappa_mc_entropy(self.victim, x, self.passes, self.rng, indices)
        return kappa_mc_variance(self.victim, x, self.passes, self.rng, label, self.variance_statistic, indices)


def _mean_softmax_gradient(models, x, label):
    return np.mean(np.stack([input_gradient(m, x, SoftmaxHead(label)) for m in models]), axis=0)


def confidence_gradient(scorer, gradient_source, x, label, rng=None, indices=None):
    """Analytic input gradient of the scalar the attacker differentiates.

    gradient_source None: the scorer's own kappa. MC kinds draw fresh masks
    from `rng` (default: the scorer's rng) and differentiate through all
    replayed passes.
    A SelNetParams: softmax response of its prediction head.
    Otherwise one or more plain models: their mean softmax response.
    """
    x = as_input(x, scorer.in_dim if gradient_source is None else _source_in_dim(gradient_source))
    if gradient_source is None:
        grad = _direct_gradient(scorer, x, label, rng, indices)
    elif isinstance(gradient_source, SelNetParams):
        grad = selnet_input_gradient(gradient_source, x, SoftmaxHead(label))
    else:
        models = (gradient_source,) if isinstance(gradient_source, NetworkParams) else tuple(gradient_source)
        grad = _mean_softmax_gradient(models, x, label)
    if not np.all(np.isfinite(grad)):
        raise NumericError("non-finite confidence gradient")
    return grad


def _source_in_dim(source):
    if isinstance(source, (NetworkParams, SelNetParams)):
        return source.in_dim
    return tuple(source)[0].in_dim


def _direct_gradient(scorer, x, label, rng, indices):
    victim = scorer.victim
    if scorer.kind == SOFTMAX_RESPONSE:
        return input_gradient(victim, x, SoftmaxHead(label))
    if scorer.kind == ENSEMBLE_MEAN_SOFTMAX:
        return _mean_softmax_gradient(scorer.models, x, label)
    if scorer.kind == SELECTOR_HEAD:
        return selnet_input_gradient(victim, x, SelectorHead())
    traces = mc_traces(victim, x, scorer.passes, rng if rng is not None else scorer.rng, indices)
    return input_gradient(victim, x, scorer._mc_head(label), dropout_replay=traces)


def kappa_signed_gradient(scorer, gradient_source, x, label, rng=None, indices=None):
    """eta = sign of the gradient; zero coordinates stay zero."""
    return np.sign(confidence_gradient(scorer, gradient_source, x, label, rng, indices)) + 0.0


@dataclass(frozen=True, eq=False)
class ScoredItem:
    index: int
    label: int
    predicted: int
    kappa: float
    probs: np.ndarray = field(repr=False)
    loss01: int = 0

    def __post_init__(self):
        object.__setattr__(self, "loss01", int(self.predicted != self.label))


def score_dataset(scorer, data, features=None):
    """Score every sample of `data`; `features` replaces the inputs (e.g. attacked copies)."""
    x = data.features if features is None else features
    batch = scorer.evaluate(x, indices=np.arange(len(data.labels)))
    items = [
        ScoredItem(index=i, label=int(y), predicted=int(p), kappa=float(k), probs=pr)
        for i, (y, p, k, pr) in enumerate(zip(data.labels, batch.predicted, batch.kappa, batch.probs))
    ]
    logger.debug("scored %d samples with %s", len(items), scorer.kind)
    return items
