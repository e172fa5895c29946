"""SelectiveNet-style classifier: shared backbone, prediction / selector / auxiliary heads."""

import logging
from dataclasses import dataclass, field

import numpy as np

from .engine import (
    Dense, LayerSpec, SoftmaxHead, TrainHyper, _Layer, _onehot, as_input,
    backprop_layers, check_chain, cross_entropy, head_logit_grads, init_layers, minibatches, run_layers,
    sgd_step, softmax,
)
from .exceptions import DimensionError, DomainError, TrainingError
from .rng import RngState

logger = logging.getLogger(__name__)


def sigmoid(a):
    return np.exp(-np.logaddexp(0.0, -np.asarray(a, dtype=np.float64)))


@dataclass(frozen=True)
class SelNetSpecs:
    backbone: tuple
    prediction: LayerSpec
    selector: tuple
    auxiliary: LayerSpec

    @classmethod
    def build(cls, in_dim, hidden, class_count, selector_hidden=16):
        dims = [in_dim, *hidden]
        if len(dims) < 2:
            raise DimensionError("the backbone needs at least one hidden layer")
        feat = dims[-1]
        return cls(
            backbone=tuple(LayerSpec(a, b, "relu") for a, b in zip(dims[:-1], dims[1:])),
            prediction=LayerSpec(feat, class_count, "identity"),
            selector=(LayerSpec(feat, selector_hidden, "relu"), LayerSpec(selector_hidden, 1, "identity")),
            auxiliary=LayerSpec(feat, class_count, "identity"),
        )

    def groups(self):
        return (self.backbone, (self.prediction,), self.selector, (self.auxiliary,))


@dataclass(frozen=True, eq=False)
class SelNetParams:
    backbone: tuple
    prediction: Dense
    selector: tuple
    auxiliary: Dense
    class_count: int
    seed: int | None = None
    train_accuracy: float | None = None
    train_coverage: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "backbone", tuple(self.backbone))
        object.__setattr__(self, "selector", tuple(self.selector))
        check_chain(self.backbone)
        check_chain(self.selector)
        feat = self.backbone[-1].spec.out_dim
        for head in (self.prediction, self.selector[0], self.auxiliary):
            if head.spec.in_dim != feat:
                raise DimensionError(f"head input {head.spec.in_dim} does not match backbone output {feat}")
        if self.selector[-1].spec.out_dim != 1:
            raise DimensionError("the selector head must end in a single unit")
        for head in (self.prediction, self.auxiliary):
            if head.spec.out_dim != self.class_count:
                raise DimensionError("prediction and auxiliary heads must emit class_count logits")

    @classmethod
    def from_layers(cls, groups, class_count, **extra):
        backbone, (prediction,), selector, (auxiliary,) = groups
        return cls(backbone=backbone, prediction=prediction, selector=selector, auxiliary=auxiliary,
                   class_count=class_count, **extra)

    @property
    def in_dim(self):
        return self.backbone[0].spec.in_dim

    @property
    def specs(self):
        return SelNetSpecs(
            backbone=tuple(l.spec for l in self.backbone),
            prediction=self.prediction.spec,
            selector=tuple(l.spec for l in self.selector),
            auxiliary=self.auxiliary.spec,
        )

    def groups(self):
        return (self.backbone, (self.prediction,), self.selector, (self.auxiliary,))


@dataclass(frozen=True, eq=False)
class SelNetTrace:
    backbone: object
    prediction: object
    selector: object
    auxiliary: object
    selector_value: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class SelNetTrainConfig:
    target_coverage: float = 0.7
    constraint_weight: float = 32.0
    aux_mix: float = 0.5
    hyper: TrainHyper = TrainHyper()

    def __post_init__(self):
        if not 0.0 < self.target_coverage <= 1.0:
            raise DomainError(f"target coverage must be in (0, 1], got {self.target_coverage}")
        if self.constraint_weight <= 0:
            raise DomainError("constraint weight must be positive")
        if not 0.0 <= self.aux_mix <= 1.0:
            raise DomainError("aux mix must be in [0, 1]")


def _run(groups, x):
    backbone, prediction, selector, auxiliary = groups
    feats, tb = run_layers(backbone, x)
    _, tp = run_layers(prediction, feats)
    a, ts = run_layers(selector, feats)
    _, ta = run_layers(auxiliary, feats)
    return SelNetTrace(backbone=tb, prediction=tp, selector=ts, auxiliary=ta, selector_value=sigmoid(a[..., 0]))


def selnet_trace(params, x):
    return _run(params.groups(), as_input(x, params.in_dim))


def selnet_forward(params, x):
    """(prediction probabilities, selector value, auxiliary probabilities)."""
    trace = selnet_trace(params, x)
    return softmax(trace.prediction.logits), trace.selector_value, softmax(trace.auxiliary.logits)


def selnet_predict(params, x):
    trace = selnet_trace(params, x)
    return np.argmax(trace.prediction.logits, axis=-1)


@dataclass(frozen=True)
class SelectorHead:
    """The sigmoid selector output."""


def selnet_input_gradient(params, x, head):
    """Gradient of the selector, or of a prediction-head softmax probability, wrt the input."""
    x = as_input(x, params.in_dim)
    trace = _run(params.groups(), x)
    if isinstance(head, SelectorHead):
        s = trace.selector_value
        g_feat, _ = backprop_layers(params.selector, trace.selector, (s * (1.0 - s))[..., None])
    elif isinstance(head, SoftmaxHead):
        grad_logits = head_logit_grads(_PredictionView(params), head, trace.prediction)
        g_feat, _ = backprop_layers((params.prediction,), trace.prediction, grad_logits)
    else:
        raise DomainError(f"selnet has no head {head!r}")
    grad, _ = backprop_layers(params.backbone, trace.backbone, g_feat)
    return grad


@dataclass(frozen=True)
class _PredictionView:
    params: SelNetParams

    @property
    def class_count(self):
        return self.params.class_count


def selnet_train(specs, data, cfg):
    """Train toward a target coverage.

    Per batch: L = a * (sum(l*s)/sum(s) + lam * max(0, c - mean(s))**2) + (1 - a) * CE(aux).
    """
    hyper = cfg.hyper
    features = as_input(data.features, specs.backbone[0].in_dim)
    labels = np.asarray(data.labels, dtype=np.int64)
    if len(labels) == 0:
        raise DomainError("cannot train on an empty dataset")
    class_count = specs.prediction.out_dim
    generator = RngState(hyper.seed).generator()
    groups = []
    for group in specs.groups():
        weights, biases = init_layers(group, generator)
        groups.append([_Layer(s, w, b) for s, w, b in zip(group, weights, biases)])
    flat = [layer for group in groups for layer in group]
    velocity = [[np.zeros_like(l.weight), np.zeros_like(l.bias)] for l in flat]
    onehot = _onehot(labels, class_count)
    c, lam, alpha = cfg.target_coverage, cfg.constraint_weight, cfg.aux_mix

    for epoch in range(1, hyper.epochs + 1):
        for idx in minibatches(len(labels), hyper.batch, generator):
            n = len(idx)
            with np.errstate(over="ignore", invalid="ignore"):
                trace = _run(groups, features[idx])
                s = trace.selector_value
                probs = softmax(trace.prediction.logits)
                aux = softmax(trace.auxiliary.logits)
                ce = cross_entropy(probs, labels[idx])
                ce_aux = cross_entropy(aux, labels[idx])
                total_s = s.sum()
                risk = (ce * s).sum() / total_s
                gap = max(0.0, c - s.mean())
                loss = alpha * (risk + lam * gap ** 2) + (1.0 - alpha) * ce_aux.mean()
            if not np.isfinite(loss):
                raise TrainingError("selnet training diverged: non-finite loss", epoch)

            d_s = alpha * ((ce - risk) / total_s - 2.0 * lam * gap / n)
            d_pred = (alpha * s / total_s)[:, None] * (probs - onehot[idx])
            d_aux = (1.0 - alpha) / n * (aux - onehot[idx])
            d_sel = (d_s * s * (1.0 - s))[:, None]

            backbone, prediction, selector, auxiliary = groups
            g_feat = 0.0
            head_grads = []
            for layers, head_trace, grad in ((prediction, trace.prediction, d_pred),
                                             (selector, trace.selector, d_sel),
                                             (auxiliary, trace.auxiliary, d_aux)):
                g, grads = backprop_layers(layers, head_trace, grad, need_params=True)
                g_feat = g_feat + g
                head_grads.append(grads)
            _, backbone_grads = backprop_layers(backbone, trace.backbone, g_feat, need_params=True)
            grads = backbone_grads + head_grads[0] + head_grads[1] + head_grads[2]
            sgd_step(flat, grads, velocity, hyper)
        logger.debug("selnet epoch %d loss %.6f", epoch, loss if hyper.epochs else float("nan"))

    frozen = [tuple(Dense(l.spec, l.weight, l.bias) for l in group) for group in groups]
    params = SelNetParams.from_layers(frozen, class_count, seed=hyper.seed)
    probs, selector_value, _ = selnet_forward(params, features)
    accuracy = float(np.mean(np.argmax(probs, axis=-1) == labels))
    coverage = float(np.mean(selector_value > 0.5))
    logger.info("trained selnet seed=%d target coverage %.2f: train accuracy %.4f, coverage@0.5 %.4f",
                hyper.seed, c, accuracy, coverage)
    return SelNetParams.from_layers(frozen, class_count, seed=hyper.seed,
                                    train_accuracy=accuracy, train_coverage=coverage)


@dataclass(frozen=True)
class CalibratedThreshold:
    theta: float
    coverage: float


def threshold_for_coverage(scores, c):
    """Largest achievable coverage (fraction with score > theta) not exceeding c.

    Tied scores are covered or rejected together.
    """
    s = np.sort(np.asarray(scores, dtype=np.float64))[::-1]
    n = len(s)
    if n == 0:
        raise DomainError("cannot calibrate on an empty set")
    ends = [k for k in range(1, n + 1) if k == n or s[k - 1] != s[k]]
    limit = c * n + 1e-9
    k = max([0] + [e for e in ends if e <= limit])
    if k == n:
        theta = float(np.nextafter(s[-1], -np.inf))
    elif k == 0:
        theta = float(s[0])
    else:
        theta = float(s[k])
    return CalibratedThreshold(theta=theta, coverage=k / n)


def calibrate_threshold(params, validation, c):
    _, scores, _ = selnet_forward(params, validation.features)
    result = threshold_for_coverage(scores, c)
    logger.info("calibrated selector threshold %.6g for coverage %.3f (achieved %.4f)", result.theta, c, result.coverage)
    return result
