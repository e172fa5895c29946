"""Feed-forward classifier engine.

Dense layers with ReLU or identity activations, inverted dropout, exact
reverse-mode gradients with respect to the input, and plain minibatch SGD.
Everything is float64.

Affine maps are computed as a broadcast multiply followed by a sum over the
input axis instead of a BLAS matmul, so a row's result does not depend on how
many other rows share the batch. Attacking a whole test split at once therefore
gives bit-identical results to attacking one sample at a time.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import DimensionError, DomainError, TrainingError
from .rng import RngState

logger = logging.getLogger(__name__)

ACTIVATIONS = ("relu", "identity")

# cross-entropy and NLL clamp
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str = "relu"
    dropout_rate: float = 0.0

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise DimensionError(f"layer dims must be positive, got {self.in_dim}x{self.out_dim}")
        if self.activation not in ACTIVATIONS:
            raise DomainError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise DomainError(f"dropout rate must be in [0, 1), got {self.dropout_rate}")


def mlp_specs(in_dim, hidden, class_count, dropout_rate=0.0):
    """Layer specs for an MLP; dropout sits in front of every layer but the first."""
    dims = [in_dim, *hidden, class_count]
    specs = []
    for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
        last = i == len(dims) - 2
        specs.append(LayerSpec(
            in_dim=a,
            out_dim=b,
            activation="identity" if last else "relu",
            dropout_rate=dropout_rate if i > 0 else 0.0,
        ))
    return tuple(specs)


def _frozen(array, shape, what):
    out = np.array(array, dtype=np.float64)
    if out.shape != shape:
        raise DimensionError(f"{what} has shape {out.shape}, expected {shape}")
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Dense:
    spec: LayerSpec
    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "weight", _frozen(self.weight, (self.spec.out_dim, self.spec.in_dim), "weight"))
        object.__setattr__(self, "bias", _frozen(self.bias, (self.spec.out_dim,), "bias"))


def check_chain(layers):
    for a, b in zip(layers[:-1], layers[1:]):
        if a.spec.out_dim != b.spec.in_dim:
            raise DimensionError(f"layer dims do not chain: {a.spec.out_dim} -> {b.spec.in_dim}")


@dataclass(frozen=True, eq=False)
class NetworkParams:
    layers: tuple
    class_count: int
    seed: int | None = None
    train_accuracy: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise DimensionError("a network needs at least one layer")
        check_chain(self.layers)
        if self.layers[-1].spec.activation != "identity":
            raise DomainError("the final layer must produce logits (identity activation)")
        if self.class_count != self.layers[-1].spec.out_dim:
            raise DimensionError(
                f"class_count {self.class_count} does not match final width {self.layers[-1].spec.out_dim}")

    @classmethod
    def from_arrays(cls, specs, weights, biases, **extra):
        layers = tuple(Dense(s, w, b) for s, w, b in zip(specs, weights, biases))
        return cls(layers=layers, class_count=specs[-1].out_dim, **extra)

    @property
    def specs(self):
        return tuple(layer.spec for layer in self.layers)

    @property
    def in_dim(self):
        return self.layers[0].spec.in_dim

    @property
    def has_dropout(self):
        return any(layer.spec.dropout_rate > 0 for layer in self.layers)


@dataclass(frozen=True, eq=False)
class ForwardTrace:
    """What a forward pass saw: layer inputs, dropout masks, pre/post activations."""
    inputs: tuple
    masks: tuple
    pre_activations: tuple
    post_activations: tuple
    logits: np.ndarray = field(repr=False)


def as_input(x, in_dim):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0 or arr.shape[-1] != in_dim:
        raise DimensionError(f"input has shape {arr.shape}, expected trailing dimension {in_dim}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("input contains NaN or Inf")
    return arr


def affine(x, weight, bias):
    return (x[..., None, :] * weight).sum(axis=-1) + bias


def _generator(rng):
    if isinstance(rng, RngState):
        return rng.generator()
    return rng


def draw_masks(layers, leading_shape, rng):
    """Inverted-dropout masks for every layer input; None where the rate is zero."""
    generator = _generator(rng)
    masks = []
    for layer in layers:
        rate = layer.spec.dropout_rate
        if rate > 0:
            keep = generator.random(tuple(leading_shape) + (layer.spec.in_dim,)) >= rate
            masks.append(keep / (1.0 - rate))
        else:
            masks.append(None)
    return tuple(masks)


def run_layers(layers, x, masks=None):
    """Forward through a layer stack; `masks` (one per layer, None allowed) are applied to inputs."""
    if masks is None:
        masks = (None,) * len(layers)
    inputs, pres, posts = [], [], []
    h = x
    for layer, mask in zip(layers, masks):
        inputs.append(h)
        if mask is not None:
            h = h * mask
        z = affine(h, layer.weight, layer.bias)
        a = np.maximum(z, 0.0) if layer.spec.activation == "relu" else z
        pres.append(z)
        posts.append(a)
        h = a
    trace = ForwardTrace(
        inputs=tuple(inputs),
        masks=tuple(masks),
        pre_activations=tuple(pres),
        post_activations=tuple(posts),
        logits=h,
    )
    return h, trace


def backprop_layers(layers, trace, grad_out, need_params=False):
    """Reverse pass through a stack. Returns (grad wrt stack input, [(dW, db), ...] or None).

    ReLU uses subgradient 0 at exactly zero pre-activation.
    """
    g = grad_out
    param_grads = [] if need_params else None
    for i in range(len(layers) - 1, -1, -1):
        layer = layers[i]
        if layer.spec.activation == "relu":
            g = g * (trace.pre_activations[i] > 0)
        mask = trace.masks[i]
        layer_input = trace.inputs[i] if mask is None else trace.inputs[i] * mask
        if need_params:
            g2 = g.reshape(-1, layer.spec.out_dim)
            x2 = layer_input.reshape(-1, layer.spec.in_dim)
            param_grads.append((g2.T @ x2, g2.sum(axis=0)))
        g = (g[..., :, None] * layer.weight).sum(axis=-2)
        if mask is not None:
            g = g * mask
    if need_params:
        param_grads.reverse()
    return g, param_grads


def forward(params, x, dropout_enabled=False, rng=None, masks=None):
    """Logits and trace. With dropout enabled, masks are drawn from `rng` unless given."""
    x = as_input(x, params.in_dim)
    if dropout_enabled and params.has_dropout:
        if masks is None:
            if rng is None:
                raise DomainError("dropout-enabled forward pass needs an rng")
            masks = draw_masks(params.layers, x.shape[:-1], rng)
    else:
        masks = None
    return run_layers(params.layers, x, masks)


def replay(params, x, trace):
    """Run the exact function a trace sampled (same dropout masks)."""
    return forward(params, x, dropout_enabled=True, masks=trace.masks)


def softmax(logits):
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def predict(params, x):
    """Argmax of dropout-disabled logits; ties go to the lowest index."""
    logits, _ = forward(params, x)
    return np.argmax(logits, axis=-1)


def cross_entropy(probs, label):
    """-log p[label], floored at PROB_FLOOR. A batch of rows takes one label per row and returns one loss per row."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim == 1:
        return float(-np.log(max(float(probs[label]), PROB_FLOOR)))
    picked = probs[np.arange(len(probs)), np.asarray(label, dtype=np.int64)]
    return -np.log(np.maximum(picked, PROB_FLOOR))


def softmax_backward(probs, grad_probs):
    """Vector-Jacobian product of softmax: p * (v - <p, v>)."""
    return probs * (grad_probs - (probs * grad_probs).sum(axis=-1, keepdims=True))


def _safe_log(p):
    return np.log(np.maximum(p, np.finfo(np.float64).tiny))


# Scalar heads of a forward pass that input_gradient can differentiate.

@dataclass(frozen=True)
class SoftmaxHead:
    """Softmax probability of one class (per row, or one label per row)."""
    label: object


@dataclass(frozen=True)
class EntropyHead:
    """Negative predictive entropy of the mean softmax over several dropout passes."""


@dataclass(frozen=True)
class VarianceHead:
    """Negative variance over dropout passes.

    statistic="label": variance of the given class probability.
    statistic="vector": mean over classes of the per-class variance.
    """
    label: object
    statistic: str = "label"


def _labels(label, leading_shape, class_count):
    labels = np.broadcast_to(np.asarray(label, dtype=np.int64), leading_shape)
    if labels.size and (labels.min() < 0 or labels.max() >= class_count):
        raise DomainError(f"head label out of range for {class_count} classes")
    return labels


def _onehot(labels, class_count):
    return np.eye(class_count)[labels]


def _pass_probs(traces):
    return np.stack([softmax(t.logits) for t in traces])


def head_value(params, head, traces):
    """Value of a head given the trace(s) of the pass(es) it reads."""
    if isinstance(head, SoftmaxHead):
        probs = softmax(traces.logits)
        labels = _labels(head.label, probs.shape[:-1], params.class_count)
        return np.take_along_axis(probs, labels[..., None], axis=-1)[..., 0]
    probs = _pass_probs(traces)
    if isinstance(head, EntropyHead):
        mean = probs.mean(axis=0)
        return (mean * _safe_log(mean)).sum(axis=-1)
    if isinstance(head, VarianceHead):
        if head.statistic == "vector":
            return -probs.var(axis=0).mean(axis=-1)
        labels = _labels(head.label, probs.shape[1:-1], params.class_count)
        q = (probs * _onehot(labels, params.class_count)).sum(axis=-1)
        return -q.var(axis=0)
    raise DomainError(f"unknown head {head!r}")


def head_logit_grads(params, head, traces):
    """d(head)/d(logits) for each pass the head reads."""
    if isinstance(head, SoftmaxHead):
        probs = softmax(traces.logits)
        labels = _labels(head.label, probs.shape[:-1], params.class_count)
        onehot = _onehot(labels, params.class_count)
        return softmax_backward(probs, onehot)
    probs = _pass_probs(traces)
    n_passes = probs.shape[0]
    if isinstance(head, EntropyHead):
        mean = probs.mean(axis=0)
        grad_mean = _safe_log(mean) + 1.0
        return [softmax_backward(p, grad_mean / n_passes) for p in probs]
    if isinstance(head, VarianceHead):
        if head.statistic == "vector":
            centred = probs - probs.mean(axis=0)
            grads = -2.0 * centred / (n_passes * params.class_count)
            return [softmax_backward(p, g) for p, g in zip(probs, grads)]
        labels = _labels(head.label, probs.shape[1:-1], params.class_count)
        onehot = _onehot(labels, params.class_count)
        q = (probs * onehot).sum(axis=-1)
        dq = -2.0 * (q - q.mean(axis=0)) / n_passes
        return [softmax_backward(p, dq_k[..., None] * onehot) for p, dq_k in zip(probs, dq)]
    raise DomainError(f"unknown head {head!r}")


def input_gradient(params, x, head, dropout_replay=None):
    """Exact gradient of a head with respect to the input.

    SoftmaxHead reads one pass: the replayed trace if given, else a
    dropout-disabled forward pass. Entropy and variance heads read several
    dropout passes and need their traces to replay.
    """
    x = as_input(x, params.in_dim)
    if isinstance(head, SoftmaxHead):
        if dropout_replay is None:
            _, trace = forward(params, x)
        else:
            _, trace = replay(params, x, dropout_replay)
        grad, _ = backprop_layers(params.layers, trace, head_logit_grads(params, head, trace))
        return grad
    if dropout_replay is None or isinstance(dropout_replay, ForwardTrace):
        raise DomainError(f"{type(head).__name__} needs the traces of its dropout passes")
    traces = [replay(params, x, t)[1] for t in dropout_replay]
    grad = np.zeros_like(x)
    for trace, g in zip(traces, head_logit_grads(params, head, traces)):
        grad = grad + backprop_layers(params.layers, trace, g)[0]
    return grad


@dataclass(frozen=True)
class TrainHyper:
    lr: float = 0.05
    epochs: int = 30
    batch: int = 32
    seed: int = 0
    momentum: float = 0.0


def init_layers(specs, generator):
    """Uniform fan-based init in [-a, a], a = sqrt(6 / (fan_in + fan_out)); zero biases."""
    weights, biases = [], []
    for spec in specs:
        a = np.sqrt(6.0 / (spec.in_dim + spec.out_dim))
        weights.append(generator.uniform(-a, a, size=(spec.out_dim, spec.in_dim)))
        biases.append(np.zeros(spec.out_dim))
    return weights, biases


@dataclass
class _Layer:
    # mutable stand-in for Dense while training
    spec: LayerSpec
    weight: np.ndarray
    bias: np.ndarray


def minibatches(n, batch, generator):
    order = generator.permutation(n)
    for start in range(0, n, batch):
        yield order[start:start + batch]


def sgd_step(layers, grads, velocity, hyper):
    for layer, (dw, db), v in zip(layers, grads, velocity):
        v[0] *= hyper.momentum
        v[0] -= hyper.lr * dw
        v[1] *= hyper.momentum
        v[1] -= hyper.lr * db
        layer.weight += v[0]
        layer.bias += v[1]


def train_sgd(specs, data, hyper):
    """Minibatch SGD on mean cross-entropy, dropout active during training."""
    specs = tuple(specs)
    features = as_input(data.features, specs[0].in_dim)
    labels = np.asarray(data.labels, dtype=np.int64)
    if len(labels) == 0:
        raise DomainError("cannot train on an empty dataset")
    class_count = specs[-1].out_dim
    generator = RngState(hyper.seed).generator()
    weights, biases = init_layers(specs, generator)
    layers = [_Layer(s, w, b) for s, w, b in zip(specs, weights, biases)]
    check_chain(layers)
    velocity = [[np.zeros_like(l.weight), np.zeros_like(l.bias)] for l in layers]
    onehot = _onehot(labels, class_count)
    has_dropout = any(s.dropout_rate > 0 for s in specs)

    for epoch in range(1, hyper.epochs + 1):
        total = 0.0
        for idx in minibatches(len(labels), hyper.batch, generator):
            xb = features[idx]
            masks = draw_masks(layers, (len(idx),), generator) if has_dropout else None
            with np.errstate(over="ignore", invalid="ignore"):
                logits, trace = run_layers(layers, xb, masks)
                probs = softmax(logits)
                loss = cross_entropy(probs, labels[idx]).sum()
            if not np.isfinite(loss):
                raise TrainingError("training diverged: non-finite loss", epoch)
            total += loss
            _, grads = backprop_layers(layers, trace, (probs - onehot[idx]) / len(idx), need_params=True)
            sgd_step(layers, grads, velocity, hyper)
        logger.debug("epoch %d mean loss %.6f", epoch, total / len(labels))

    params = NetworkParams.from_arrays(
        specs, [l.weight for l in layers], [l.bias for l in layers], seed=hyper.seed)
    accuracy = float(np.mean(predict(params, features) == labels))
    logger.info("trained %s seed=%d epochs=%d train accuracy %.4f",
                "-".join(str(s.in_dim) for s in specs) + f"-{class_count}", hyper.seed, hyper.epochs, accuracy)
    return NetworkParams(layers=params.layers, class_count=class_count, seed=hyper.seed, train_accuracy=accuracy)


def train_ensemble(specs, data, hyper, seeds, workers=1):
    """One member per seed, same architecture and data; members may train in parallel."""
    hypers = [replace(hyper, seed=int(seed)) for seed in seeds]
    if workers > 1 and len(hypers) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return tuple(pool.map(lambda h: train_sgd(specs, data, h), hypers))
    return tuple(train_sgd(specs, data, h) for h in hypers)
