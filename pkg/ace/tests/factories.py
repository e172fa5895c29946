"""Small models and datasets shared by the test modules."""

import numpy as np

from ace.confidence import ScoredItem
from ace.datasets import DatasetSpec, LabeledDataset, gen_dataset
from ace.engine import Dense, LayerSpec, NetworkParams, mlp_specs
from ace.selnet import SelNetParams, SelNetSpecs


def linear_params(weight, bias=None):
    """One identity layer: logits = W x + b."""
    weight = np.asarray(weight, dtype=np.float64)
    out_dim, in_dim = weight.shape
    bias = np.zeros(out_dim) if bias is None else bias
    return NetworkParams.from_arrays((LayerSpec(in_dim, out_dim, "identity"),), [weight], [bias])


def logistic_params(w, b=0.0):
    """Two-class model whose class-1 logit is w.x + b and class-0 logit is 0."""
    w = np.asarray(w, dtype=np.float64)
    return linear_params(np.vstack([np.zeros_like(w), w]), np.array([0.0, b]))


def random_network(seed, dims, dropout_rate=0.0, scale=1.0):
    generator = np.random.default_rng(seed)
    specs = mlp_specs(dims[0], dims[1:-1], dims[-1], dropout_rate)
    weights = [scale * generator.standard_normal((s.out_dim, s.in_dim)) for s in specs]
    biases = [0.5 * generator.standard_normal(s.out_dim) for s in specs]
    return NetworkParams.from_arrays(specs, weights, biases, seed=seed)


def random_selnet(seed, in_dim=3, hidden=(5,), class_count=3, selector_hidden=4):
    generator = np.random.default_rng(seed)
    specs = SelNetSpecs.build(in_dim, hidden, class_count, selector_hidden)
    groups = [
        tuple(Dense(s, generator.standard_normal((s.out_dim, s.in_dim)), 0.5 * generator.standard_normal(s.out_dim))
              for s in group)
        for group in specs.groups()
    ]
    return SelNetParams.from_layers(groups, class_count, seed=seed)


def zero_selnet(in_dim=2, hidden=(4,), class_count=3):
    specs = SelNetSpecs.build(in_dim, hidden, class_count, 3)
    groups = [tuple(Dense(s, np.zeros((s.out_dim, s.in_dim)), np.zeros(s.out_dim)) for s in group)
              for group in specs.groups()]
    return SelNetParams.from_layers(groups, class_count)


def blob_data(n=400, classes=2, margin=4.0, noise=0.0, seed=7, dimensions=2, split="train"):
    spec = DatasetSpec(classes=classes, margin=margin, noise=noise, dimensions=dimensions,
                       n_train=n, n_validation=0, n_test=1)
    return gen_dataset(spec, seed, n=n, split=split)


def scored(kappas, losses, class_count=2):
    """ScoredItems with the given kappa and 0/1 loss; label 0, prediction 0 or 1."""
    items = []
    for i, (k, loss) in enumerate(zip(kappas, losses)):
        probs = np.full(class_count, 1.0 / class_count)
        items.append(ScoredItem(index=i, label=0, predicted=int(loss), kappa=float(k), probs=probs))
    return items


def dataset(features, labels, class_count=2, split="test"):
    return LabeledDataset(np.asarray(features, dtype=np.float64), labels, split, class_count)


def same_weights(a, b):
    if a.specs != b.specs:
        return False
    return all(np.array_equal(x.weight, y.weight) and np.array_equal(x.bias, y.bias)
               for x, y in zip(a.layers, b.layers))
