import numpy as np
from django.test import SimpleTestCase
from hypothesis import assume, given, settings, strategies as st

from ace.datasets import LabeledDataset
from ace.engine import SoftmaxHead, TrainHyper, init_layers
from ace.exceptions import DimensionError, DomainError
from ace.rng import RngState
from ace.selnet import (
    SelectorHead, SelNetSpecs, SelNetTrainConfig, calibrate_threshold, selnet_forward, selnet_input_gradient,
    selnet_predict, selnet_trace, selnet_train, threshold_for_coverage,
)

from .factories import blob_data, random_selnet, zero_selnet
from .test_engine import central_difference, relative_error

seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


def noisy_cluster_data(seed, n_clean=300, n_noisy=200):
    """Two clean blobs plus a cluster whose labels are coin flips."""
    g = np.random.default_rng(seed)
    features = np.vstack([
        g.normal([-3.0, 0.0], 0.7, (n_clean, 2)),
        g.normal([3.0, 0.0], 0.7, (n_clean, 2)),
        g.normal([0.0, 5.0], 0.7, (n_noisy, 2)),
    ])
    labels = np.concatenate([np.zeros(n_clean), np.ones(n_clean), g.integers(0, 2, n_noisy)]).astype(np.int64)
    return LabeledDataset(features, labels, "train", 2)


class SelNetForwardTests(SimpleTestCase):
    def test_zero_weights_give_uniform_predictions_and_half_selection(self):
        probs, selector, aux = selnet_forward(zero_selnet(), [0.3, -2.0])
        np.testing.assert_allclose(probs, [1 / 3] * 3, rtol=0, atol=1e-15)
        np.testing.assert_allclose(aux, [1 / 3] * 3, rtol=0, atol=1e-15)
        self.assertEqual(selector, 0.5)

    def test_prediction_ignores_the_auxiliary_head(self):
        params = random_selnet(4)
        x = np.random.default_rng(1).standard_normal((20, 3))
        probs, _, _ = selnet_forward(params, x)
        np.testing.assert_array_equal(selnet_predict(params, x), np.argmax(probs, axis=-1))

    def test_shape_mismatch(self):
        with self.assertRaises(DimensionError):
            selnet_forward(zero_selnet(), [1.0, 2.0, 3.0])

    @given(seeds, st.lists(st.floats(-10, 10), min_size=3, max_size=3))
    def test_selector_is_strictly_between_zero_and_one(self, seed, x):
        _, selector, _ = selnet_forward(random_selnet(seed % 1000), x)
        self.assertGreater(selector, 0.0)
        self.assertLess(selector, 1.0)


class SelNetGradientTests(SimpleTestCase):
    @settings(max_examples=100, deadline=None)
    @given(seeds, st.sampled_from(["selector", 0, 1, 2]))
    def test_heads_match_finite_differences(self, seed, which):
        params = random_selnet(seed)
        x = np.random.default_rng(seed + 1).standard_normal(3)
        trace = selnet_trace(params, x)
        assume(np.min(np.abs(trace.backbone.pre_activations[0])) > 1e-3)
        assume(np.min(np.abs(trace.selector.pre_activations[0])) > 1e-3)
        if which == "selector":
            head = SelectorHead()

            def value(z):
                return selnet_forward(params, z)[1]
        else:
            head = SoftmaxHead(which)

            def value(z):
                return selnet_forward(params, z)[0][which]
        analytic = selnet_input_gradient(params, x, head)
        self.assertLess(relative_error(analytic, central_difference(value, x)), 1e-5)

    def test_unknown_head(self):
        with self.assertRaises(DomainError):
            selnet_input_gradient(zero_selnet(), [0.0, 0.0], object())


class SelNetTrainTests(SimpleTestCase):
    def test_full_target_coverage_selects_almost_everything(self):
        data = blob_data(n=400, seed=2)
        specs = SelNetSpecs.build(2, (16,), 2, 8)
        params = selnet_train(specs, data, SelNetTrainConfig(target_coverage=1.0,
                                                             hyper=TrainHyper(lr=0.05, epochs=20, seed=3)))
        self.assertGreaterEqual(params.train_coverage, 0.95)
        self.assertGreaterEqual(params.train_accuracy, 0.95)

    def test_partial_coverage_rejects_the_noisy_region(self):
        specs = SelNetSpecs.build(2, (16,), 2, 8)
        params = selnet_train(specs, noisy_cluster_data(1), SelNetTrainConfig(
            target_coverage=0.7, hyper=TrainHyper(lr=0.05, epochs=30, seed=5)))
        held_out = noisy_cluster_data(2)
        probs, scores, _ = selnet_forward(params, held_out.features)
        errors = (np.argmax(probs, axis=-1) != held_out.labels).astype(float)
        theta = threshold_for_coverage(scores, 0.7).theta
        covered = scores > theta
        self.assertLess(errors[covered].mean(), errors.mean())

    def test_zero_epochs_returns_the_initialization(self):
        specs = SelNetSpecs.build(2, (4,), 2, 3)
        params = selnet_train(specs, blob_data(n=10), SelNetTrainConfig(hyper=TrainHyper(epochs=0, seed=8)))
        generator = RngState(8).generator()
        for group, layers in zip(specs.groups(), params.groups()):
            weights, biases = init_layers(group, generator)
            for layer, w, b in zip(layers, weights, biases):
                np.testing.assert_array_equal(layer.weight, w)
                np.testing.assert_array_equal(layer.bias, b)

    def test_same_seed_gives_identical_params(self):
        specs = SelNetSpecs.build(2, (6,), 2, 3)
        cfg = SelNetTrainConfig(hyper=TrainHyper(epochs=2, seed=1))
        data = blob_data(n=60)
        a, b = selnet_train(specs, data, cfg), selnet_train(specs, data, cfg)
        for la, lb in zip(sum(a.groups(), ()), sum(b.groups(), ())):
            np.testing.assert_array_equal(la.weight, lb.weight)

    def test_config_ranges(self):
        with self.assertRaises(DomainError):
            SelNetTrainConfig(target_coverage=0.0)
        with self.assertRaises(DomainError):
            SelNetTrainConfig(aux_mix=1.5)


def brute_force_coverage(scores, c):
    candidates = [np.nextafter(min(scores), -np.inf)] + list(scores)
    achievable = [np.mean(np.asarray(scores) > t) for t in candidates]
    return max(a for a in achievable if a <= c + 1e-9)


class CalibrationTests(SimpleTestCase):
    def test_distinct_scores_at_half_coverage(self):
        scores = np.random.default_rng(0).permutation(np.linspace(0.05, 0.95, 10))
        result = threshold_for_coverage(scores, 0.5)
        ordered = np.sort(scores)[::-1]
        self.assertEqual(result.coverage, 0.5)
        self.assertGreaterEqual(result.theta, ordered[5])
        self.assertLess(result.theta, ordered[4])

    def test_full_coverage_sits_below_the_minimum(self):
        scores = [0.2, 0.4, 0.4, 0.9]
        result = threshold_for_coverage(scores, 1.0)
        self.assertLess(result.theta, 0.2)
        self.assertEqual(result.coverage, 1.0)

    def test_ties_are_never_split(self):
        result = threshold_for_coverage([0.9, 0.5, 0.5, 0.5, 0.1], 0.5)
        self.assertEqual(result.coverage, 0.2)

    def test_empty_validation(self):
        with self.assertRaises(DomainError):
            threshold_for_coverage([], 0.5)

    @given(st.lists(st.integers(0, 20), min_size=1, max_size=500), st.floats(0.01, 1.0))
    def test_matches_a_threshold_sweep(self, raw, c):
        scores = np.asarray(raw, dtype=np.float64) / 20.0
        result = threshold_for_coverage(scores, c)
        self.assertAlmostEqual(result.coverage, brute_force_coverage(scores, c), places=12)
        self.assertAlmostEqual(result.coverage, float(np.mean(scores > result.theta)), places=12)

    def test_calibrate_reports_the_achieved_coverage(self):
        params = random_selnet(3, in_dim=2)
        validation = blob_data(n=50, classes=3, split="validation")
        result = calibrate_threshold(params, validation, 0.7)
        _, scores, _ = selnet_forward(params, validation.features)
        self.assertEqual(result.coverage, float(np.mean(scores > result.theta)))
        self.assertLessEqual(result.coverage, 0.7)
