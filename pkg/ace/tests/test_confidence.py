import math
from types import SimpleNamespace

import numpy as np
from django.test import SimpleTestCase
from hypothesis import assume, given, settings, strategies as st

from ace.confidence import (
    ENSEMBLE_MEAN_SOFTMAX, MC_ENTROPY, MC_VARIANCE, SELECTOR_HEAD, SOFTMAX_RESPONSE, ConfidenceScorer,
    ScoredItem, confidence_gradient, kappa_ensemble, kappa_mc_entropy, kappa_mc_variance, kappa_selector,
    kappa_signed_gradient, kappa_softmax, mc_traces, score_dataset,
)
from ace.engine import (
    EntropyHead, NetworkParams, VarianceHead, forward, head_value, input_gradient, mlp_specs, predict, replay,
    softmax, SoftmaxHead,
)
from ace.exceptions import ConfigurationError
from ace.rng import RngState
from ace.selnet import selnet_forward

from .factories import dataset, linear_params, logistic_params, random_network, random_selnet, zero_selnet
from .test_engine import away_from_kinks, central_difference

seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


def constant_model(probs):
    """A model that ignores its 1-D input and always emits `probs`."""
    probs = np.asarray(probs, dtype=np.float64)
    return linear_params(np.zeros((len(probs), 1)), np.log(probs))


def zero_dropout_model(class_count=3):
    specs = mlp_specs(2, (4,), class_count, 0.5)
    return NetworkParams.from_arrays(specs, [np.zeros((s.out_dim, s.in_dim)) for s in specs],
                                     [np.zeros(s.out_dim) for s in specs])


class SoftmaxResponseTests(SimpleTestCase):
    def test_symmetric_point(self):
        self.assertEqual(kappa_softmax(linear_params(np.eye(2)), [0.0, 0.0], 0), 0.5)

    def test_reference_value(self):
        self.assertAlmostEqual(kappa_softmax(linear_params(np.eye(2)), [3.0, 1.0], 0), 0.8807970779778823,
                               places=15)

    @given(seeds)
    def test_predicted_label_is_at_least_uniform(self, seed):
        params = random_network(seed, (3, 5, 4))
        x = np.random.default_rng(seed).standard_normal(3)
        self.assertGreaterEqual(kappa_softmax(params, x, predict(params, x)), 0.25)


class EnsembleTests(SimpleTestCase):
    def test_copies_of_one_model_score_like_the_model(self):
        params = random_network(5, (3, 6, 3))
        x = np.random.default_rng(1).standard_normal((10, 3))
        scorer = ConfidenceScorer(ENSEMBLE_MEAN_SOFTMAX, [params, params, params])
        single = ConfidenceScorer(SOFTMAX_RESPONSE, params)
        np.testing.assert_allclose(scorer.evaluate(x).kappa, single.evaluate(x).kappa, rtol=0, atol=1e-12)
        np.testing.assert_array_equal(scorer.predict(x), single.predict(x))

    def test_mean_of_member_responses(self):
        members = [constant_model([0.9, 0.1]), constant_model([0.5, 0.5])]
        self.assertAlmostEqual(kappa_ensemble(members, [0.0], 0), 0.7, places=15)

    def test_matches_brute_force_averaging(self):
        members = [random_network(s, (3, 6, 4)) for s in (1, 2, 3)]
        x = np.random.default_rng(4).standard_normal(3)
        label = 2
        expected = np.mean([softmax(forward(m, x)[0])[label] for m in members])
        self.assertAlmostEqual(kappa_ensemble(members, x, label), expected, delta=1e-12)

    def test_members_must_agree(self):
        with self.assertRaises(ConfigurationError):
            kappa_ensemble([random_network(1, (3, 4, 2)), random_network(2, (3, 4, 3))], np.zeros(3), 0)
        with self.assertRaises(ConfigurationError):
            ConfidenceScorer(ENSEMBLE_MEAN_SOFTMAX, [random_network(1, (3, 4, 2))])


class MCEntropyTests(SimpleTestCase):
    def test_without_dropout_every_pass_is_the_same(self):
        params = random_network(2, (2, 5, 3))
        x = np.array([0.4, -0.1])
        probs = softmax(forward(params, x)[0])
        expected = float((probs * np.log(probs)).sum())
        self.assertAlmostEqual(kappa_mc_entropy(params, x, 7, RngState(1)), expected, places=14)

    def test_uniform_mean_is_minimum_confidence(self):
        self.assertAlmostEqual(kappa_mc_entropy(zero_dropout_model(3), [1.0, 2.0], 5, RngState(0)), -math.log(3),
                               places=15)

    def test_same_seed_is_bit_identical(self):
        params = random_network(3, (2, 8, 3), dropout_rate=0.3)
        x = np.array([0.2, 0.9])
        self.assertEqual(kappa_mc_entropy(params, x, 10, RngState(42)), kappa_mc_entropy(params, x, 10, RngState(42)))

    @given(seeds)
    def test_bounded_by_log_class_count(self, seed):
        params = random_network(seed, (2, 6, 4), dropout_rate=0.4)
        kappa = kappa_mc_entropy(params, np.random.default_rng(seed).standard_normal(2), 5, RngState(seed))
        self.assertGreaterEqual(kappa, -math.log(4) - 1e-12)
        self.assertLessEqual(kappa, 0.0)


class MCVarianceTests(SimpleTestCase):
    def test_without_dropout_variance_is_zero(self):
        params = random_network(2, (2, 5, 3))
        self.assertEqual(kappa_mc_variance(params, [0.1, 0.2], 5, RngState(1)), 0.0)

    def test_needs_two_passes(self):
        with self.assertRaises(ConfigurationError):
            kappa_mc_variance(random_network(2, (2, 5, 3), dropout_rate=0.2), [0.1, 0.2], 1, RngState(1))

    def test_variance_arithmetic(self):
        passes = [SimpleNamespace(logits=np.log([0.4, 0.6])), SimpleNamespace(logits=np.log([0.6, 0.4]))]
        value = head_value(linear_params(np.eye(2)), VarianceHead(0), passes)
        self.assertAlmostEqual(float(value), -0.01, places=15)

    def test_matches_per_pass_recomputation(self):
        params = random_network(6, (2, 8, 3), dropout_rate=0.3)
        x = np.array([0.5, -0.7])
        label = int(predict(params, x))
        traces = mc_traces(params, x, 30, RngState(9))
        q = np.array([softmax(t.logits)[label] for t in traces])
        self.assertAlmostEqual(kappa_mc_variance(params, x, 30, RngState(9)), -float(np.var(q)), delta=1e-15)


class SelectorTests(SimpleTestCase):
    def test_zero_selnet(self):
        self.assertEqual(kappa_selector(zero_selnet(), [1.0, -1.0]), 0.5)

    def test_plain_model_is_rejected(self):
        with self.assertRaises(ConfigurationError):
            kappa_selector(linear_params(np.eye(2)), [0.0, 0.0])

    def test_equals_the_forward_selector(self):
        params = random_selnet(3)
        x = np.random.default_rng(0).uniform(-5, 5, (1000, 3))
        kappa = kappa_selector(params, x)
        self.assertTrue(np.all((kappa > 0) & (kappa < 1)))
        np.testing.assert_array_equal(kappa, selnet_forward(params, x)[1])


class ScorerTests(SimpleTestCase):
    def test_construction_errors(self):
        plain = random_network(1, (2, 4, 2))
        with self.assertRaises(ConfigurationError):
            ConfidenceScorer("mutual_information", plain)
        with self.assertRaises(ConfigurationError):
            ConfidenceScorer(MC_ENTROPY, plain, passes=5, rng=RngState(0))
        with self.assertRaises(ConfigurationError):
            ConfidenceScorer(MC_ENTROPY, random_network(1, (2, 4, 2), dropout_rate=0.2), passes=5)
        with self.assertRaises(ConfigurationError):
            ConfidenceScorer(SELECTOR_HEAD, plain)
        with self.assertRaises(ConfigurationError):
            ConfidenceScorer(SOFTMAX_RESPONSE, [plain, plain])

    def test_mc_prediction_uses_the_deterministic_pass(self):
        params = random_network(4, (2, 8, 3), dropout_rate=0.5)
        x = np.random.default_rng(2).standard_normal((40, 2))
        scorer = ConfidenceScorer(MC_VARIANCE, params, passes=5, rng=RngState(3))
        np.testing.assert_array_equal(scorer.evaluate(x).predicted, predict(params, x))

    def test_batch_rows_see_their_own_mask_streams(self):
        params = random_network(4, (2, 8, 3), dropout_rate=0.3)
        x = np.random.default_rng(2).standard_normal((300, 2))
        rng = RngState(11)
        scorer = ConfidenceScorer(MC_ENTROPY, params, passes=6, rng=rng)
        batch = scorer.evaluate(x)
        for i in (0, 1, 127, 128, 299):
            self.assertEqual(batch.kappa[i], kappa_mc_entropy(params, x[i], 6, rng.derive(i)))

    def test_score_dataset_marks_errors(self):
        data = dataset([[1.0, 0.0], [0.0, 1.0], [2.0, 1.0]], [0, 0, 1])
        items = score_dataset(ConfidenceScorer(SOFTMAX_RESPONSE, linear_params(np.eye(2))), data)
        self.assertEqual([i.predicted for i in items], [0, 1, 0])
        self.assertEqual([i.loss01 for i in items], [0, 1, 1])
        for item in items:
            self.assertAlmostEqual(float(item.probs.sum()), 1.0, places=15)

    def test_scored_item_loss_follows_the_labels(self):
        self.assertEqual(ScoredItem(0, 1, 1, 0.9, np.array([0.1, 0.9])).loss01, 0)
        self.assertEqual(ScoredItem(0, 0, 1, 0.9, np.array([0.1, 0.9])).loss01, 1)


class SignedGradientTests(SimpleTestCase):
    def test_logistic_model(self):
        scorer = ConfidenceScorer(SOFTMAX_RESPONSE, logistic_params([2.0, -3.0]))
        np.testing.assert_array_equal(kappa_signed_gradient(scorer, None, [0.3, 0.1], 1), [1.0, -1.0])

    def test_zero_gradient_coordinates_stay_zero(self):
        scorer = ConfidenceScorer(SOFTMAX_RESPONSE, logistic_params([2.0, 0.0]))
        np.testing.assert_array_equal(kappa_signed_gradient(scorer, None, [0.3, 0.1], 1), [1.0, 0.0])

    def test_indirect_sources(self):
        selnet = random_selnet(2)
        x = np.array([0.1, -0.4, 0.3])
        expected = np.sign(input_gradient(random_network(1, (3, 4, 3)), x, SoftmaxHead(1)))
        scorer = ConfidenceScorer(SELECTOR_HEAD, selnet)
        grad = confidence_gradient(scorer, selnet, x, 1)
        self.assertEqual(grad.shape, x.shape)
        members = [random_network(1, (3, 4, 3)), random_network(2, (3, 4, 3))]
        mean = np.mean([input_gradient(m, x, SoftmaxHead(1)) for m in members], axis=0)
        np.testing.assert_allclose(confidence_gradient(scorer, members, x, 1), mean, rtol=0, atol=1e-15)
        np.testing.assert_array_equal(kappa_signed_gradient(scorer, members[:1], x, 1), expected)

    @settings(max_examples=50, deadline=None)
    @given(seeds)
    def test_direct_entropy_signs_match_finite_differences(self, seed):
        params = random_network(seed, (3, 6, 3), dropout_rate=0.3, scale=0.7)
        x = np.random.default_rng(seed).standard_normal(3)
        rng = RngState(seed)
        scorer = ConfidenceScorer(MC_ENTROPY, params, passes=5, rng=rng)
        label = int(predict(params, x))
        eta = kappa_signed_gradient(scorer, None, x, label, rng=rng)
        traces = mc_traces(params, x, 5, rng)
        assume(away_from_kinks(params, *traces))
        numeric = central_difference(
            lambda z: float(head_value(params, EntropyHead(), [replay(params, z, t)[1] for t in traces])), x)
        self.assertTrue(set(np.unique(eta)) <= {-1.0, 0.0, 1.0})
        strong = np.abs(numeric) > 1e-7
        np.testing.assert_array_equal(eta[strong], np.sign(numeric[strong]))

    @settings(max_examples=40, deadline=None)
    @given(seeds, st.sampled_from([SOFTMAX_RESPONSE, ENSEMBLE_MEAN_SOFTMAX, MC_ENTROPY, MC_VARIANCE, SELECTOR_HEAD]))
    def test_a_small_step_along_eta_raises_kappa(self, seed, kind):
        x = np.random.default_rng(seed).standard_normal(3)
        rng = RngState(seed)
        if kind == SELECTOR_HEAD:
            scorer = ConfidenceScorer(kind, random_selnet(seed))
        elif kind == ENSEMBLE_MEAN_SOFTMAX:
            scorer = ConfidenceScorer(kind, [random_network(seed + j, (3, 6, 3)) for j in range(3)])
        elif kind in (MC_ENTROPY, MC_VARIANCE):
            scorer = ConfidenceScorer(kind, random_network(seed, (3, 6, 3), dropout_rate=0.3), passes=4, rng=rng)
        else:
            scorer = ConfidenceScorer(kind, random_network(seed, (3, 6, 3)))
        label = int(scorer.predict(x))
        grad = confidence_gradient(scorer, None, x, label, rng=rng)
        assume(np.abs(grad).sum() > 1e-4)
        eta = np.sign(grad)
        before = scorer.kappa(x, label)
        after = scorer.kappa(x + 1e-6 * eta, label)
        self.assertGreater(after, before)
