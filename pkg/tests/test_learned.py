import sys
import os
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', 'src')))

import math
import unittest
from itertools import combinations

import numpy as np

from sdlab.detectors import learned
from sdlab.detectors.learned import KernelFeatureDetector, LinearModel


def _noise(rng, m, n_s):
    return rng.normal(size=(m, n_s)) + 1j * rng.normal(size=(m, n_s))


def _naive_feature(x, kernel_index, padding, bias):
    """Double-loop dilation-1 convolution followed by the indicator mean."""
    taps = list(combinations(range(9), 3))[kernel_index]
    weights = [2 if i in taps else -1 for i in range(9)]
    if padding == 'same':
        x = [x[0]] * 4 + list(x) + [x[-1]] * 4
    outputs = []
    for start in range(len(x) - 8):
        total = 0
        for i in range(9):
            total += weights[i] * x[start + i]
        outputs.append(total)
    return sum(1 for value in outputs if value > bias) / len(outputs)


class TestKernelBank(unittest.TestCase):

    def test_kernel_set(self):
        weights = learned.kernel_weights()
        self.assertEqual(weights.shape, (84, 9))
        self.assertEqual(len({tuple(row) for row in weights}), 84)
        self.assertTrue(np.all(weights.sum(axis=1) == 0))
        self.assertTrue(np.all((weights == 2).sum(axis=1) == 3))

    def test_default_schedule(self):
        bank = learned.build_kernel_bank(500, 2520, seed=1)
        self.assertEqual(bank.num_features, 2520)
        self.assertEqual(bank.dilations[0], 1)
        self.assertEqual(max(bank.dilations), 62)
        self.assertEqual(list(bank.dilations), sorted(set(bank.dilations)))
        self.assertTrue(all(8 * d < 500 for d in bank.dilations))
        self.assertEqual(len(bank.channels), bank.num_combinations)
        self.assertEqual(bank.channels[:4], ('I', 'Q', 'I+Q', 'I'))
        self.assertEqual(bank.paddings[:3], ('same', 'valid', 'same'))
        self.assertFalse(bank.is_fitted)

    def test_feature_count_rounds_down(self):
        self.assertEqual(learned.build_kernel_bank(200, 1000).num_features, 84 * 11)

    def test_offsets_cover_features(self):
        bank = learned.build_kernel_bank(128, 840)
        offsets = bank.feature_offsets()
        self.assertEqual(offsets[0], 0)
        self.assertEqual(offsets[-1], bank.num_features)
        spec = bank.feature_spec()
        self.assertEqual(spec.num_features, 840)
        self.assertEqual(len(spec.quantiles), len(bank.dilations))

    def test_invalid_requests(self):
        with self.assertRaises(ValueError):
            learned.build_kernel_bank(8, 84)
        with self.assertRaises(ValueError):
            learned.build_kernel_bank(100, 83)

    def test_bias_quantiles(self):
        np.testing.assert_allclose(learned.bias_quantiles(1), [0.5])
        np.testing.assert_allclose(learned.bias_quantiles(4), [0.125, 0.375, 0.625, 0.875])


class TestBiasFitting(unittest.TestCase):

    def test_single_bias_is_median(self):
        rng = np.random.default_rng(0)
        examples = _noise(rng, 10, 40)
        bank = learned.fit_biases(learned.build_kernel_bank(40, 84, seed=5), examples)
        for c in (0, 17, 83):
            output = learned.convolve(bank, examples[bank.fit_indices[c]:bank.fit_indices[c] + 1], c)[0]
            self.assertAlmostEqual(bank.biases[c], float(np.median(output)), places=12)

    def test_constant_input_gives_zero_biases(self):
        examples = np.full((3, 30), 1 + 1j)
        bank = learned.fit_biases(learned.build_kernel_bank(30, 252, seed=2), examples)
        self.assertTrue(np.all(bank.biases == 0.0))

    def test_refit_is_bit_identical(self):
        examples = _noise(np.random.default_rng(4), 20, 64)
        skeleton = learned.build_kernel_bank(64, 420, seed=9)
        a = learned.fit_biases(skeleton, examples)
        b = learned.fit_biases(skeleton, examples)
        self.assertEqual(a.biases.tobytes(), b.biases.tobytes())
        self.assertEqual(a.fit_indices, b.fit_indices)
        self.assertFalse(a.biases.flags.writeable)

    def test_empty_subset(self):
        with self.assertRaises(ValueError):
            learned.fit_biases(learned.build_kernel_bank(30, 84), np.zeros((0, 30), dtype=complex))


class TestTransform(unittest.TestCase):

    def setUp(self):
        rng = np.random.default_rng(21)
        self.examples = _noise(rng, 12, 48)
        self.bank = learned.fit_biases(learned.build_kernel_bank(48, 336, seed=3), self.examples)

    def test_features_in_unit_interval(self):
        features = learned.transform(self.bank, self.examples)
        self.assertEqual(features.shape, (12, 336))
        self.assertEqual(features.dtype, np.float32)
        self.assertTrue(np.all((features >= 0) & (features <= 1)))

    def test_single_matches_batch(self):
        batch = learned.transform(self.bank, self.examples)
        np.testing.assert_array_equal(learned.transform(self.bank, self.examples[4]), batch[4])

    def test_extreme_biases(self):
        low = self.bank.model_copy(update={'biases': np.full(336, -1e9)})
        high = self.bank.model_copy(update={'biases': np.full(336, 1e9)})
        self.assertTrue(np.all(learned.transform(low, self.examples) == 1.0))
        self.assertTrue(np.all(learned.transform(high, self.examples) == 0.0))

    def test_dc_invariance(self):
        y = _noise(np.random.default_rng(77), 1, 48)[0]
        shifted = y + (0.37 - 1.25j)
        for c in range(0, self.bank.num_combinations, 13):
            np.testing.assert_allclose(learned.convolve(self.bank, shifted[np.newaxis], c),
                                       learned.convolve(self.bank, y[np.newaxis], c), rtol=0, atol=1e-9)
        np.testing.assert_array_equal(learned.transform(self.bank, shifted), learned.transform(self.bank, y))

    def test_errors(self):
        with self.assertRaises(ValueError):
            learned.transform(self.bank, np.zeros(47, dtype=complex))
        with self.assertRaises(ValueError):
            learned.transform(learned.build_kernel_bank(48, 84), self.examples)

    def test_brute_force_equivalence(self):
        rng = np.random.default_rng(123)
        cases = 0
        for n_s in range(9, 21):
            skeleton = learned.build_kernel_bank(n_s, 252, seed=n_s)
            self.assertEqual(skeleton.dilations[0], 1)
            # Integer samples and half-integer biases keep every comparison exact.
            biases = rng.integers(-12, 12, size=skeleton.num_features) + 0.5
            bank = skeleton.model_copy(update={'biases': biases})
            iq = rng.integers(-4, 5, size=(6, n_s)) + 1j * rng.integers(-4, 5, size=(6, n_s))
            features = learned.transform(bank, iq.astype(np.complex128))
            offsets = bank.feature_offsets()
            for row in range(iq.shape[0]):
                for c in range(bank.num_combinations):
                    kernel_index, dilation_index, count = bank.combination(c)
                    if bank.dilations[dilation_index] != 1:
                        continue
                    x = learned.channel_view(iq[row], bank.channels[c]).astype(np.int64).tolist()
                    for k in range(count):
                        expected = _naive_feature(x, kernel_index, bank.paddings[c], biases[offsets[c] + k])
                        self.assertEqual(float(features[row, offsets[c] + k]), np.float32(expected))
                        cases += 1
            if n_s >= 17:
                self.assertEqual(bank.dilations, (1, 2))
        self.assertGreaterEqual(cases, 1000)

    def test_proportion_above_matches_direct_count(self):
        rng = np.random.default_rng(9)
        output = rng.integers(-5, 6, size=(7, 40)).astype(np.float64)
        # Unsorted, repeated and tied with sample values.
        biases = np.array([3.0, -1.0, 3.0, 0.5, -6.0, 2.0, 5.0])
        direct = np.mean(output[:, :, np.newaxis] > biases, axis=1)
        np.testing.assert_array_equal(learned.proportion_above(output, biases), direct)


class TestRidge(unittest.TestCase):

    def test_separable_toy_set(self):
        features = np.array([[-2.0], [-1.0], [1.0], [2.0]] * 10)
        labels = np.array([0, 0, 1, 1] * 10)
        model = learned.train(features, labels, alphas=[1e-3, 1e-1, 10.0], cv_folds=5, seed=1)
        np.testing.assert_array_equal(np.sign(learned.score(model, features)) > 0, labels == 1)

    def test_large_penalty_shrinks_weights(self):
        rng = np.random.default_rng(5)
        features = rng.normal(size=(40, 6))
        labels = np.array([0, 1] * 20)
        model = learned.train(features, labels, alphas=[1e12])
        self.assertTrue(np.all(np.abs(model.weights) < 1e-6))
        np.testing.assert_allclose(learned.score(model, features), model.intercept, atol=1e-5)

    def test_standardization(self):
        rng = np.random.default_rng(6)
        features = rng.normal(3.0, 2.0, size=(50, 4))
        labels = np.array([0, 1] * 25)
        model = learned.train(features, labels, alphas=[1.0])
        np.testing.assert_allclose(model.means, features.mean(axis=0))
        self.assertTrue(np.all(model.scales > 0))
        self.assertAlmostEqual(float(learned.score(model, model.means)), model.intercept, places=12)

    def test_single_class_rejected(self):
        with self.assertRaises(ValueError):
            learned.train(np.ones((10, 2)), np.ones(10), alphas=[1.0])

    def test_score_properties(self):
        zero = LinearModel(weights=np.zeros(3), intercept=0.25, means=np.zeros(3), scales=np.ones(3), alpha=1.0)
        self.assertEqual(learned.score(zero, np.array([5.0, -2.0, 9.0])), 0.25)
        model = LinearModel(weights=np.array([0.5, -1.0]), intercept=0.0, means=np.zeros(2), scales=np.ones(2), alpha=1.0)
        self.assertGreater(learned.score(model, np.array([1.1, 0.0])), learned.score(model, np.array([1.0, 0.0])))
        with self.assertRaises(ValueError):
            learned.score(model, np.ones(3))


class TestKernelFeatureDetector(unittest.TestCase):

    def _dataset(self, seed=0):
        rng = np.random.default_rng(seed)
        n_s, m = 64, 80
        noise = 0.4 * _noise(rng, m, n_s)
        tone = np.exp(2j * math.pi * 0.05 * np.arange(n_s))
        labels = np.array([0, 1] * (m // 2))
        y = noise + labels[:, np.newaxis] * tone
        peak = np.max(np.abs(y), axis=1, keepdims=True)
        return y / peak, labels

    def test_fit_is_deterministic(self):
        X, y = self._dataset()
        a = KernelFeatureDetector(num_features=252, seed=4, alphas=[0.1, 1.0, 10.0], cv_folds=3,
                                  bias_fit_examples=20).fit(X, y)
        b = KernelFeatureDetector(num_features=252, seed=4, alphas=[0.1, 1.0, 10.0], cv_folds=3,
                                  bias_fit_examples=20).fit(X, y)
        self.assertEqual(a.bank_.biases.tobytes(), b.bank_.biases.tobytes())
        self.assertEqual(a.model_.weights.tobytes(), b.model_.weights.tobytes())
        self.assertEqual(a.decision_function(X).tobytes(), b.decision_function(X).tobytes())

    def test_separates_tone_from_noise(self):
        X, y = self._dataset()
        detector = KernelFeatureDetector(num_features=252, seed=1, alphas=[0.1, 1.0, 10.0, 100.0], cv_folds=4).fit(X, y)
        accuracy = float(np.mean((detector.decision_function(X) > 0) == (y == 1)))
        self.assertGreater(accuracy, 0.9)

    def test_chunked_transform_matches(self):
        X, y = self._dataset(seed=2)
        detector = KernelFeatureDetector(num_features=168, seed=2, alphas=[1.0], cv_folds=2).fit(X, y)
        whole = learned.transform(detector.bank_, X)
        chunked = KernelFeatureDetector.from_artifacts(detector.bank_, detector.model_, workers=3)
        chunked.chunk_size = 16
        np.testing.assert_array_equal(chunked.transform(X), whole)
        np.testing.assert_array_equal(chunked.decision_function(X), detector.decision_function(X))


if __name__ == '__main__':
    unittest.main()
