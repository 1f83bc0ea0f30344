import sys
import os
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', 'src')))

import logging
import unittest

import numpy as np

from sdlab.models.run_results import DetectorKind
from sdlab.models.signal_params import SimulationParams
from sdlab.processors import calibrator
from sdlab.utils import dataset_io
from sdlab.utils.exceptions import CalibrationToleranceError

SMALL_SIM = SimulationParams(n_s=32, settle=100)


def _logger():
    logger = logging.getLogger('sdlab.tests.calibrator')
    if not logger.handlers:
        logger.addHandler(logging.NullHandler())
    return logger


class TestCalibrate(unittest.TestCase):

    def test_order_statistic(self):
        result = calibrator.calibrate(np.arange(10_000, dtype=float), 0.01, 0.001, DetectorKind.ENERGY)
        self.assertEqual(result.gamma, 9899.0)
        self.assertEqual(result.achieved_pfa, 0.01)
        self.assertEqual(result.n_trials, 10_000)
        self.assertIsNone(result.signal_kind)

    def test_order_is_irrelevant(self):
        scores = np.random.default_rng(0).permutation(10_000).astype(float)
        self.assertEqual(calibrator.calibrate(scores, 0.01, 0.001, DetectorKind.FISHER_FFT).gamma, 9899.0)

    def test_gaussian_quantile(self):
        scores = np.random.default_rng(1).normal(size=200_000)
        result = calibrator.calibrate(scores, 0.01, 0.001, DetectorKind.MATCHED_FILTER, 'qpsk')
        self.assertAlmostEqual(result.gamma, 2.326, delta=0.03)
        self.assertAlmostEqual(result.achieved_pfa, 0.01, delta=1e-4)
        self.assertEqual(result.signal_kind, 'qpsk')

    def test_too_few_trials(self):
        with self.assertRaises(CalibrationToleranceError) as ctx:
            calibrator.calibrate(np.arange(500, dtype=float), 0.01, 0.001, DetectorKind.ENERGY)
        self.assertEqual(ctx.exception.required_trials, 1000)
        self.assertEqual(ctx.exception.exit_code, 3)

    def test_ties_miss_tolerance(self):
        with self.assertRaises(CalibrationToleranceError) as ctx:
            calibrator.calibrate(np.zeros(2000), 0.01, 0.001, DetectorKind.LEARNED)
        self.assertGreater(ctx.exception.required_trials, 2000)

    def test_invalid_input(self):
        with self.assertRaises(ValueError):
            calibrator.calibrate([], 0.01, 0.001, DetectorKind.ENERGY)
        with self.assertRaises(ValueError):
            calibrator.calibrate(np.arange(100.0), 1.5, 0.001, DetectorKind.ENERGY)
        with self.assertRaises(ValueError):
            calibrator.calibrate(np.array([1.0, np.nan] * 1000), 0.01, 0.001, DetectorKind.ENERGY)

    def test_required_trials(self):
        self.assertEqual(calibrator.required_trials(0.01, 0.001), 38032)
        self.assertEqual(calibrator.required_trials(0.1, 0.5), 100)


class TestVerifyPfa(unittest.TestCase):

    def test_compliant_estimate(self):
        check = calibrator.verify_pfa(np.arange(1000, dtype=float), 989.5)
        self.assertEqual(check.pfa, 0.01)
        self.assertTrue(check.compliant)
        self.assertLess(check.ci_lo, 0.01)
        self.assertGreater(check.ci_hi, 0.01)
        self.assertEqual(check.n_trials, 1000)

    def test_out_of_band(self):
        check = calibrator.verify_pfa(np.arange(1000, dtype=float), 899.5)
        self.assertEqual(check.pfa, 0.1)
        self.assertFalse(check.compliant)

    def test_infinite_thresholds(self):
        scores = np.random.default_rng(2).normal(size=500)
        self.assertEqual(calibrator.verify_pfa(scores, np.inf).pfa, 0.0)
        self.assertEqual(calibrator.verify_pfa(scores, -np.inf).pfa, 1.0)

    def test_empty(self):
        with self.assertRaises(ValueError):
            calibrator.verify_pfa([], 1.0)


class TestNoisePopulation(unittest.TestCase):

    def _population(self, workers):
        chunks = calibrator.noise_population(50, ['sine', 'ofdm'], 'unified', [-5, 0, 5], 11, 'calibration',
                                             SMALL_SIM, chunk_size=16, workers=workers)
        return np.concatenate(list(chunks))

    def test_identical_across_worker_counts(self):
        single = self._population(1)
        pooled = self._population(3)
        self.assertEqual(len(single), 50)
        self.assertEqual(single.tobytes(), pooled.tobytes())

    def test_records_are_noise_only_with_decoy_templates(self):
        rows = self._population(1)
        hypothesis, _ = dataset_io.decode_label(rows['label'])
        self.assertTrue(np.all(hypothesis == 0))
        self.assertEqual(sorted(set(rows['snr_db'].tolist())), [-5, 0, 5])
        templates = dataset_io.to_complex(rows['template'])
        self.assertTrue(np.all(np.linalg.norm(templates, axis=1) > 0))

    def test_learned_needs_artifacts(self):
        chunk = next(iter(calibrator.noise_population(4, ['sine'], 'sine', [0], 1, 'calibration', SMALL_SIM)))
        with self.assertRaises(ValueError):
            calibrator.score_chunk(chunk, [DetectorKind.LEARNED])

    def test_template_free_population(self):
        rows = np.concatenate(list(calibrator.noise_population(
            30, ['qpsk'], 'qpsk', [-5, 0], 11, 'calibration', SMALL_SIM, chunk_size=8, templates=False)))
        self.assertEqual(len(rows), 30)
        hypothesis, _ = dataset_io.decode_label(rows['label'])
        self.assertTrue(np.all(hypothesis == 0))
        self.assertTrue(np.all(rows['template'] == 0))
        decoys = self._population(1)
        self.assertFalse(set(rows['seq_seed'].tolist()) & set(decoys['seq_seed'].tolist()))

    def test_matched_filter_leaves_template_free_rows_unscored(self):
        chunk = self._population(1)[:10].copy()
        chunk['template'][3] = 0
        scores = calibrator.score_chunk(chunk, [DetectorKind.MATCHED_FILTER, DetectorKind.ENERGY])
        mf = scores[DetectorKind.MATCHED_FILTER]
        self.assertTrue(np.isnan(mf[3]))
        self.assertTrue(np.all(np.isfinite(np.delete(mf, 3))))
        self.assertTrue(np.all(np.isfinite(scores[DetectorKind.ENERGY])))

    def test_population_scores_cover_every_detector(self):
        detectors = [DetectorKind.ENERGY, DetectorKind.MATCHED_FILTER, DetectorKind.FISHER_FFT]
        scores = calibrator.population_scores(detectors, 40, ['sine'], 'sine', [0], 4, 'verify', SMALL_SIM,
                                              chunk_size=16)
        self.assertEqual(set(scores), set(detectors))
        for values in scores.values():
            self.assertEqual(values.shape, (40,))
            self.assertTrue(np.all(np.isfinite(values)))


class TestCalibrateDetectors(unittest.TestCase):

    def test_classical_thresholds(self):
        detectors = [DetectorKind.ENERGY, DetectorKind.FISHER_FFT, DetectorKind.MATCHED_FILTER]
        results = calibrator.calibrate_detectors(
            detectors, ['sine'], 'sine', [-5, 0], 3, SMALL_SIM, target_pfa=0.05, tolerance=0.02,
            n_trials=200, logger=_logger(), chunk_size=64, workers=2,
        )
        self.assertEqual(list(results), detectors)
        for detector, result in results.items():
            self.assertTrue(np.isfinite(result.gamma))
            self.assertAlmostEqual(result.achieved_pfa, 0.05, delta=0.02)
        self.assertEqual(results[DetectorKind.MATCHED_FILTER].signal_kind, 'sine')
        self.assertLess(results[DetectorKind.FISHER_FFT].gamma, 1.0)

        checks = calibrator.verify_detectors(
            results, ['sine'], 'sine', [-5, 0], 3, SMALL_SIM, n_trials=200, logger=_logger(), band=(0.0, 0.2),
        )
        for check in checks.values():
            self.assertEqual(check.n_trials, 200)
            self.assertTrue(check.compliant)

    def test_insufficient_trials_raise(self):
        with self.assertRaises(CalibrationToleranceError):
            calibrator.calibrate_detectors(
                [DetectorKind.ENERGY], ['sine'], 'sine', [0], 3, SMALL_SIM, target_pfa=0.01, tolerance=0.005,
                n_trials=100, logger=_logger(),
            )


if __name__ == '__main__':
    unittest.main()
