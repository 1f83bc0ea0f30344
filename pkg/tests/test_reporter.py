import sys
import os
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', 'src')))

import json
import logging
import shutil
import tempfile
import unittest

from sdlab.models.run_results import BinResult, CalibrationResult, DetectorKind, EvalCurve, RunManifest
from sdlab.processors import reporter


def _logger():
    logger = logging.getLogger('sdlab.tests.reporter')
    if not logger.handlers:
        logger.addHandler(logging.NullHandler())
    return logger


def _curve(detector, kind, pds, trained_on=None, experiment='qpsk_lab'):
    calibration = CalibrationResult(detector=detector, gamma=2.5, target_pfa=0.01, tolerance=0.001,
                                    achieved_pfa=0.0102, n_trials=40000)
    bins = [BinResult.from_counts(snr, round(p * 50), 50) for snr, p in zip(range(-6, -6 + len(pds)), pds)]
    return EvalCurve(experiment=experiment, detector=detector, signal_kind=kind, trained_on=trained_on,
                     bins=bins, calibration=calibration)


class TestReporter(unittest.TestCase):

    def setUp(self):
        self.test_dir = tempfile.mkdtemp()
        self.curves = [
            _curve(DetectorKind.ENERGY, 'qpsk', [0.1, 0.4, 0.8]),
            _curve(DetectorKind.FISHER_FFT, 'qpsk', [0.3, 0.6, 0.9]),
            _curve(DetectorKind.LEARNED, 'qpsk', [0.2, 0.5, 0.95], trained_on='qpsk'),
        ]
        self.manifest = RunManifest(experiment='qpsk_lab', tool_version='1.0.0', master_seed=42,
                                    config_hash='abc', signal_kinds=['qpsk'],
                                    detectors=[DetectorKind.ENERGY, DetectorKind.FISHER_FFT, DetectorKind.LEARNED])

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def test_curves_frame(self):
        frame = reporter.curves_frame(self.curves)
        self.assertEqual(list(frame.columns), reporter.CURVE_COLUMNS)
        self.assertEqual(len(frame), 9)
        self.assertEqual(frame.iloc[0]['detector'], 'energy')
        self.assertEqual(frame.iloc[0]['snr_db'], -6)
        self.assertAlmostEqual(frame.iloc[0]['pfa_achieved'], 0.0102)

    def test_csv_round_trip(self):
        path = reporter.write_csv(reporter.curves_frame(self.curves), os.path.join(self.test_dir, 'c.csv'))
        frame = reporter.read_curves_csv(path)
        self.assertEqual(list(frame.columns), reporter.CURVE_COLUMNS)
        self.assertEqual(frame['pd'].tolist()[3:6], [0.3, 0.6, 0.9])
        self.assertFalse(os.path.exists(path + '.partial'))

    def test_curves_json_round_trip(self):
        path = reporter.save_curves(self.curves, os.path.join(self.test_dir, 'curves.json'))
        loaded = reporter.load_curves(path)
        self.assertEqual(loaded, self.curves)

    def test_chart_is_deterministic(self):
        a = reporter.write_chart(self.curves, os.path.join(self.test_dir, 'a.svg'), 'qpsk_lab')
        b = reporter.write_chart(self.curves, os.path.join(self.test_dir, 'b.svg'), 'qpsk_lab')
        with open(a, 'rb') as fa, open(b, 'rb') as fb:
            content = fa.read()
            self.assertEqual(content, fb.read())
        self.assertIn(b'<svg', content)

    def test_report_writes_all_artifacts(self):
        paths = reporter.report(self.curves, self.test_dir, self.manifest, _logger())
        self.assertEqual(set(paths), {'curves_csv', 'chart_svg', 'summary_csv', 'manifest_json'})
        for path in paths.values():
            self.assertTrue(os.path.isfile(path))
        self.assertTrue(paths['chart_svg'].endswith('qpsk_lab_pd_vs_snr.svg'))

        summary = reporter.read_curves_csv(paths['summary_csv'])
        self.assertEqual(len(summary), 1)
        self.assertAlmostEqual(summary.iloc[0]['energy_snr_db'], -4.75)
        self.assertAlmostEqual(summary.iloc[0]['fisher_snr_db'], -5 - 1 / 3)
        self.assertAlmostEqual(summary.iloc[0]['learned_advantage_db'], 0.25)

        with open(paths['manifest_json'], 'r', encoding='utf-8') as f:
            self.assertEqual(json.load(f)['master_seed'], 42)

    def test_report_rejects_empty(self):
        with self.assertRaises(ValueError):
            reporter.report([], self.test_dir, self.manifest, _logger())

    def test_pooled_energy_replaces_per_kind(self):
        curves = [
            _curve(DetectorKind.ENERGY, 'sine', [0.1, 0.5]),
            _curve(DetectorKind.ENERGY, 'qpsk', [0.1, 0.5]),
            _curve(DetectorKind.ENERGY, 'unified', [0.1, 0.5]),
            _curve(DetectorKind.LEARNED, 'sine', [0.3, 0.7], trained_on='unified'),
        ]
        drawn = reporter.chart_curves(curves)
        self.assertEqual([c.label for c in drawn], ['energy:unified', 'learned:sine'])
        self.assertEqual(reporter.chart_curves(self.curves), self.curves)

    def test_comparison_needs_both_models(self):
        self.assertIsNone(reporter.report_comparison(self.curves, self.test_dir, _logger()))
        curves = self.curves + [_curve(DetectorKind.LEARNED, 'qpsk', [0.1, 0.3, 0.7], trained_on='unified',
                                       experiment='unified_lab')]
        path = reporter.report_comparison(curves, self.test_dir, _logger())
        frame = reporter.read_curves_csv(path)
        self.assertEqual(frame.iloc[0]['signal_kind'], 'qpsk')
        self.assertGreater(frame.iloc[0]['unified_loss_db'], 0)


if __name__ == '__main__':
    unittest.main()
