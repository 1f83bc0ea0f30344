import sys
import os
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', 'src')))

import math
import unittest

import numpy as np
from scipy import signal

from sdlab.generators import frontend
from sdlab.models.signal_params import BasebandSequence, PassbandSequence

F_S = 2.048e6


def _n(count):
    # Mixer index convention of the downconverter: n = 1..N.
    return np.arange(1, count + 1, dtype=np.float64)


class TestNoise(unittest.TestCase):

    def test_sigma_schedule(self):
        self.assertEqual(frontend.noise_sigma(0), 1.0)
        self.assertAlmostEqual(frontend.noise_sigma(-30) ** 2, 1000.0, places=9)
        self.assertAlmostEqual(frontend.noise_sigma(5) ** 2, 10 ** -0.5, places=12)

    def test_noise_variance(self):
        silent = PassbandSequence(samples=np.zeros(1_000_000), kind='sine', power=0.0)
        noisy = frontend.add_noise(silent, 0.0, np.random.default_rng(11), signal_present=False)
        self.assertAlmostEqual(float(np.var(noisy.samples)), 1.0, delta=0.005)
        self.assertEqual(noisy.kind, 'noise')

    def test_signal_present_adds(self):
        x = PassbandSequence(samples=np.ones(100), kind='sine', power=1.0)
        a = frontend.add_noise(x, 10.0, np.random.default_rng(4), signal_present=True)
        b = frontend.add_noise(x, 10.0, np.random.default_rng(4), signal_present=False)
        np.testing.assert_allclose(a.samples - 1.0, b.samples, atol=1e-12)


class TestButterworth(unittest.TestCase):

    def setUp(self):
        self.filt = frontend.design_butterworth(5, 40_000.0, F_S)

    def test_dc_gain(self):
        self.assertAlmostEqual(self.filt.dc_gain, 1.0, delta=1e-9)

    def test_cutoff_attenuation(self):
        self.assertAlmostEqual(self.filt.magnitude_db(40_000.0), -3.01, delta=0.05)

    def test_stable(self):
        self.assertTrue(np.all(np.abs(self.filt.poles) < 1.0))

    def test_matches_reference_design(self):
        _, poles, _ = signal.butter(5, 40_000.0, btype='low', output='zpk', fs=F_S)
        # Odd orders carry a padding pole and zero at the origin in SOS form.
        ours = self.filt.poles[np.abs(self.filt.poles) > 1e-12]
        zeros = self.filt.zeros[np.abs(self.filt.zeros) > 1e-12]
        np.testing.assert_allclose(np.sort_complex(ours), np.sort_complex(poles), atol=1e-9)
        self.assertEqual(len(zeros), 5)
        np.testing.assert_allclose(zeros, -1.0, atol=1e-3)

    def test_impulse_response_decays(self):
        length = int(10 * 5 / (40_000.0 / F_S))
        impulse = np.zeros(length)
        impulse[0] = 1.0
        response = np.abs(self.filt.apply(impulse))
        self.assertLess(response[-1], 1e-9 * response.max())

    def test_rejects_bad_designs(self):
        with self.assertRaises(ValueError):
            frontend.design_butterworth(0, 40_000.0, F_S)
        with self.assertRaises(ValueError):
            frontend.design_butterworth(5, F_S / 2, F_S)

    def test_design_is_immutable(self):
        with self.assertRaises(ValueError):
            self.filt.sos[0, 0] = 1.0

    def test_read_only_design_still_filters(self):
        self.assertFalse(self.filt.sos.flags.writeable)
        step = self.filt.apply(np.ones(4000))
        self.assertAlmostEqual(float(step[-1]), 1.0, delta=1e-6)
        self.assertFalse(self.filt.sos.flags.writeable)


class TestDownconvert(unittest.TestCase):

    def setUp(self):
        self.filt = frontend.design_butterworth(5, 40_000.0, F_S)

    def test_zero_in_zero_out(self):
        iq = frontend.downconvert(np.zeros(700), 75_000.0, self.filt, 500)
        self.assertEqual(iq.shape, (500,))
        self.assertTrue(np.all(iq == 0))

    def test_tone_at_estimate_is_constant(self):
        f_c = 74_500.0
        x = math.sqrt(2) * np.cos(2 * math.pi * f_c * _n(700) / F_S)
        magnitude = np.abs(frontend.downconvert(x, f_c, self.filt, 500))
        np.testing.assert_allclose(magnitude, math.sqrt(2) / 2, rtol=0.02)

    def test_frequency_offset_rotation(self):
        x = math.sqrt(2) * np.cos(2 * math.pi * 75_000.0 * _n(700) / F_S)
        iq = frontend.downconvert(x, 74_000.0, self.filt, 500)
        step = np.angle(iq[1:] * np.conj(iq[:-1]))
        self.assertAlmostEqual(abs(float(np.mean(step))), 2 * math.pi * 1000.0 / F_S,
                               delta=0.01 * 2 * math.pi * 1000.0 / F_S)

    def test_linearity(self):
        rng = np.random.default_rng(8)
        x1, x2 = rng.normal(size=700), rng.normal(size=700)
        a = -2.5
        lhs = frontend.downconvert(a * x1 + x2, 75_300.0, self.filt, 500)
        rhs = a * frontend.downconvert(x1, 75_300.0, self.filt, 500) + frontend.downconvert(x2, 75_300.0, self.filt, 500)
        np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-9)

    def test_batch_matches_single(self):
        rng = np.random.default_rng(9)
        batch = rng.normal(size=(3, 700))
        together = frontend.downconvert(batch, 75_000.0, self.filt, 500)
        for row in range(3):
            np.testing.assert_allclose(together[row], frontend.downconvert(batch[row], 75_000.0, self.filt, 500))

    def test_too_short(self):
        with self.assertRaises(ValueError):
            frontend.downconvert(np.zeros(100), 75_000.0, self.filt, 500)

    def test_dcv_wraps_sequence(self):
        x = PassbandSequence(samples=np.ones(700), kind='sine', power=1.0)
        b = frontend.dcv(x, 75_000.0, self.filt, 500, sigma=0.5, label=1, snr_db=6)
        self.assertIsInstance(b, BasebandSequence)
        self.assertEqual(b.iq.shape, (500,))
        self.assertEqual(b.f_c, 75_000.0)

    def test_noise_variance_stable(self):
        filt = self.filt
        estimates = []
        for seed in (1, 2):
            noise = np.random.default_rng(seed).normal(0.0, 3.0, size=(4000, 700))
            estimates.append(float(np.var(frontend.downconvert(noise, 75_000.0, filt, 500))))
        self.assertAlmostEqual(estimates[0] / estimates[1], 1.0, delta=0.02)


class TestNormalizeMl(unittest.TestCase):

    def test_hand_example(self):
        out = frontend.normalize_ml(np.array([2 + 0j, 0 + 1j]))
        np.testing.assert_allclose(out, [1 + 0j, 0 + 0.5j])

    def test_idempotent_and_phase_preserving(self):
        rng = np.random.default_rng(3)
        iq = rng.normal(size=64) + 1j * rng.normal(size=64)
        once = frontend.normalize_ml(iq)
        self.assertAlmostEqual(float(np.max(np.abs(once))), 1.0, delta=1e-12)
        np.testing.assert_allclose(frontend.normalize_ml(once), once, atol=1e-15)
        np.testing.assert_allclose(np.angle(once), np.angle(iq), atol=1e-12)

    def test_rows_normalized_independently(self):
        batch = np.array([[1 + 0j, 2 + 0j], [0 + 4j, 1 + 0j]])
        out = frontend.normalize_ml(batch)
        np.testing.assert_allclose(np.max(np.abs(out), axis=1), [1.0, 1.0])

    def test_sequence_input(self):
        b = BasebandSequence(iq=np.array([3 + 4j, 1 + 0j]), sigma=1.0)
        out = frontend.normalize_ml(b)
        self.assertIsInstance(out, BasebandSequence)
        self.assertAlmostEqual(abs(out.iq[0]), 1.0)
        self.assertEqual(b.iq[0], 3 + 4j)

    def test_all_zero_rejected(self):
        with self.assertRaises(ValueError):
            frontend.normalize_ml(np.zeros(8, dtype=complex))


if __name__ == '__main__':
    unittest.main()
