import sys
import os
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', 'src')))

import logging
import shutil
import struct
import tempfile
import unittest

import numpy as np

from sdlab.generators import dataset_generator
from sdlab.generators.trial_builder import build_trial
from sdlab.models.signal_params import DatasetSpec, SimulationParams
from sdlab.utils import dataset_io
from sdlab.utils.exceptions import DataIntegrityError
from sdlab.utils.file_utils import sha256_file

SMALL_SIM = SimulationParams(n_s=32, settle=100)


def _logger():
    logger = logging.getLogger('sdlab.tests.dataset')
    if not logger.handlers:
        logger.addHandler(logging.NullHandler())
    return logger


class TestDatasetFiles(unittest.TestCase):

    def setUp(self):
        self.test_dir = tempfile.mkdtemp()
        self.spec = DatasetSpec(kind='qpsk', snr_grid=(-5, 0, 5), per_bin=4, master_seed=42,
                                split='train', simulation=SMALL_SIM)
        self.path = os.path.join(self.test_dir, 'qpsk_train.sdlb')
        self.manifest = dataset_generator.generate(self.spec, self.path, _logger())

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def test_header_and_manifest(self):
        header = dataset_io.verify_dataset(self.path)
        self.assertEqual(header['record_count'], 24)
        self.assertEqual(header['n_s'], 32)
        self.assertEqual(header['signal_kind'], 'qpsk')
        self.assertEqual(header['master_seed'], 42)
        self.assertEqual(header['spec_hash'], self.spec.spec_hash().hex())
        self.assertEqual(self.manifest['noise_only_count'], 12)
        self.assertEqual(self.manifest['signal_present_count'], 12)
        self.assertEqual(dataset_io.read_manifest(self.path)['content_sha256'], sha256_file(self.path))
        expected_size = dataset_io.HEADER.size + 24 * dataset_io.record_dtype(32).itemsize
        self.assertEqual(os.path.getsize(self.path), expected_size)

    def test_records_in_generation_order(self):
        records = list(dataset_io.load(self.path))
        self.assertEqual([r.snr_db for r in records[:8]], [-5] * 8)
        self.assertEqual([r.label for r in records[:8]], [0] * 4 + [1] * 4)
        for record in records:
            self.assertEqual(record.kind, 'qpsk')
            self.assertAlmostEqual(float(np.max(np.abs(record.iq_norm))), 1.0, delta=1e-6)
            if record.signal_present:
                self.assertGreater(float(np.linalg.norm(record.template)), 0.0)
            else:
                self.assertTrue(np.all(record.template == 0))

    def test_record_regenerates_from_its_seed(self):
        record = list(dataset_io.load(self.path, bins=[0], labels=[1]))[2]
        rebuilt = build_trial('qpsk', record.seq_seed, record.snr_db, True, SMALL_SIM)
        np.testing.assert_allclose(record.iq_raw, rebuilt.iq_raw, rtol=1e-6, atol=1e-6)
        self.assertEqual(np.float32(rebuilt.f_c), np.float32(record.f_c))

    def test_filters(self):
        selected = list(dataset_io.load(self.path, bins=[5], labels=[0]))
        self.assertEqual(len(selected), 4)
        self.assertTrue(all(r.snr_db == 5 and r.label == 0 for r in selected))
        self.assertEqual(list(dataset_io.load(self.path, bins=[99])), [])
        self.assertEqual(list(dataset_io.load(self.path, kinds=['sine'])), [])

    def test_load_arrays(self):
        arrays = dataset_io.load_arrays(self.path, fields=('iq_norm', 'template'), labels=[1])
        self.assertEqual(arrays['iq_norm'].shape, (12, 32))
        self.assertEqual(arrays['template'].dtype, np.complex128)
        self.assertTrue(np.all(arrays['label'] == 1))
        self.assertEqual(len(set(arrays['seq_seed'].tolist())), 12)

    def test_refuses_overwrite(self):
        with self.assertRaises(FileExistsError):
            dataset_generator.generate(self.spec, self.path, _logger())

    def test_checksum_mismatch(self):
        with open(self.path, 'r+b') as f:
            f.seek(-3, os.SEEK_END)
            f.write(b'\x00\x01\x02')
        with self.assertRaises(DataIntegrityError):
            dataset_io.verify_dataset(self.path)
        with self.assertRaises(DataIntegrityError):
            list(dataset_io.load(self.path))

    def test_version_mismatch(self):
        with open(self.path, 'r+b') as f:
            f.seek(4)
            f.write(struct.pack('<H', 7))
        with self.assertRaises(DataIntegrityError):
            dataset_io.read_header(self.path)

    def test_missing_manifest(self):
        os.remove(dataset_io.manifest_path_for(self.path))
        with self.assertRaises(DataIntegrityError):
            dataset_io.verify_dataset(self.path)

    def test_label_byte(self):
        byte = dataset_io.encode_label(1, 'ofdm')
        hypothesis, kind_code = dataset_io.decode_label(np.array([byte]))
        self.assertEqual(int(hypothesis[0]), 1)
        self.assertEqual(int(kind_code[0]), 2)


if __name__ == '__main__':
    unittest.main()
