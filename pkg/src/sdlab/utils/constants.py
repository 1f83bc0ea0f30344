# -*- coding: utf-8 -*-
"""Simulation constants, signal-kind codes and on-disk format identifiers."""

import math

# --- Simulation parameters (defaults for config/sampleconfig.yaml) ---
SAMPLE_RATE_HZ = 2.048e6
TRUE_CARRIER_HZ = 75_000.0
CARRIER_ESTIMATE_RANGE_HZ = (74_000.0, 76_000.0)
PHASE_RANGE = (-math.pi, math.pi)
SAMPLES_PER_SEQUENCE = 500
SETTLE_SAMPLES = 200
SNR_RANGE_DB = (-30, 5)
SEQUENCES_PER_BIN = 1000

LPF_CUTOFF_HZ = 40_000.0
LPF_ORDER = 5

QPSK_SYMBOL_RATE_HZ = 25_000.0
QPSK_ROLLOFF = 0.4
RRC_SPAN_SYMBOLS = 8

OFDM_NUM_CARRIERS = 16
OFDM_SUBCARRIER_SPACING_HZ = 2_000.0

# --- Learned detector ---
NUM_KERNELS = 84
KERNEL_LENGTH = 9
DEFAULT_NUM_FEATURES = 2520
MAX_DILATIONS_PER_KERNEL = 32

# --- Calibration ---
DEFAULT_TARGET_PFA = 0.01
DEFAULT_PFA_TOLERANCE = 0.001
DEFAULT_CALIBRATION_TRIALS = 100_000
DEFAULT_VERIFY_TRIALS = 50_000
MIN_EXCEEDANCES = 10
Z_95 = 1.96

# --- Signal kinds ---
SIGNAL_KIND_CODES = {
    'sine': 0,
    'qpsk': 1,
    'ofdm': 2,
    'unified': 3,
}
SIGNAL_KINDS = ('sine', 'qpsk', 'ofdm')
KIND_BY_CODE = {code: kind for kind, code in SIGNAL_KIND_CODES.items()}

LABEL_NOISE_ONLY = 0
LABEL_SIGNAL_PRESENT = 1

SPLIT_CODES = {
    'train': 0,
    'validation': 1,
    'calibration': 2,
    'verify': 3,
    # Template-free noise-only populations.
    'calibration_noise': 4,
    'verify_noise': 5,
}

# --- File formats ---
DATASET_MAGIC = b'SDLB'
DATASET_VERSION = 1
DATASET_SUFFIX = '.sdlb'
MANIFEST_SUFFIX = '.manifest.yaml'
MODEL_MAGIC = b'SDLM'
MODEL_VERSION = 1
MODEL_SUFFIX = '.sdlm'
PARTIAL_SUFFIX = '.partial'

# --- CLI exit codes ---
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_CALIBRATION_ERROR = 3
EXIT_DATA_INTEGRITY_ERROR = 4
