# -*- coding: utf-8 -*-
"""
Learned-model files.

Layout (little-endian):
    magic "SDLM" | u16 version | u32 header length | UTF-8 JSON header
    | f64 biases | f64 feature means | f64 feature scales | f64 weights
The JSON header carries the bank skeleton, the ridge parameter, the intercept
and the array lengths, so a file fully rebuilds (KernelBank, LinearModel).
"""

import json
import os
import struct
from typing import Tuple

import numpy as np

import sdlab
from sdlab.detectors.learned import KernelBank, LinearModel
from sdlab.utils.constants import MODEL_MAGIC, MODEL_VERSION
from sdlab.utils.exceptions import DataIntegrityError
from sdlab.utils.file_utils import atomic_output

PREAMBLE = struct.Struct('<4sHI')
ARRAY_ORDER = ('biases', 'means', 'scales', 'weights')


def save_model(path: str, bank: KernelBank, model: LinearModel, logger=None) -> str:
    if not bank.is_fitted:
        raise ValueError("Cannot save a kernel bank without fitted biases.")
    if model.num_features != bank.num_features:
        raise ValueError(
            f"Model has {model.num_features} weights but the bank produces {bank.num_features} features."
        )

    arrays = {
        'biases': bank.biases,
        'means': model.means,
        'scales': model.scales,
        'weights': model.weights,
    }
    header = {
        'tool_version': sdlab.__version__,
        'n_s': bank.n_s,
        'num_features': bank.num_features,
        'seed': bank.seed,
        'dilations': list(bank.dilations),
        'features_per_dilation': list(bank.features_per_dilation),
        'channels': list(bank.channels),
        'paddings': list(bank.paddings),
        'fit_indices': list(bank.fit_indices) if bank.fit_indices is not None else None,
        'alpha': model.alpha,
        'intercept': model.intercept,
        'array_lengths': {name: int(arrays[name].shape[0]) for name in ARRAY_ORDER},
    }
    header_bytes = json.dumps(header, sort_keys=True).encode('utf-8')

    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with atomic_output(path) as partial_path:
        with open(partial_path, 'wb') as f:
            f.write(PREAMBLE.pack(MODEL_MAGIC, MODEL_VERSION, len(header_bytes)))
            f.write(header_bytes)
            for name in ARRAY_ORDER:
                f.write(np.asarray(arrays[name], dtype='<f8').tobytes())
    if logger:
        logger.info(f"Saved learned model ({bank.num_features} features, alpha={model.alpha:g}) to {path}")
    return path


def load_model(path: str) -> Tuple[KernelBank, LinearModel]:
    with open(path, 'rb') as f:
        raw = f.read()
    if len(raw) < PREAMBLE.size:
        raise DataIntegrityError(f"{path} is too short to be a model file.")
    magic, version, header_len = PREAMBLE.unpack_from(raw)
    if magic != MODEL_MAGIC:
        raise DataIntegrityError(f"{path} is not a model file (magic {magic!r}).")
    if version != MODEL_VERSION:
        raise DataIntegrityError(f"{path} has model version {version}; this build reads version {MODEL_VERSION}.")

    body_start = PREAMBLE.size + header_len
    try:
        header = json.loads(raw[PREAMBLE.size:body_start].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataIntegrityError(f"Corrupt model header in {path}: {e}")

    lengths = header['array_lengths']
    expected = body_start + 8 * sum(lengths[name] for name in ARRAY_ORDER)
    if len(raw) != expected:
        raise DataIntegrityError(f"{path} holds {len(raw)} bytes; its header describes {expected}.")

    arrays = {}
    offset = body_start
    for name in ARRAY_ORDER:
        arrays[name] = np.frombuffer(raw, dtype='<f8', count=lengths[name], offset=offset).astype(np.float64)
        offset += 8 * lengths[name]
    arrays['biases'].setflags(write=False)

    bank = KernelBank(
        n_s=header['n_s'],
        seed=header['seed'],
        dilations=tuple(header['dilations']),
        features_per_dilation=tuple(header['features_per_dilation']),
        channels=tuple(header['channels']),
        paddings=tuple(header['paddings']),
        biases=arrays['biases'],
        fit_indices=tuple(header['fit_indices']) if header['fit_indices'] is not None else None,
    )
    if bank.num_features != header['num_features']:
        raise DataIntegrityError(f"{path}: skeleton yields {bank.num_features} features, header says {header['num_features']}.")
    model = LinearModel(
        weights=arrays['weights'],
        intercept=float(header['intercept']),
        means=arrays['means'],
        scales=arrays['scales'],
        alpha=float(header['alpha']),
    )
    return bank, model
