# -*- coding: utf-8 -*-
"""
Binary dataset files: writing, integrity verification and filtered loading.

Layout (little-endian): a 56-byte header
    magic "SDLB" | u16 version | u16 signal-kind code | u32 N_s | u32 record count
    | u64 master seed | 32-byte spec hash
followed by fixed-size records
    u8 label | i8 snr_db | u64 seq_seed | f32 f_c | f32 phase | f32 timing offset
    | N_s f32 I/Q pairs of iq_raw | of iq_norm | of template.
The label byte holds the hypothesis in bit 0 and the signal-kind code in bits 4-7.
A YAML sidecar (<file>.manifest.yaml) duplicates the header and adds provenance
and the SHA-256 of the binary file.
"""

import os
import struct
from typing import Any, Collection, Dict, Iterable, Iterator, Optional, Sequence, Tuple

import numpy as np
import yaml

import sdlab
from sdlab.models.signal_params import DatasetRecord, DatasetSpec
from sdlab.utils.constants import (
    DATASET_MAGIC, DATASET_VERSION, KIND_BY_CODE, MANIFEST_SUFFIX, SIGNAL_KIND_CODES,
)
from sdlab.utils.exceptions import DataIntegrityError
from sdlab.utils.file_utils import atomic_output, sha256_file, write_text_atomic

HEADER = struct.Struct('<4sHHIIQ32s')


def record_dtype(n_s: int) -> np.dtype:
    """Packed structured dtype of one on-disk record."""
    return np.dtype([
        ('label', 'u1'),
        ('snr_db', 'i1'),
        ('seq_seed', '<u8'),
        ('f_c', '<f4'),
        ('phase', '<f4'),
        ('timing_offset', '<f4'),
        ('iq_raw', '<f4', (n_s, 2)),
        ('iq_norm', '<f4', (n_s, 2)),
        ('template', '<f4', (n_s, 2)),
    ])


def manifest_path_for(dataset_path: str) -> str:
    return dataset_path + MANIFEST_SUFFIX


# =================================================================================
#  Encoding helpers
# =================================================================================

def encode_label(label: int, kind: str) -> int:
    return (SIGNAL_KIND_CODES[kind] << 4) | (label & 0x1)


def decode_label(byte: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Splits label bytes into (hypothesis, kind code) arrays."""
    byte = np.asarray(byte, dtype=np.uint8)
    return byte & 0x1, byte >> 4


def to_pairs(iq: np.ndarray) -> np.ndarray:
    iq = np.asarray(iq)
    return np.stack([iq.real, iq.imag], axis=-1).astype('<f4')


def to_complex(pairs: np.ndarray) -> np.ndarray:
    pairs = np.asarray(pairs, dtype=np.float64)
    return pairs[..., 0] + 1j * pairs[..., 1]


def records_to_array(records: Iterable[DatasetRecord], n_s: int) -> np.ndarray:
    records = list(records)
    out = np.zeros(len(records), dtype=record_dtype(n_s))
    if not records:
        return out
    out['label'] = [encode_label(rec.label, rec.kind) for rec in records]
    out['snr_db'] = [rec.snr_db for rec in records]
    out['seq_seed'] = np.array([rec.seq_seed for rec in records], dtype=np.uint64)
    out['f_c'] = [rec.f_c for rec in records]
    out['phase'] = [rec.phase for rec in records]
    out['timing_offset'] = [rec.timing_offset for rec in records]
    out['iq_raw'] = to_pairs(np.stack([rec.iq_raw for rec in records]))
    out['iq_norm'] = to_pairs(np.stack([rec.iq_norm for rec in records]))
    out['template'] = to_pairs(np.stack([rec.template for rec in records]))
    return out


def row_to_record(row: np.void) -> DatasetRecord:
    hypothesis, kind_code = decode_label(row['label'])
    return DatasetRecord(
        label=int(hypothesis),
        kind=KIND_BY_CODE[int(kind_code)],
        snr_db=int(row['snr_db']),
        seq_seed=int(row['seq_seed']),
        f_c=float(row['f_c']),
        phase=float(row['phase']),
        timing_offset=float(row['timing_offset']),
        iq_raw=to_complex(row['iq_raw']),
        iq_norm=to_complex(row['iq_norm']),
        template=to_complex(row['template']),
    )


# =================================================================================
#  Writing
# =================================================================================

def write_dataset(path: str, spec: DatasetSpec, chunks: Iterable[np.ndarray], logger) -> Dict[str, Any]:
    """
    Streams structured record chunks to `path` (via a .partial file) behind
    the header, then writes the sidecar manifest. Returns the manifest dict.
    """
    if os.path.exists(path):
        raise FileExistsError(f"Refusing to overwrite existing dataset {path}.")

    n_s = spec.simulation.n_s
    expected = spec.record_count
    dtype = record_dtype(n_s)
    written = 0
    label_counts = {0: 0, 1: 0}

    with atomic_output(path) as partial_path:
        with open(partial_path, 'wb') as f:
            f.write(HEADER.pack(
                DATASET_MAGIC, DATASET_VERSION, SIGNAL_KIND_CODES[spec.kind], n_s,
                expected, spec.master_seed, spec.spec_hash(),
            ))
            for chunk in chunks:
                if chunk.dtype != dtype:
                    raise ValueError("Record chunk dtype does not match the dataset layout.")
                f.write(chunk.tobytes())
                written += len(chunk)
                hypothesis, _ = decode_label(chunk['label'])
                label_counts[1] += int(hypothesis.sum())
                label_counts[0] += int(len(chunk) - hypothesis.sum())
            if written != expected:
                raise DataIntegrityError(f"Wrote {written} records but the dataset calls for {expected}.")

    manifest = {
        'magic': DATASET_MAGIC.decode('ascii'),
        'version': DATASET_VERSION,
        'signal_kind': spec.kind,
        'signal_kind_code': SIGNAL_KIND_CODES[spec.kind],
        'n_s': n_s,
        'record_count': written,
        'master_seed': spec.master_seed,
        'spec_hash': spec.spec_hash().hex(),
        'split': spec.split,
        'snr_grid': list(spec.snr_grid),
        'per_bin': spec.per_bin,
        'noise_only_count': label_counts[0],
        'signal_present_count': label_counts[1],
        'simulation': spec.simulation.model_dump(mode='json'),
        'tool_version': sdlab.__version__,
        'content_sha256': sha256_file(path),
    }
    write_text_atomic(manifest_path_for(path), yaml.safe_dump(manifest, sort_keys=False))
    logger.info(f"Wrote {written} records to {path} (sha256 {manifest['content_sha256'][:12]}...)")
    return manifest


# =================================================================================
#  Reading
# =================================================================================

def read_header(path: str) -> Dict[str, Any]:
    with open(path, 'rb') as f:
        raw = f.read(HEADER.size)
    if len(raw) != HEADER.size:
        raise DataIntegrityError(f"{path} is too short to hold a dataset header.")
    magic, version, kind_code, n_s, count, seed, spec_hash = HEADER.unpack(raw)
    if magic != DATASET_MAGIC:
        raise DataIntegrityError(f"{path} is not a dataset file (magic {magic!r}).")
    if version != DATASET_VERSION:
        raise DataIntegrityError(f"{path} has format version {version}; this build reads version {DATASET_VERSION}.")
    return {
        'version': version,
        'signal_kind': KIND_BY_CODE.get(kind_code, 'unknown'),
        'n_s': n_s,
        'record_count': count,
        'master_seed': seed,
        'spec_hash': spec_hash.hex(),
    }


def read_manifest(path: str) -> Dict[str, Any]:
    manifest_path = manifest_path_for(path)
    try:
        with open(manifest_path, 'r', encoding='utf-8') as f:
            return yaml.safe_load(f) or {}
    except FileNotFoundError:
        raise DataIntegrityError(f"Manifest {manifest_path} is missing.")


def verify_dataset(path: str) -> Dict[str, Any]:
    """Checks header, size and content checksum against the sidecar manifest."""
    header = read_header(path)
    manifest = read_manifest(path)

    if manifest.get('version') != header['version']:
        raise DataIntegrityError(
            f"Version mismatch for {path}: header {header['version']}, manifest {manifest.get('version')}."
        )
    expected_size = HEADER.size + header['record_count'] * record_dtype(header['n_s']).itemsize
    actual_size = os.path.getsize(path)
    actual_sha = sha256_file(path)
    if actual_sha != manifest.get('content_sha256'):
        raise DataIntegrityError(
            f"Checksum mismatch for {path}: expected {manifest.get('content_sha256')}, got {actual_sha} "
            f"(size {actual_size} bytes, layout requires {expected_size})."
        )
    if actual_size != expected_size:
        raise DataIntegrityError(f"{path} holds {actual_size} bytes; layout requires {expected_size}.")
    return header


def _open_records(path: str, header: Dict[str, Any]) -> np.ndarray:
    return np.memmap(
        path, dtype=record_dtype(header['n_s']), mode='r',
        offset=HEADER.size, shape=(header['record_count'],),
    )


def _filter_mask(rows: np.ndarray, bins: Optional[Collection[int]], labels: Optional[Collection[int]],
                 kinds: Optional[Collection[str]]) -> np.ndarray:
    mask = np.ones(len(rows), dtype=bool)
    hypothesis, kind_code = decode_label(rows['label'])
    if bins is not None:
        mask &= np.isin(rows['snr_db'], list(bins))
    if labels is not None:
        mask &= np.isin(hypothesis, list(labels))
    if kinds is not None:
        mask &= np.isin(kind_code, [SIGNAL_KIND_CODES[k] for k in kinds])
    return mask


def iter_chunks(
    path: str,
    chunk_size: int = 2048,
    bins: Optional[Collection[int]] = None,
    labels: Optional[Collection[int]] = None,
    kinds: Optional[Collection[str]] = None,
    verify: bool = True,
) -> Iterator[np.ndarray]:
    """Yields filtered structured-array chunks (in stored order) of a dataset file."""
    header = verify_dataset(path) if verify else read_header(path)
    records = _open_records(path, header)
    for start in range(0, len(records), chunk_size):
        block = records[start:start + chunk_size]
        mask = _filter_mask(block, bins, labels, kinds)
        if mask.any():
            yield np.array(block[mask])


def load(
    path: str,
    bins: Optional[Collection[int]] = None,
    labels: Optional[Collection[int]] = None,
    kinds: Optional[Collection[str]] = None,
    verify: bool = True,
) -> Iterator[DatasetRecord]:
    """Yields DatasetRecords in stored order; the filter is exact and may select nothing."""
    for chunk in iter_chunks(path, bins=bins, labels=labels, kinds=kinds, verify=verify):
        for row in chunk:
            yield row_to_record(row)


def seed_set(path: str, verify: bool = True) -> set:
    """All per-record sequence seeds of a dataset file."""
    seeds = set()
    for chunk in iter_chunks(path, verify=verify):
        seeds.update(int(s) for s in chunk['seq_seed'])
    return seeds


def load_arrays(
    path: str,
    fields: Sequence[str] = ('iq_norm',),
    bins: Optional[Collection[int]] = None,
    labels: Optional[Collection[int]] = None,
    kinds: Optional[Collection[str]] = None,
    verify: bool = True,
) -> Dict[str, np.ndarray]:
    """
    Column arrays of the selected records: the requested I/Q fields as
    complex (M, N_s) arrays plus 'label', 'kind_code', 'snr_db' and 'seq_seed'.
    """
    header = verify_dataset(path) if verify else read_header(path)
    chunks = list(iter_chunks(path, bins=bins, labels=labels, kinds=kinds, verify=False))
    rows = np.concatenate(chunks) if chunks else np.zeros(0, dtype=record_dtype(header['n_s']))
    hypothesis, kind_code = decode_label(rows['label'])
    out = {
        'label': hypothesis.astype(np.int64),
        'kind_code': kind_code.astype(np.int64),
        'snr_db': rows['snr_db'].astype(np.int64),
        'seq_seed': rows['seq_seed'].astype(np.uint64),
    }
    for field in fields:
        out[field] = to_complex(rows[field])
    return out
