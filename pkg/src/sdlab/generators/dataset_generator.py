# -*- coding: utf-8 -*-
"""Materializes per-signal and unified datasets as reproducible binary files."""

import time
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, Iterator, List, Tuple

import numpy as np

from sdlab.generators.trial_builder import build_trial
from sdlab.models.signal_params import DatasetSpec
from sdlab.utils import dataset_io
from sdlab.utils.constants import LABEL_NOISE_ONLY, LABEL_SIGNAL_PRESENT, SIGNAL_KIND_CODES, SIGNAL_KINDS, SPLIT_CODES
from sdlab.utils.exceptions import DataIntegrityError

# (snr_db, label, index, kind)
Job = Tuple[int, int, int, str]

_CHUNK_RECORDS = 256


def derive_seq_seed(master_seed: int, split: str, dataset_kind: str, snr_db: int, label: int, index: int) -> int:
    """
    Per-sequence seed from the master seed and the record's coordinates.
    The split code is part of the key, so train and validation substreams
    can never coincide even under equal master seeds.
    """
    sequence = np.random.SeedSequence(
        entropy=int(master_seed),
        spawn_key=(SPLIT_CODES[split], SIGNAL_KIND_CODES[dataset_kind], int(snr_db) + 128, int(label), int(index)),
    )
    words = sequence.generate_state(2, dtype=np.uint32)
    return (int(words[0]) << 32) | int(words[1])


def kind_for_index(spec: DatasetSpec, index: int) -> str:
    """Signal kind of record `index` within a bin; unified datasets cycle through the kinds."""
    if spec.kind == 'unified':
        return SIGNAL_KINDS[index % len(SIGNAL_KINDS)]
    return spec.kind


def record_jobs(spec: DatasetSpec) -> List[Job]:
    """Generation order: bin, then class (noise-only first), then index."""
    jobs: List[Job] = []
    for snr_db in spec.snr_grid:
        for label in (LABEL_NOISE_ONLY, LABEL_SIGNAL_PRESENT):
            for index in range(spec.per_bin):
                jobs.append((snr_db, label, index, kind_for_index(spec, index)))
    return jobs


def _build_chunk(spec: DatasetSpec, jobs: List[Job]) -> np.ndarray:
    records = []
    for snr_db, label, index, kind in jobs:
        seq_seed = derive_seq_seed(spec.master_seed, spec.split, spec.kind, snr_db, label, index)
        records.append(build_trial(kind, seq_seed, snr_db, label == LABEL_SIGNAL_PRESENT, spec.simulation))
    return dataset_io.records_to_array(records, spec.simulation.n_s)


def _ordered_chunks(spec: DatasetSpec, workers: int) -> Iterator[np.ndarray]:
    jobs = record_jobs(spec)
    batches = [jobs[i:i + _CHUNK_RECORDS] for i in range(0, len(jobs), _CHUNK_RECORDS)]
    if workers <= 1:
        for batch in batches:
            yield _build_chunk(spec, batch)
        return
    window = workers * 4
    with ThreadPoolExecutor(max_workers=workers) as pool:
        # map() yields in submission order, so the merge is deterministic.
        for start in range(0, len(batches), window):
            for chunk in pool.map(lambda batch: _build_chunk(spec, batch), batches[start:start + window]):
                yield chunk


def generate(spec: DatasetSpec, out_path: str, logger, workers: int = 1) -> Dict[str, Any]:
    """
    Generates every record of `spec` and writes the dataset file plus its
    manifest. Returns the manifest dict.
    """
    logger.info(
        f"Generating {spec.split} dataset '{spec.kind}': {len(spec.snr_grid)} bins x {spec.per_bin} x 2 classes "
        f"-> {spec.record_count} records, seed {spec.master_seed}, {workers} worker(s)."
    )
    started = time.perf_counter()
    manifest = dataset_io.write_dataset(out_path, spec, _ordered_chunks(spec, workers), logger)
    logger.info(f"Dataset {out_path} generated in {time.perf_counter() - started:.1f}s.")
    return manifest


def check_seed_disjoint(train_path: str, validation_path: str) -> None:
    """Raises DataIntegrityError if any sequence seed appears in both files."""
    overlap = dataset_io.seed_set(train_path) & dataset_io.seed_set(validation_path)
    if overlap:
        raise DataIntegrityError(
            f"{len(overlap)} sequence seed(s) shared between {train_path} and {validation_path}."
        )
