# -*- coding: utf-8 -*-
"""
CFAR calibration.

Thresholds are empirical quantiles of noise-only scores. Noise populations
are built in memory (never persisted) from the same trial builder as the
datasets, under their own split codes so they never share a substream with
training or validation records. Each detector's H0 statistic is independent
of the noise power, so a population may cycle through the SNR grid. Only
the matched filter needs waveform synthesis under H0 (for its decoy
template); the other detectors share a template-free population.
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from sdlab.detectors import classical, learned
from sdlab.generators.dataset_generator import derive_seq_seed
from sdlab.generators.trial_builder import build_noise_trial, build_trial
from sdlab.models.run_results import CalibrationResult, DetectorKind, PfaCheck, binomial_interval
from sdlab.models.signal_params import SimulationParams
from sdlab.utils import dataset_io
from sdlab.utils.constants import LABEL_NOISE_ONLY, MIN_EXCEEDANCES, Z_95
from sdlab.utils.exceptions import CalibrationToleranceError

LearnedArtifacts = Tuple[learned.KernelBank, learned.LinearModel]


# =================================================================================
#  Thresholds
# =================================================================================

def required_trials(target_pfa: float, tolerance: float) -> int:
    """Smallest M with ten expected exceedances and a 95% binomial half-width inside the tolerance."""
    by_exceedances = math.ceil(MIN_EXCEEDANCES / target_pfa)
    by_tolerance = math.ceil(Z_95 ** 2 * target_pfa * (1 - target_pfa) / tolerance ** 2)
    return max(by_exceedances, by_tolerance)


def calibrate(
    scores: Sequence[float],
    target_pfa: float,
    tolerance: float,
    detector: DetectorKind,
    signal_kind: Optional[str] = None,
) -> CalibrationResult:
    """
    gamma is the ceil(M*(1-p))-th order statistic of the M noise-only
    scores; achieved P_FA counts scores strictly above gamma.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    if scores.size == 0:
        raise ValueError("Calibration needs a nonempty noise-only score sample.")
    if not 0 < target_pfa < 1:
        raise ValueError(f"target_pfa must lie in (0, 1), got {target_pfa}.")
    if not np.all(np.isfinite(scores)):
        raise ValueError("Calibration scores must be finite.")

    m = scores.size
    minimum = math.ceil(MIN_EXCEEDANCES / target_pfa)
    if m < minimum:
        raise CalibrationToleranceError(
            f"{detector.value}: {m} noise-only trials cannot estimate P_FA={target_pfa}; "
            f"at least {minimum} are required.",
            required_trials=minimum,
        )

    rank = max(1, math.ceil(m * (1.0 - target_pfa) - 1e-9))
    gamma = float(np.partition(scores, rank - 1)[rank - 1])
    achieved = float(np.count_nonzero(scores > gamma)) / m

    if abs(achieved - target_pfa) > tolerance:
        needed = max(required_trials(target_pfa, tolerance), m + 1)
        raise CalibrationToleranceError(
            f"{detector.value}: achieved P_FA {achieved:.5f} misses target {target_pfa} +/- {tolerance} "
            f"with M={m} (tied or degenerate scores, or too few trials); rerun with at least {needed} trials.",
            required_trials=needed,
        )
    return CalibrationResult(
        detector=detector, gamma=gamma, target_pfa=target_pfa, tolerance=tolerance,
        achieved_pfa=achieved, n_trials=m, signal_kind=signal_kind,
    )


def verify_pfa(scores: Sequence[float], gamma: float, band: Tuple[float, float] = (0.007, 0.013)) -> PfaCheck:
    """Empirical P_FA of threshold gamma on a fresh noise-only sample, with its 95% interval."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    if scores.size == 0:
        raise ValueError("P_FA verification needs a nonempty noise-only score sample.")
    p_hat = float(np.count_nonzero(scores > gamma)) / scores.size
    lo, hi = binomial_interval(p_hat, scores.size)
    return PfaCheck(pfa=p_hat, ci_lo=lo, ci_hi=hi, n_trials=int(scores.size), band=tuple(band))


# =================================================================================
#  Scoring
# =================================================================================

def sigma_for(snr_db: np.ndarray) -> np.ndarray:
    return np.sqrt(10.0 ** (-np.asarray(snr_db, dtype=np.float64) / 10.0))


def _mf_scores(iq_raw: np.ndarray, template: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """MF statistic where a template exists; NaN for noise-only records carrying a zero template."""
    out = np.full(iq_raw.shape[0], np.nan)
    has_template = np.any(template != 0, axis=-1)
    if np.any(has_template):
        out[has_template] = classical.mf_stat(iq_raw[has_template], template[has_template], sigma[has_template])
    return out


def score_chunk(
    chunk: np.ndarray,
    detectors: Iterable[DetectorKind],
    learned_artifacts: Optional[LearnedArtifacts] = None,
) -> Dict[DetectorKind, np.ndarray]:
    """
    Scores every record of a structured record chunk with each requested
    detector. Records without a template get a NaN matched-filter score.
    """
    iq_raw = dataset_io.to_complex(chunk['iq_raw'])
    sigma = sigma_for(chunk['snr_db'])
    out: Dict[DetectorKind, np.ndarray] = {}
    for detector in detectors:
        if detector == DetectorKind.ENERGY:
            out[detector] = classical.energy_stat(iq_raw, sigma)
        elif detector == DetectorKind.FISHER_FFT:
            out[detector] = classical.fisher_stat(iq_raw)
        elif detector == DetectorKind.MATCHED_FILTER:
            out[detector] = _mf_scores(iq_raw, dataset_io.to_complex(chunk['template']), sigma)
        elif detector == DetectorKind.LEARNED:
            if learned_artifacts is None:
                raise ValueError("The learned detector needs a trained kernel bank and model.")
            bank, model = learned_artifacts
            out[detector] = learned.score(model, learned.transform(bank, dataset_io.to_complex(chunk['iq_norm'])))
        else:
            raise ValueError(f"Unknown detector {detector}.")
    return out


def score_chunks(
    chunks: Iterable[np.ndarray],
    detectors: Sequence[DetectorKind],
    learned_artifacts: Optional[LearnedArtifacts] = None,
    workers: int = 1,
) -> Iterator[Tuple[np.ndarray, Dict[DetectorKind, np.ndarray]]]:
    """Yields (chunk, scores) in input order; scoring fans out over a thread pool."""
    def _score(chunk):
        return chunk, score_chunk(chunk, detectors, learned_artifacts)

    if workers <= 1:
        for chunk in chunks:
            yield _score(chunk)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        pending: List[np.ndarray] = []
        for chunk in chunks:
            pending.append(chunk)
            if len(pending) == workers * 2:
                yield from pool.map(_score, pending)
                pending = []
        if pending:
            yield from pool.map(_score, pending)


# =================================================================================
#  Noise-only populations
# =================================================================================

def _population_chunk(
    indices: range,
    kinds: Sequence[str],
    dataset_kind: str,
    snr_grid: Sequence[int],
    master_seed: int,
    split: str,
    sim: SimulationParams,
    templates: bool,
) -> np.ndarray:
    records = []
    for i in indices:
        snr_db = snr_grid[i % len(snr_grid)]
        kind = kinds[(i // len(snr_grid)) % len(kinds)]
        if templates:
            seq_seed = derive_seq_seed(master_seed, split, dataset_kind, snr_db, LABEL_NOISE_ONLY, i)
            # The decoy template gives the matched filter a realistic template under H0.
            records.append(build_trial(kind, seq_seed, snr_db, False, sim, keep_template=True))
        else:
            seq_seed = derive_seq_seed(master_seed, f"{split}_noise", dataset_kind, snr_db, LABEL_NOISE_ONLY, i)
            records.append(build_noise_trial(kind, seq_seed, snr_db, sim))
    return dataset_io.records_to_array(records, sim.n_s)


def noise_population(
    n_trials: int,
    kinds: Sequence[str],
    dataset_kind: str,
    snr_grid: Sequence[int],
    master_seed: int,
    split: str,
    sim: SimulationParams,
    chunk_size: int = 2048,
    workers: int = 1,
    templates: bool = True,
) -> Iterator[np.ndarray]:
    """
    Structured chunks of `n_trials` noise-only records, identical for any
    worker count. With templates=False the records skip waveform synthesis
    and carry zero templates.
    """
    ranges = [range(start, min(start + chunk_size, n_trials)) for start in range(0, n_trials, chunk_size)]

    def _build(indices: range) -> np.ndarray:
        return _population_chunk(indices, kinds, dataset_kind, snr_grid, master_seed, split, sim, templates)

    if workers <= 1:
        for indices in ranges:
            yield _build(indices)
        return
    window = workers * 2
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for start in range(0, len(ranges), window):
            yield from pool.map(_build, ranges[start:start + window])


def gather_scores(
    chunks: Iterable[np.ndarray],
    detectors: Sequence[DetectorKind],
    learned_artifacts: Optional[LearnedArtifacts] = None,
    workers: int = 1,
) -> Dict[DetectorKind, np.ndarray]:
    """Concatenated per-detector scores of a chunk stream, in stream order."""
    parts: Dict[DetectorKind, List[np.ndarray]] = {d: [] for d in detectors}
    for _, scores in score_chunks(chunks, detectors, learned_artifacts, workers):
        for detector, values in scores.items():
            parts[detector].append(np.atleast_1d(values))
    return {d: np.concatenate(v) if v else np.empty(0) for d, v in parts.items()}


def population_scores(
    detectors: Sequence[DetectorKind],
    n_trials: int,
    kinds: Sequence[str],
    dataset_kind: str,
    snr_grid: Sequence[int],
    master_seed: int,
    split: str,
    sim: SimulationParams,
    learned_artifacts: Optional[LearnedArtifacts] = None,
    chunk_size: int = 2048,
    workers: int = 1,
) -> Dict[DetectorKind, np.ndarray]:
    """
    H0 scores of `n_trials` records per detector. The matched filter is
    scored on decoy-template records; every other detector on the cheaper
    template-free population.
    """
    population = dict(kinds=kinds, dataset_kind=dataset_kind, snr_grid=snr_grid, master_seed=master_seed,
                      split=split, sim=sim, chunk_size=chunk_size, workers=workers)
    with_template = [d for d in detectors if d == DetectorKind.MATCHED_FILTER]
    without_template = [d for d in detectors if d != DetectorKind.MATCHED_FILTER]

    scores: Dict[DetectorKind, np.ndarray] = {}
    if without_template:
        chunks = noise_population(n_trials, templates=False, **population)
        scores.update(gather_scores(chunks, without_template, learned_artifacts, workers))
    if with_template:
        chunks = noise_population(n_trials, templates=True, **population)
        scores.update(gather_scores(chunks, with_template, learned_artifacts, workers))
    return scores


def calibrate_detectors(
    detectors: Sequence[DetectorKind],
    kinds: Sequence[str],
    dataset_kind: str,
    snr_grid: Sequence[int],
    master_seed: int,
    sim: SimulationParams,
    target_pfa: float,
    tolerance: float,
    n_trials: int,
    logger,
    learned_artifacts: Optional[LearnedArtifacts] = None,
    chunk_size: int = 2048,
    workers: int = 1,
) -> Dict[DetectorKind, CalibrationResult]:
    """Builds the calibration populations and sets every detector's threshold from them."""
    logger.info(f"Calibrating {[d.value for d in detectors]} on {n_trials} noise-only trials ({dataset_kind}).")
    started = time.perf_counter()
    scores = population_scores(detectors, n_trials, kinds, dataset_kind, snr_grid, master_seed, 'calibration',
                               sim, learned_artifacts, chunk_size, workers)

    results: Dict[DetectorKind, CalibrationResult] = {}
    for detector in detectors:
        kind_tag = dataset_kind if detector == DetectorKind.MATCHED_FILTER else None
        results[detector] = calibrate(scores[detector], target_pfa, tolerance, detector, kind_tag)
        logger.info(
            f"  {detector.value}: gamma={results[detector].gamma:.6g}, "
            f"achieved P_FA={results[detector].achieved_pfa:.5f}, M={results[detector].n_trials}"
        )
    logger.info(f"Calibration finished in {time.perf_counter() - started:.1f}s.")
    return results


def verify_detectors(
    calibrations: Dict[DetectorKind, CalibrationResult],
    kinds: Sequence[str],
    dataset_kind: str,
    snr_grid: Sequence[int],
    master_seed: int,
    sim: SimulationParams,
    n_trials: int,
    logger,
    band: Tuple[float, float] = (0.007, 0.013),
    learned_artifacts: Optional[LearnedArtifacts] = None,
    chunk_size: int = 2048,
    workers: int = 1,
) -> Dict[DetectorKind, PfaCheck]:
    """Held-out P_FA of each calibrated threshold on a fresh noise-only population."""
    detectors = list(calibrations)
    scores = population_scores(detectors, n_trials, kinds, dataset_kind, snr_grid, master_seed, 'verify',
                               sim, learned_artifacts, chunk_size, workers)

    checks: Dict[DetectorKind, PfaCheck] = {}
    for detector, result in calibrations.items():
        checks[detector] = verify_pfa(scores[detector], result.gamma, band)
        level = logger.info if checks[detector].compliant else logger.warning
        level(
            f"  {detector.value}: held-out P_FA={checks[detector].pfa:.5f} "
            f"[{checks[detector].ci_lo:.5f}, {checks[detector].ci_hi:.5f}] over {n_trials} trials"
        )
    return checks
