# -*- coding: utf-8 -*-
"""
Pd-versus-SNR evaluation of calibrated detectors on a validation dataset,
the monotonicity audit, and SNR-at-Pd comparisons between curves.
"""

import time
from collections import defaultdict
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from sdlab.generators.dataset_generator import check_seed_disjoint
from sdlab.models.run_results import BinResult, CalibrationResult, DetectorKind, EvalCurve, PfaCheck
from sdlab.processors.calibrator import LearnedArtifacts, score_chunks
from sdlab.utils import dataset_io
from sdlab.utils.constants import KIND_BY_CODE, SIGNAL_KINDS
from sdlab.utils.exceptions import SaturatedCurveError

CurveLike = Union[EvalCurve, Tuple[Sequence[float], Sequence[float]]]


def _counts() -> Dict[int, List[int]]:
    return defaultdict(lambda: [0, 0])


def bin_results(counts: Dict[int, List[int]], snr_grid: Sequence[int]) -> List[BinResult]:
    """counts maps snr_db -> [n_detected, n_trials]; bins without trials are left out."""
    return [
        BinResult.from_counts(snr, counts[snr][0], counts[snr][1])
        for snr in snr_grid if snr in counts and counts[snr][1] > 0
    ]


def audit_monotone(bins: Sequence[BinResult]) -> bool:
    """False if any bin falls more than three interval widths below a lower-SNR bin."""
    for j, later in enumerate(bins):
        for earlier in bins[:j]:
            width = max(earlier.ci_hi - earlier.ci_lo, later.ci_hi - later.ci_lo, 1.0 / later.n_trials)
            if later.pd < earlier.pd - 3 * width:
                return False
    return True


def evaluate(
    validation_path: str,
    calibrations: Dict[DetectorKind, CalibrationResult],
    experiment: str,
    logger,
    learned_artifacts: Optional[LearnedArtifacts] = None,
    train_path: Optional[str] = None,
    trained_on: Optional[str] = None,
    pfa_checks: Optional[Dict[DetectorKind, PfaCheck]] = None,
    chunk_size: int = 2048,
    workers: int = 1,
) -> List[EvalCurve]:
    """
    Scores every validation record with each calibrated detector. Signal-present
    records give per-bin Pd (score > gamma); noise-only records give the
    validation false-alarm rate. Noise-only records hold no template, so the
    matched filter's validation_pfa stays None and its held-out P_FA comes
    from the decoy-template verify population (pfa_checks). One curve per
    (detector, signal kind); a unified file also yields a kind-pooled energy
    curve.
    """
    if train_path is not None:
        check_seed_disjoint(train_path, validation_path)

    header = dataset_io.verify_dataset(validation_path)
    snr_grid = dataset_io.read_manifest(validation_path).get('snr_grid')
    detectors = list(calibrations)
    logger.info(f"Evaluating {[d.value for d in detectors]} on {validation_path} ({header['record_count']} records).")
    started = time.perf_counter()

    detections: Dict[Tuple[DetectorKind, str], Dict[int, List[int]]] = defaultdict(_counts)
    false_alarms: Dict[DetectorKind, List[int]] = {d: [0, 0] for d in detectors}
    chunks = dataset_io.iter_chunks(validation_path, chunk_size=chunk_size, verify=False)

    for chunk, scores in score_chunks(chunks, detectors, learned_artifacts, workers):
        hypothesis, kind_code = dataset_io.decode_label(chunk['label'])
        present = hypothesis == 1
        for detector in detectors:
            values = np.atleast_1d(scores[detector])
            exceeds = values > calibrations[detector].gamma
            # Unscored rows (NaN) are matched-filter records without a template.
            noise_only = ~present & ~np.isnan(values)
            false_alarms[detector][0] += int(np.count_nonzero(exceeds & noise_only))
            false_alarms[detector][1] += int(np.count_nonzero(noise_only))
            for code in np.unique(kind_code[present]):
                mask = present & (kind_code == code)
                kind = KIND_BY_CODE[int(code)]
                for snr in np.unique(chunk['snr_db'][mask]):
                    in_bin = mask & (chunk['snr_db'] == snr)
                    tally = detections[(detector, kind)][int(snr)]
                    tally[0] += int(np.count_nonzero(exceeds & in_bin))
                    tally[1] += int(np.count_nonzero(in_bin))
                    if header['signal_kind'] == 'unified' and detector == DetectorKind.ENERGY:
                        pooled = detections[(detector, 'unified')][int(snr)]
                        pooled[0] += int(np.count_nonzero(exceeds & in_bin))
                        pooled[1] += int(np.count_nonzero(in_bin))

    grid = snr_grid or sorted({snr for counts in detections.values() for snr in counts})
    curves: List[EvalCurve] = []
    kind_order = list(SIGNAL_KINDS) + ['unified']
    for (detector, kind), counts in sorted(detections.items(), key=lambda kv: (detectors.index(kv[0][0]), kind_order.index(kv[0][1]))):
        bins = bin_results(counts, grid)
        monotone = audit_monotone(bins)
        if not monotone:
            logger.warning(f"Pd curve {detector.value}:{kind} of '{experiment}' is not monotone in SNR.")
        fa, n0 = false_alarms[detector]
        curves.append(EvalCurve(
            experiment=experiment,
            detector=detector,
            signal_kind=kind,
            trained_on=trained_on if detector == DetectorKind.LEARNED else None,
            bins=bins,
            calibration=calibrations[detector],
            pfa_check=(pfa_checks or {}).get(detector),
            validation_pfa=fa / n0 if n0 else None,
            monotone=monotone,
        ))
        try:
            logger.info(f"  {detector.value}:{kind} snr_at_pd(0.5) = {snr_at_pd(curves[-1], 0.5):.2f} dB")
        except SaturatedCurveError:
            logger.info(f"  {detector.value}:{kind} never crosses Pd = 0.5 on this grid.")

    logger.info(f"Evaluation finished in {time.perf_counter() - started:.1f}s.")
    return curves


# =================================================================================
#  Comparisons
# =================================================================================

def _curve_points(curve: CurveLike) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(curve, EvalCurve):
        return np.asarray(curve.snr_values, dtype=np.float64), np.asarray(curve.pd_values, dtype=np.float64)
    snr, pd = curve
    return np.asarray(snr, dtype=np.float64), np.asarray(pd, dtype=np.float64)


def snr_at_pd(curve: CurveLike, target_pd: float) -> float:
    """
    SNR (dB) at which the curve first reaches target_pd, linearly
    interpolated between the bracketing bins. Raises SaturatedCurveError
    when the curve starts above the target or never reaches it.
    """
    snr, pd = _curve_points(curve)
    if snr.size == 0:
        raise SaturatedCurveError("Cannot interpolate an empty curve.")
    reached = np.nonzero(pd >= target_pd)[0]
    if reached.size == 0:
        raise SaturatedCurveError(f"Curve never reaches Pd={target_pd} (max {pd.max():.3f}).")
    k = int(reached[0])
    if pd[k] == target_pd:
        return float(snr[k])
    if k == 0:
        raise SaturatedCurveError(f"Curve starts above Pd={target_pd} at {snr[0]:g} dB.")
    frac = (target_pd - pd[k - 1]) / (pd[k] - pd[k - 1])
    return float(snr[k - 1] + frac * (snr[k] - snr[k - 1]))


def snr_at_pd_or_none(curve: CurveLike, target_pd: float) -> Optional[float]:
    try:
        return snr_at_pd(curve, target_pd)
    except SaturatedCurveError:
        return None


def _gap(reference: Optional[float], other: Optional[float]) -> Optional[float]:
    if reference is None or other is None:
        return None
    return reference - other


def summarize(curves: Sequence[EvalCurve], target_pd: float = 0.5) -> List[Dict[str, Any]]:
    """
    One row per (experiment, signal kind): snr_at_pd per detector (None if
    saturated) and each detector's advantage over the energy detector in dB
    (positive when it reaches target_pd at a lower SNR).
    """
    by_kind: Dict[Tuple[str, str], Dict[str, Optional[float]]] = {}
    for curve in curves:
        if curve.signal_kind == 'unified':
            continue
        row = by_kind.setdefault((curve.experiment, curve.signal_kind), {})
        row[curve.detector.value] = snr_at_pd_or_none(curve, target_pd)

    rows = []
    for (experiment, kind), values in by_kind.items():
        energy = values.get(DetectorKind.ENERGY.value)
        row: Dict[str, Any] = {'experiment': experiment, 'signal_kind': kind, 'target_pd': target_pd}
        for detector in DetectorKind:
            row[f'{detector.value}_snr_db'] = values.get(detector.value)
        row['fisher_advantage_db'] = _gap(energy, values.get(DetectorKind.FISHER_FFT.value))
        row['learned_advantage_db'] = _gap(energy, values.get(DetectorKind.LEARNED.value))
        rows.append(row)
    return rows


def unified_vs_per_kind(curves: Sequence[EvalCurve], target_pd: float = 0.5) -> List[Dict[str, Any]]:
    """Learned snr_at_pd per kind for the unified-trained model next to the per-kind-trained one."""
    unified: Dict[str, Optional[float]] = {}
    per_kind: Dict[str, Optional[float]] = {}
    for curve in curves:
        if curve.detector != DetectorKind.LEARNED:
            continue
        value = snr_at_pd_or_none(curve, target_pd)
        if curve.trained_on == 'unified':
            unified[curve.signal_kind] = value
        elif curve.trained_on == curve.signal_kind:
            per_kind[curve.signal_kind] = value

    rows = []
    for kind in SIGNAL_KINDS:
        if kind in unified and kind in per_kind:
            u, p = unified[kind], per_kind[kind]
            rows.append({
                'signal_kind': kind,
                'unified_snr_db': u,
                'per_kind_snr_db': p,
                'unified_loss_db': None if u is None or p is None else u - p,
            })
    return rows
