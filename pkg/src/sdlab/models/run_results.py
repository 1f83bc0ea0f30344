from __future__ import annotations

import math
from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, model_validator

from sdlab.utils.constants import Z_95


class DetectorKind(str, Enum):
    ENERGY = 'energy'
    FISHER_FFT = 'fisher'
    MATCHED_FILTER = 'mf'
    LEARNED = 'learned'


ALL_DETECTORS: Tuple[DetectorKind, ...] = tuple(DetectorKind)


def binomial_interval(p: float, n: int) -> Tuple[float, float]:
    """95% normal-approximation interval p +/- 1.96*sqrt(p(1-p)/n), clipped to [0, 1]."""
    if n <= 0:
        return 0.0, 1.0
    half = Z_95 * math.sqrt(p * (1.0 - p) / n)
    return max(0.0, p - half), min(1.0, p + half)


# ===================================================================
#  Calibration
# ===================================================================

class CalibrationResult(BaseModel):
    """A CFAR threshold set from noise-only scores."""
    detector: DetectorKind
    gamma: float = Field(..., description="Threshold in score units; scores strictly above it declare a detection.")
    target_pfa: float = Field(..., gt=0, lt=1)
    tolerance: float = Field(..., gt=0)
    achieved_pfa: float = Field(..., ge=0, le=1, description="Exceedance fraction on the calibration population.")
    n_trials: int = Field(..., ge=1)
    signal_kind: Optional[str] = Field(None, description="Kind whose templates fed the population (matched filter only).")


class PfaCheck(BaseModel):
    """Held-out false-alarm estimate on a fresh noise-only population."""
    pfa: float = Field(..., ge=0, le=1)
    ci_lo: float
    ci_hi: float
    n_trials: int
    band: Tuple[float, float] = Field(..., description="Acceptance band for the estimate.")

    @property
    def compliant(self) -> bool:
        return self.band[0] <= self.pfa <= self.band[1]


# ===================================================================
#  Evaluation
# ===================================================================

class BinResult(BaseModel):
    snr_db: int
    pd: float = Field(..., ge=0, le=1)
    n_trials: int = Field(..., ge=1)
    n_detected: int = Field(..., ge=0)
    ci_lo: float
    ci_hi: float

    @model_validator(mode='after')
    def _interval_well_formed(self) -> 'BinResult':
        if not self.ci_lo <= self.pd <= self.ci_hi:
            raise ValueError(f"Interval [{self.ci_lo}, {self.ci_hi}] does not contain pd={self.pd}.")
        return self

    @classmethod
    def from_counts(cls, snr_db: int, n_detected: int, n_trials: int) -> 'BinResult':
        pd = n_detected / n_trials
        lo, hi = binomial_interval(pd, n_trials)
        return cls(snr_db=snr_db, pd=pd, n_trials=n_trials, n_detected=n_detected, ci_lo=lo, ci_hi=hi)


class EvalCurve(BaseModel):
    """Pd versus SNR for one detector on one signal kind."""
    experiment: str
    detector: DetectorKind
    signal_kind: str = Field(..., description="Kind of the evaluated signal-present records.")
    trained_on: Optional[str] = Field(None, description="Dataset kind the learned model was trained on.")
    bins: List[BinResult]
    calibration: CalibrationResult
    pfa_check: Optional[PfaCheck] = None
    validation_pfa: Optional[float] = Field(None, description="Exceedance fraction on the validation set's noise-only records.")
    monotone: bool = True

    @property
    def label(self) -> str:
        return f"{self.detector.value}:{self.signal_kind}"

    @property
    def snr_values(self) -> List[int]:
        return [b.snr_db for b in self.bins]

    @property
    def pd_values(self) -> List[float]:
        return [b.pd for b in self.bins]


# ===================================================================
#  Run bookkeeping
# ===================================================================

class StageRecord(BaseModel):
    name: str
    status: str = Field(..., description="'completed' or 'skipped'.")
    wall_clock_s: float = 0.0
    input_fingerprint: Optional[str] = None
    outputs: List[str] = Field(default_factory=list)


class RunManifest(BaseModel):
    """Provenance of one experiment run; complete before any report is emitted."""
    experiment: str
    tool_version: str
    master_seed: int
    config_hash: str
    signal_kinds: List[str]
    detectors: List[DetectorKind]
    dataset_hashes: Dict[str, Optional[str]] = Field(default_factory=dict)
    model_hashes: Dict[str, Optional[str]] = Field(default_factory=dict)
    calibrations: List[CalibrationResult] = Field(default_factory=list)
    stages: List[StageRecord] = Field(default_factory=list)

    def stage_wall_clock(self) -> Dict[str, float]:
        return {s.name: s.wall_clock_s for s in self.stages}


class CalibrationSet(BaseModel):
    """Thresholds of one experiment plus their held-out false-alarm checks."""
    experiment: str
    calibrations: List[CalibrationResult]
    pfa_checks: Dict[DetectorKind, PfaCheck] = Field(default_factory=dict)

    def by_detector(self) -> Dict[DetectorKind, CalibrationResult]:
        return {c.detector: c for c in self.calibrations}
