from __future__ import annotations

import hashlib
import json
import math
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from sdlab.utils import constants as C

SignalKind = Literal['sine', 'qpsk', 'ofdm']
DatasetKind = Literal['sine', 'qpsk', 'ofdm', 'unified']
Split = Literal['train', 'validation', 'calibration', 'verify']

# ===================================================================
#  Waveform parameter blocks
# ===================================================================

class CommonParams(BaseModel):
    """Carrier and window parameters shared by every signal class."""
    model_config = ConfigDict(frozen=True)

    f_s: float = Field(C.SAMPLE_RATE_HZ, gt=0, description="Sample rate, Hz.")
    f_true: float = Field(C.TRUE_CARRIER_HZ, gt=0, description="True carrier, Hz.")
    n_pass: int = Field(C.SAMPLES_PER_SEQUENCE + C.SETTLE_SAMPLES, ge=1, description="Passband sample count.")
    phase: float = Field(0.0, ge=-math.pi, le=math.pi, description="Carrier phase offset, radians.")

    @model_validator(mode='after')
    def _carrier_below_nyquist(self) -> 'CommonParams':
        if self.f_true >= self.f_s / 2:
            raise ValueError(f"f_true={self.f_true} Hz must be below f_s/2={self.f_s / 2} Hz.")
        return self


class QpskParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    f_sym: float = Field(C.QPSK_SYMBOL_RATE_HZ, gt=0, description="Symbol rate, Hz.")
    rolloff: float = Field(C.QPSK_ROLLOFF, description="RRC roll-off factor.")
    timing_offset: float = Field(0.0, ge=0, description="Symbol-clock offset, seconds.")
    span_symbols: int = Field(C.RRC_SPAN_SYMBOLS, ge=1, description="RRC truncation, symbols each side.")

    @field_validator('rolloff')
    @classmethod
    def _rolloff_in_range(cls, value: float) -> float:
        if not 0 < value <= 1:
            raise ValueError(f"rolloff must lie in (0, 1], got {value}.")
        return value

    @model_validator(mode='after')
    def _offset_within_symbol(self) -> 'QpskParams':
        if self.timing_offset >= 1.0 / self.f_sym:
            raise ValueError(f"timing_offset {self.timing_offset} s must be below one symbol period {1.0 / self.f_sym} s.")
        return self

    @property
    def occupied_bandwidth(self) -> float:
        return self.f_sym * (1 + self.rolloff)


class OfdmParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_carriers: int = Field(C.OFDM_NUM_CARRIERS, description="Subcarrier count.")
    scs: float = Field(C.OFDM_SUBCARRIER_SPACING_HZ, gt=0, description="Subcarrier spacing, Hz.")
    inner: Literal['qpsk'] = 'qpsk'
    timing_offset: float = Field(0.0, ge=0, description="OFDM symbol offset, seconds.")

    @field_validator('n_carriers')
    @classmethod
    def _has_carriers(cls, value: int) -> int:
        if value < 1:
            raise ValueError(f"n_carriers must be at least 1, got {value}.")
        return value

    @model_validator(mode='after')
    def _offset_within_symbol(self) -> 'OfdmParams':
        if self.timing_offset >= 1.0 / self.scs:
            raise ValueError(f"timing_offset {self.timing_offset} s must be below one OFDM symbol {1.0 / self.scs} s.")
        return self

    @property
    def aggregate_symbol_rate(self) -> float:
        return self.n_carriers * self.scs

    @property
    def occupied_bandwidth(self) -> float:
        return self.n_carriers * self.scs


class FrontEndParams(BaseModel):
    """Receive-chain parameters for one trial."""
    model_config = ConfigDict(frozen=True)

    f_c: float = Field(..., gt=0, description="Estimated carrier draw, Hz.")
    f_c_range: Tuple[float, float] = Field(C.CARRIER_ESTIMATE_RANGE_HZ, description="Range f_c is drawn from, Hz.")
    lpf_bandwidth: float = Field(C.LPF_CUTOFF_HZ, gt=0, description="Low-pass cutoff, Hz.")
    lpf_order: int = Field(C.LPF_ORDER, ge=1)
    n_s: int = Field(C.SAMPLES_PER_SEQUENCE, ge=1, description="Output sequence length.")

    @model_validator(mode='after')
    def _carrier_in_range(self) -> 'FrontEndParams':
        lo, hi = self.f_c_range
        if not lo <= self.f_c <= hi:
            raise ValueError(f"f_c {self.f_c} Hz lies outside the estimate range [{lo}, {hi}] Hz.")
        if self.lpf_bandwidth >= self.f_c:
            raise ValueError(f"lpf_bandwidth {self.lpf_bandwidth} Hz must be below f_c {self.f_c} Hz.")
        return self

    def carrier_offset(self, f_true: float) -> float:
        """Residual frequency offset f_true - f_c left after downconversion."""
        return f_true - self.f_c


class SimulationParams(BaseModel):
    """The full simulation parameter table used to build every trial."""
    model_config = ConfigDict(frozen=True)

    f_s: float = Field(C.SAMPLE_RATE_HZ, gt=0)
    f_true: float = Field(C.TRUE_CARRIER_HZ, gt=0)
    f_c_min: float = Field(C.CARRIER_ESTIMATE_RANGE_HZ[0], gt=0)
    f_c_max: float = Field(C.CARRIER_ESTIMATE_RANGE_HZ[1], gt=0)
    n_s: int = Field(C.SAMPLES_PER_SEQUENCE, ge=9)
    settle: int = Field(C.SETTLE_SAMPLES, ge=0)
    lpf_order: int = Field(C.LPF_ORDER, ge=1)
    lpf_cutoff: float = Field(C.LPF_CUTOFF_HZ, gt=0)
    qpsk_symbol_rate: float = Field(C.QPSK_SYMBOL_RATE_HZ, gt=0)
    qpsk_rolloff: float = Field(C.QPSK_ROLLOFF, gt=0, le=1)
    rrc_span: int = Field(C.RRC_SPAN_SYMBOLS, ge=1)
    ofdm_carriers: int = Field(C.OFDM_NUM_CARRIERS, ge=1)
    ofdm_scs: float = Field(C.OFDM_SUBCARRIER_SPACING_HZ, gt=0)

    @model_validator(mode='after')
    def _consistent(self) -> 'SimulationParams':
        if self.f_c_min > self.f_c_max:
            raise ValueError("f_c_min must not exceed f_c_max.")
        if self.lpf_cutoff >= self.f_c_min:
            raise ValueError("lpf_cutoff must be below the carrier estimate range.")
        if self.lpf_cutoff >= self.f_s / 2:
            raise ValueError("lpf_cutoff must be below f_s/2.")
        widest = max(self.qpsk_symbol_rate * (1 + self.qpsk_rolloff), self.ofdm_carriers * self.ofdm_scs)
        if self.f_s <= 2 * (self.f_true + widest):
            raise ValueError("f_s must exceed 2*(f_true + occupied bandwidth).")
        return self

    @property
    def n_pass(self) -> int:
        return self.n_s + self.settle

    def frontend(self, f_c: float) -> FrontEndParams:
        """Receive-chain parameters of one trial with carrier estimate f_c."""
        return FrontEndParams(
            f_c=f_c, f_c_range=(self.f_c_min, self.f_c_max),
            lpf_bandwidth=self.lpf_cutoff, lpf_order=self.lpf_order, n_s=self.n_s,
        )


# ===================================================================
#  Sequence containers
# ===================================================================

class PassbandSequence(BaseModel):
    """A real sampled waveform at f_s; x[n] of the receive model."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    samples: np.ndarray
    kind: str
    power: float

    @field_validator('samples')
    @classmethod
    def _finite_real(cls, value: np.ndarray) -> np.ndarray:
        value = np.asarray(value, dtype=np.float64)
        if value.ndim != 1:
            raise ValueError("samples must be one-dimensional.")
        if not np.all(np.isfinite(value)):
            raise ValueError("samples must be finite.")
        return value


class BasebandSequence(BaseModel):
    """Complex I/Q output of the downconverter; the input to every detector."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    iq: np.ndarray
    sigma: float = Field(..., ge=0)
    label: int = C.LABEL_NOISE_ONLY
    snr_db: Optional[float] = None
    f_c: Optional[float] = None

    @field_validator('iq')
    @classmethod
    def _finite_complex(cls, value: np.ndarray) -> np.ndarray:
        value = np.asarray(value, dtype=np.complex128)
        if value.ndim != 1:
            raise ValueError("iq must be one-dimensional.")
        if not np.all(np.isfinite(value)):
            raise ValueError("iq must be finite.")
        return value

    def with_iq(self, iq: np.ndarray) -> 'BasebandSequence':
        return self.model_copy(update={'iq': np.asarray(iq, dtype=np.complex128)})


# ===================================================================
#  Dataset description
# ===================================================================

class DatasetSpec(BaseModel):
    """Everything needed to regenerate a dataset bit-exactly."""
    model_config = ConfigDict(frozen=True)

    kind: DatasetKind
    snr_grid: Tuple[int, ...] = tuple(range(C.SNR_RANGE_DB[0], C.SNR_RANGE_DB[1] + 1))
    per_bin: int = Field(C.SEQUENCES_PER_BIN, ge=1, description="Sequences per bin per class.")
    master_seed: int = Field(0, ge=0, lt=2**64)
    split: Split = 'train'
    simulation: SimulationParams = SimulationParams()

    @field_validator('snr_grid')
    @classmethod
    def _grid_strictly_increasing(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        if not value:
            raise ValueError("SNR grid must be nonempty.")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError(f"SNR grid must be strictly increasing, got {list(value)}.")
        if min(value) < -128 or max(value) > 127:
            raise ValueError("SNR grid values must fit in a signed byte.")
        return value

    @property
    def kinds(self) -> List[str]:
        return list(C.SIGNAL_KINDS) if self.kind == 'unified' else [self.kind]

    @property
    def record_count(self) -> int:
        return len(self.snr_grid) * self.per_bin * 2

    def spec_hash(self) -> bytes:
        """32-byte SHA-256 of the canonical JSON form of the spec."""
        canonical = json.dumps(self.model_dump(mode='json'), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).digest()


class DatasetRecord(BaseModel):
    """One labelled example with its provenance."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    label: int
    kind: str
    snr_db: int
    seq_seed: int
    f_c: float
    phase: float
    timing_offset: float
    iq_raw: np.ndarray
    iq_norm: np.ndarray
    template: np.ndarray

    @property
    def sigma(self) -> float:
        """Passband noise standard deviation of the record's SNR bin."""
        return math.sqrt(10.0 ** (-self.snr_db / 10.0))

    @property
    def signal_present(self) -> bool:
        return self.label == C.LABEL_SIGNAL_PRESENT
