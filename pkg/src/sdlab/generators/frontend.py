# -*- coding: utf-8 -*-
"""
Receive chain: AWGN injection at a given SNR, quadrature downconversion with
an estimated carrier followed by a Butterworth low-pass, truncation to N_s
samples, and the max-magnitude normalization used by the learned detector.
"""

import math
from typing import Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator
from scipy import signal

from sdlab.models.signal_params import BasebandSequence, PassbandSequence


def noise_sigma(snr_db: float) -> float:
    """Noise standard deviation for unit signal power: sigma^2 = 1/SNR."""
    return math.sqrt(10.0 ** (-snr_db / 10.0))


def add_noise(
    x: PassbandSequence,
    snr_db: float,
    rng: np.random.Generator,
    signal_present: bool = True,
) -> PassbandSequence:
    """
    Returns x + w with w i.i.d. real Gaussian of variance 10^(-snr_db/10).
    With signal_present=False only w is returned (same length, same sigma),
    which is how noise-only records are built.
    """
    sigma = noise_sigma(snr_db)
    noise = rng.normal(0.0, sigma, size=x.samples.shape[0])
    samples = x.samples + noise if signal_present else noise
    kind = x.kind if signal_present else 'noise'
    return PassbandSequence(samples=samples, kind=kind, power=float(np.mean(samples ** 2)))


# =================================================================================
#  Butterworth low-pass
# =================================================================================

class FilterDesign(BaseModel):
    """Immutable cascade of second-order sections; each apply() starts from zero state."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    sos: np.ndarray
    order: int
    cutoff_hz: float
    f_s: float

    @field_validator('sos')
    @classmethod
    def _sos_shape(cls, value: np.ndarray) -> np.ndarray:
        value = np.asarray(value, dtype=np.float64)
        if value.ndim != 2 or value.shape[1] != 6:
            raise ValueError("sos must have shape (n_sections, 6).")
        value.setflags(write=False)
        return value

    @property
    def poles(self) -> np.ndarray:
        _, p, _ = signal.sos2zpk(np.array(self.sos))
        return p

    @property
    def zeros(self) -> np.ndarray:
        z, _, _ = signal.sos2zpk(np.array(self.sos))
        return z

    @property
    def dc_gain(self) -> float:
        return float(np.prod(self.sos[:, :3].sum(axis=1) / self.sos[:, 3:].sum(axis=1)))

    def magnitude_db(self, freq_hz: float) -> float:
        _, h = signal.sosfreqz(self.sos, worN=[freq_hz], fs=self.f_s)
        return float(20 * np.log10(np.abs(h[0])))

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Causal single-pass filtering along the last axis."""
        # sosfilt's kernel rejects read-only buffers.
        return signal.sosfilt(np.array(self.sos), x, axis=-1)


def design_butterworth(order: int, cutoff_hz: float, f_s: float) -> FilterDesign:
    """Bilinear-transform Butterworth low-pass (prewarped cutoff) as biquads with unit DC gain."""
    if order < 1:
        raise ValueError(f"Filter order must be at least 1, got {order}.")
    if not 0 < cutoff_hz < f_s / 2:
        raise ValueError(f"Cutoff {cutoff_hz} Hz must lie in (0, f_s/2 = {f_s / 2} Hz).")
    sos = signal.butter(order, cutoff_hz, btype='low', output='sos', fs=f_s)
    dc = np.prod(sos[:, :3].sum(axis=1) / sos[:, 3:].sum(axis=1))
    sos = sos.copy()
    sos[0, :3] /= dc
    return FilterDesign(sos=sos, order=order, cutoff_hz=cutoff_hz, f_s=f_s)


# =================================================================================
#  Downconversion
# =================================================================================

def downconvert(samples: np.ndarray, f_c: float, filt: FilterDesign, n_s: int) -> np.ndarray:
    """
    I = LPF(x*cos(n)), Q = LPF(x*sin(n)) with n = [1..N]*2*pi*f_c/f_s, keeping
    the final n_s outputs. Accepts one window or a 2-D batch (last axis time).
    """
    x = np.asarray(samples, dtype=np.float64)
    n_pass = x.shape[-1]
    if n_pass < n_s:
        raise ValueError(f"Passband length {n_pass} is shorter than the requested {n_s} output samples.")
    n = np.arange(1, n_pass + 1, dtype=np.float64) * (2 * math.pi * f_c / filt.f_s)
    in_phase = filt.apply(x * np.cos(n))
    quadrature = filt.apply(x * np.sin(n))
    return (in_phase + 1j * quadrature)[..., n_pass - n_s:]


def dcv(x: PassbandSequence, f_c: float, filt: FilterDesign, n_s: int, sigma: float = 0.0,
        label: int = 0, snr_db: Optional[float] = None) -> BasebandSequence:
    """Downconverts a (noisy) passband sequence into a BasebandSequence of length n_s."""
    iq = downconvert(x.samples, f_c, filt, n_s)
    return BasebandSequence(iq=iq, sigma=sigma, label=label, snr_db=snr_db, f_c=f_c)


def normalize_ml(b: Union[BasebandSequence, np.ndarray]) -> Union[BasebandSequence, np.ndarray]:
    """
    Divides by the maximum modulus so that max |iq| = 1; arguments are unchanged.
    Arrays are normalized along the last axis (one factor per row).
    """
    iq = b.iq if isinstance(b, BasebandSequence) else np.asarray(b)
    peak = np.max(np.abs(iq), axis=-1, keepdims=True)
    if np.any(peak == 0):
        raise ValueError("Cannot normalize an all-zero sequence.")
    normalized = iq / peak
    if isinstance(b, BasebandSequence):
        return b.with_iq(normalized)
    return normalized
