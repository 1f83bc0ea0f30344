# -*- coding: utf-8 -*-
"""
Noiseless passband synthesis for the three signal classes: a pure tone,
RRC-shaped QPSK and CP-free OFDM with QPSK subcarriers. Every generator
returns a real PassbandSequence normalized to unit mean square over the
emitted window.
"""

import math
from typing import Union

import numpy as np

from sdlab.models.signal_params import CommonParams, OfdmParams, PassbandSequence, QpskParams

ArrayLike = Union[float, np.ndarray]


# =================================================================================
#  HELPER FUNCTIONS - PURE LOGIC
# =================================================================================

def rrc_pulse(t: ArrayLike, rolloff: float, T: float) -> np.ndarray:
    """
    Unit-energy root-raised-cosine pulse evaluated at time(s) t.

    The removable singularities at t = 0 and t = ±T/(4*rolloff) are replaced
    by their analytic limits, so the function is total on finite inputs.
    """
    if T <= 0:
        raise ValueError(f"Symbol period T must be positive, got {T}.")
    a = float(rolloff)
    x = np.asarray(t, dtype=np.float64) / T
    scale = 1.0 / math.sqrt(T)

    at_zero = np.isclose(x, 0.0, rtol=0.0, atol=1e-12)
    at_edge = np.isclose(np.abs(x), 1.0 / (4.0 * a), rtol=0.0, atol=1e-12) if a > 0 else np.zeros_like(at_zero)
    regular = ~(at_zero | at_edge)

    xs = np.where(regular, x, 1.0)
    numerator = np.sin(math.pi * xs * (1 - a)) + 4 * a * xs * np.cos(math.pi * xs * (1 + a))
    denominator = math.pi * xs * (1 - (4 * a * xs) ** 2)
    values = numerator / denominator

    zero_value = 1 - a + 4 * a / math.pi
    if a > 0:
        edge_value = (a / math.sqrt(2)) * (
            (1 + 2 / math.pi) * math.sin(math.pi / (4 * a)) + (1 - 2 / math.pi) * math.cos(math.pi / (4 * a))
        )
    else:
        edge_value = 0.0

    values = np.where(at_zero, zero_value, np.where(at_edge, edge_value, values))
    return scale * values


def gray_qpsk_symbols(rng: np.random.Generator, count: int) -> np.ndarray:
    """Random Gray-mapped unit-energy QPSK symbols: bit pair (b0, b1) -> ((1-2b0) + j(1-2b1))/sqrt(2)."""
    bits = rng.integers(0, 2, size=(count, 2))
    return ((1 - 2 * bits[:, 0]) + 1j * (1 - 2 * bits[:, 1])) / math.sqrt(2)


def _sample_times(common: CommonParams) -> np.ndarray:
    return np.arange(common.n_pass, dtype=np.float64) / common.f_s


def normalize_power(samples: np.ndarray) -> np.ndarray:
    """Scales a real window to unit mean square."""
    power = float(np.mean(samples ** 2))
    if power <= 0.0:
        raise ValueError("Cannot power-normalize an all-zero window.")
    return samples / math.sqrt(power)


def _mix_to_passband(baseband: np.ndarray, common: CommonParams) -> np.ndarray:
    t = _sample_times(common)
    carrier = np.exp(1j * (2 * math.pi * common.f_true * t + common.phase))
    return math.sqrt(2) * np.real(baseband * carrier)


def _emit(samples: np.ndarray, kind: str, normalize: bool) -> PassbandSequence:
    if normalize:
        samples = normalize_power(samples)
    return PassbandSequence(samples=samples, kind=kind, power=float(np.mean(samples ** 2)))


# =================================================================================
#  SINE
# =================================================================================

def gen_sine(common: CommonParams, normalize: bool = True) -> PassbandSequence:
    """sqrt(2)*sin(2*pi*f_true*n/f_s + phase); the closed form is returned as-is with normalize=False."""
    if common.n_pass == 0:
        raise ValueError("n_pass must be positive.")
    if common.f_true >= common.f_s / 2:
        raise ValueError(f"f_true={common.f_true} Hz must be below f_s/2.")
    n = np.arange(common.n_pass, dtype=np.float64)
    samples = math.sqrt(2) * np.sin(2 * math.pi * common.f_true * n / common.f_s + common.phase)
    return _emit(samples, 'sine', normalize)


# =================================================================================
#  QPSK
# =================================================================================

def qpsk_symbol_range(common: CommonParams, qpsk: QpskParams) -> range:
    """Indices k of the symbols whose truncated pulses reach the window."""
    T = 1.0 / qpsk.f_sym
    t_end = (common.n_pass - 1) / common.f_s
    k_min = -qpsk.span_symbols
    k_max = int(math.floor((t_end + qpsk.span_symbols * T - qpsk.timing_offset) / T))
    return range(k_min, k_max + 1)


def qpsk_baseband(t: np.ndarray, symbols: np.ndarray, qpsk: QpskParams, k_min: int) -> np.ndarray:
    """
    Pulse train sum_k s_k p(t - kT - timing_offset) evaluated at exact
    (fractional) times; symbols[i] is symbol k = k_min + i.
    """
    T = 1.0 / qpsk.f_sym
    span = qpsk.span_symbols * T
    baseband = np.zeros(t.shape, dtype=np.complex128)
    for i, symbol in enumerate(symbols):
        center = (k_min + i) * T + qpsk.timing_offset
        lo, hi = np.searchsorted(t, [center - span, center + span], side='left')
        if hi <= lo:
            continue
        baseband[lo:hi] += symbol * rrc_pulse(t[lo:hi] - center, qpsk.rolloff, T)
    return baseband


def gen_qpsk(common: CommonParams, qpsk: QpskParams, symbols: np.ndarray, normalize: bool = True) -> PassbandSequence:
    """RRC-shaped QPSK at f_true; `symbols` must cover qpsk_symbol_range(common, qpsk)."""
    if not 0 < qpsk.rolloff <= 1:
        raise ValueError(f"rolloff must lie in (0, 1], got {qpsk.rolloff}.")
    k_range = qpsk_symbol_range(common, qpsk)
    symbols = np.asarray(symbols, dtype=np.complex128)
    if symbols.size < len(k_range):
        raise ValueError(f"Need {len(k_range)} symbols to cover the window and pulse tails, got {symbols.size}.")
    t = _sample_times(common)
    baseband = qpsk_baseband(t, symbols[:len(k_range)], qpsk, k_range.start)
    return _emit(_mix_to_passband(baseband, common), 'qpsk', normalize)


# =================================================================================
#  OFDM
# =================================================================================

def ofdm_symbol_range(common: CommonParams, ofdm: OfdmParams) -> range:
    """OFDM symbol indices l overlapping the window (l = -1 precedes the offset start)."""
    t_end = (common.n_pass - 1) / common.f_s
    l_min = -1 if ofdm.timing_offset > 0 else 0
    l_max = int(math.floor((t_end - ofdm.timing_offset) * ofdm.scs))
    return range(l_min, l_max + 1)


def subcarrier_offsets(ofdm: OfdmParams) -> np.ndarray:
    """Subcarrier frequencies relative to the carrier, symmetric about zero."""
    m = np.arange(ofdm.n_carriers, dtype=np.float64)
    return (m - ofdm.n_carriers / 2 + 0.5) * ofdm.scs


def ofdm_baseband(t: np.ndarray, data: np.ndarray, ofdm: OfdmParams, l_min: int) -> np.ndarray:
    """
    CP-free OFDM: during symbol l, sum_m d_m(l) exp(j*2*pi*f_m*u) with u the
    time since the start of symbol l. data[i] holds the subcarrier symbols of
    l = l_min + i.
    """
    shifted = t - ofdm.timing_offset
    symbol_index = np.floor(shifted * ofdm.scs).astype(np.int64)
    local_time = shifted - symbol_index / ofdm.scs
    rows = data[symbol_index - l_min]
    tones = np.exp(2j * math.pi * np.outer(local_time, subcarrier_offsets(ofdm)))
    return np.sum(rows * tones, axis=1) / math.sqrt(ofdm.n_carriers)


def gen_ofdm(common: CommonParams, ofdm: OfdmParams, data: np.ndarray, normalize: bool = True) -> PassbandSequence:
    """OFDM at f_true; `data` has shape (len(ofdm_symbol_range), n_carriers)."""
    if ofdm.n_carriers == 0:
        raise ValueError("n_carriers must be at least 1.")
    l_range = ofdm_symbol_range(common, ofdm)
    data = np.asarray(data, dtype=np.complex128)
    if data.ndim != 2 or data.shape[1] != ofdm.n_carriers or data.shape[0] < len(l_range):
        raise ValueError(
            f"OFDM data must have shape ({len(l_range)}, {ofdm.n_carriers}), got {data.shape}."
        )
    t = _sample_times(common)
    baseband = ofdm_baseband(t, data, ofdm, l_range.start)
    return _emit(_mix_to_passband(baseband, common), 'ofdm', normalize)
