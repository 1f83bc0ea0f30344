# -*- coding: utf-8 -*-
"""Builds one labelled trial (passband synthesis -> AWGN -> DCV) from its sequence seed."""

from functools import lru_cache

import numpy as np

from sdlab.generators import frontend, waveforms
from sdlab.models.signal_params import (
    CommonParams, DatasetRecord, OfdmParams, PassbandSequence, QpskParams, SimulationParams,
)
from sdlab.utils.constants import LABEL_NOISE_ONLY, LABEL_SIGNAL_PRESENT, PHASE_RANGE


@lru_cache(maxsize=8)
def _cached_filter(order: int, cutoff_hz: float, f_s: float) -> frontend.FilterDesign:
    return frontend.design_butterworth(order, cutoff_hz, f_s)


def synthesize(kind: str, sim: SimulationParams, rng: np.random.Generator):
    """
    Draws the per-trial unknowns and synthesizes the noiseless passband.
    Draw order is fixed (f_c, phase, timing offset, symbols) so a seed
    always yields the same signal whether or not it is later used.

    Returns:
        (PassbandSequence, f_c, phase, timing_offset)
    """
    f_c = float(rng.uniform(sim.f_c_min, sim.f_c_max))
    phase = float(rng.uniform(*PHASE_RANGE))
    common = CommonParams(f_s=sim.f_s, f_true=sim.f_true, n_pass=sim.n_pass, phase=phase)

    if kind == 'sine':
        return waveforms.gen_sine(common), f_c, phase, 0.0

    if kind == 'qpsk':
        period = 1.0 / sim.qpsk_symbol_rate
        qpsk = QpskParams(
            f_sym=sim.qpsk_symbol_rate, rolloff=sim.qpsk_rolloff,
            timing_offset=float(rng.uniform(0.0, period)), span_symbols=sim.rrc_span,
        )
        symbols = waveforms.gray_qpsk_symbols(rng, len(waveforms.qpsk_symbol_range(common, qpsk)))
        return waveforms.gen_qpsk(common, qpsk, symbols), f_c, phase, qpsk.timing_offset

    if kind == 'ofdm':
        ofdm = OfdmParams(
            n_carriers=sim.ofdm_carriers, scs=sim.ofdm_scs,
            timing_offset=float(rng.uniform(0.0, 1.0 / sim.ofdm_scs)),
        )
        n_symbols = len(waveforms.ofdm_symbol_range(common, ofdm))
        data = waveforms.gray_qpsk_symbols(rng, n_symbols * ofdm.n_carriers).reshape(n_symbols, ofdm.n_carriers)
        return waveforms.gen_ofdm(common, ofdm, data), f_c, phase, ofdm.timing_offset

    raise ValueError(f"Unknown signal kind '{kind}'.")


def build_trial(
    kind: str,
    seq_seed: int,
    snr_db: int,
    signal_present: bool,
    sim: SimulationParams,
    keep_template: bool = False,
) -> DatasetRecord:
    """
    Builds one record. The genie template is the DCV output of the same
    noiseless trial; noise-only records get a zero template unless
    keep_template is set (calibration of the matched filter needs one).
    """
    rng = np.random.default_rng(seq_seed)

    clean, f_c, phase, timing_offset = synthesize(kind, sim, rng)
    params = sim.frontend(f_c)
    filt = _cached_filter(params.lpf_order, params.lpf_bandwidth, sim.f_s)
    received = frontend.add_noise(clean, snr_db, rng, signal_present=signal_present)

    if signal_present or keep_template:
        # One batched pass filters the received and noiseless windows together.
        iq_raw, template = frontend.downconvert(np.stack([received.samples, clean.samples]), params.f_c, filt, params.n_s)
    else:
        iq_raw = frontend.downconvert(received.samples, params.f_c, filt, params.n_s)
        template = np.zeros(params.n_s, dtype=np.complex128)

    return DatasetRecord(
        label=LABEL_SIGNAL_PRESENT if signal_present else LABEL_NOISE_ONLY,
        kind=kind,
        snr_db=int(snr_db),
        seq_seed=int(seq_seed),
        f_c=f_c,
        phase=phase,
        timing_offset=timing_offset,
        iq_raw=iq_raw,
        iq_norm=frontend.normalize_ml(iq_raw),
        template=template,
    )


def build_noise_trial(kind: str, seq_seed: int, snr_db: int, sim: SimulationParams) -> DatasetRecord:
    """
    Noise-only record with a zero template and no waveform synthesis: f_c is
    the only draw ahead of the noise. Used for the H0 populations of
    detectors that never read a template.
    """
    rng = np.random.default_rng(seq_seed)
    f_c = float(rng.uniform(sim.f_c_min, sim.f_c_max))
    params = sim.frontend(f_c)
    filt = _cached_filter(params.lpf_order, params.lpf_bandwidth, sim.f_s)
    silent = PassbandSequence(samples=np.zeros(sim.n_pass), kind=kind, power=0.0)
    received = frontend.add_noise(silent, snr_db, rng, signal_present=False)
    iq_raw = frontend.downconvert(received.samples, params.f_c, filt, params.n_s)

    return DatasetRecord(
        label=LABEL_NOISE_ONLY,
        kind=kind,
        snr_db=int(snr_db),
        seq_seed=int(seq_seed),
        f_c=f_c,
        phase=0.0,
        timing_offset=0.0,
        iq_raw=iq_raw,
        iq_norm=frontend.normalize_ml(iq_raw),
        template=np.zeros(params.n_s, dtype=np.complex128),
    )
