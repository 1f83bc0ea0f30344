# -*- coding: utf-8 -*-
"""
Classical decision statistics on baseband I/Q: energy, Fisher (periodogram
peak ratio) and coherent matched filter. Each accepts one sequence or a 2-D
batch with time on the last axis; thresholding lives in the calibrator.
"""

from typing import Union

import numpy as np

Sigma = Union[float, np.ndarray]


def _check_sigma(sigma: Sigma) -> np.ndarray:
    # Scalar, or one value per row of a batch.
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma <= 0):
        raise ValueError("Noise standard deviation sigma must be positive.")
    return sigma


def energy_stat(y: np.ndarray, sigma: Sigma) -> Union[float, np.ndarray]:
    """sum |y[i]|^2 / sigma^2, so one threshold serves every noise power."""
    y = np.asarray(y)
    sigma = _check_sigma(sigma)
    energy = np.sum(np.abs(y) ** 2, axis=-1)
    return energy / sigma ** 2


def fisher_stat(y: np.ndarray) -> Union[float, np.ndarray]:
    """max_n |Y[n]|^2 / sum_n |Y[n]|^2 with Y the unnormalized, unpadded FFT of y."""
    y = np.asarray(y)
    periodogram = np.abs(np.fft.fft(y, axis=-1)) ** 2
    total = periodogram.sum(axis=-1)
    if np.any(total == 0):
        raise ValueError("Fisher statistic is undefined for an all-zero sequence.")
    return periodogram.max(axis=-1) / total


def mf_stat(y: np.ndarray, h: np.ndarray, sigma: Sigma) -> Union[float, np.ndarray]:
    """Re{sum y[n] h*[n]} / (sigma * ||h||): coherent correlation with the genie template."""
    y = np.asarray(y)
    h = np.asarray(h)
    if y.shape != h.shape:
        raise ValueError(f"Sequence shape {y.shape} does not match template shape {h.shape}.")
    norm = np.sqrt(np.sum(np.abs(h) ** 2, axis=-1))
    if np.any(norm == 0):
        raise ValueError("Matched-filter template must be nonzero.")
    sigma = _check_sigma(sigma)
    r = np.sum(y * np.conj(h), axis=-1)
    return np.real(r) / (sigma * norm)
