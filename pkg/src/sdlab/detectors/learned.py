# -*- coding: utf-8 -*-
"""
Deterministic-kernel learned detector.

A fixed bank of 84 zero-sum kernels (length 9, weights -1 and 2) is convolved
at a geometric grid of dilations with one of the I, Q or I+Q channels of the
normalized sequence. Each (kernel, dilation) output is pooled into
proportion-of-positive-values (PPV) features against biases fitted from
training data, and a ridge-regression scorer maps the standardized features
to a continuous detection score.

Feature order: combination c = dilation_index * 84 + kernel_index, then bias.
"""

from concurrent.futures import ThreadPoolExecutor
from itertools import combinations
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.linear_model import RidgeCV
from sklearn.model_selection import KFold
from sklearn.preprocessing import StandardScaler

from sdlab.models.signal_params import BasebandSequence
from sdlab.utils.constants import (
    DEFAULT_NUM_FEATURES, KERNEL_LENGTH, MAX_DILATIONS_PER_KERNEL, NUM_KERNELS,
)

CHANNELS = ('I', 'Q', 'I+Q')
PADDINGS = ('same', 'valid')


def kernel_positions() -> np.ndarray:
    """(84, 3) positions of the weight-2 taps, in lexicographic order."""
    return np.array(list(combinations(range(KERNEL_LENGTH), 3)), dtype=np.int64)


def kernel_weights() -> np.ndarray:
    """(84, 9) weight matrix: -1 everywhere, 2 at the three tap positions."""
    weights = -np.ones((NUM_KERNELS, KERNEL_LENGTH), dtype=np.float64)
    for row, taps in enumerate(kernel_positions()):
        weights[row, taps] = 2.0
    return weights


# =================================================================================
#  Artifacts
# =================================================================================

class FeatureSpec(BaseModel):
    """How the PPV features of a bank are laid out and where their biases came from."""
    model_config = ConfigDict(frozen=True)

    num_features: int
    features_per_dilation: Tuple[int, ...]
    quantiles: Tuple[Tuple[float, ...], ...]
    paddings: Tuple[str, ...]
    fit_indices: Optional[Tuple[int, ...]] = None


class KernelBank(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n_s: int = Field(..., ge=KERNEL_LENGTH)
    seed: int = Field(0, ge=0)
    dilations: Tuple[int, ...]
    features_per_dilation: Tuple[int, ...]
    channels: Tuple[str, ...]
    paddings: Tuple[str, ...]
    biases: Optional[np.ndarray] = None
    fit_indices: Optional[Tuple[int, ...]] = None

    @property
    def num_features(self) -> int:
        return NUM_KERNELS * sum(self.features_per_dilation)

    @property
    def num_combinations(self) -> int:
        return NUM_KERNELS * len(self.dilations)

    @property
    def is_fitted(self) -> bool:
        return self.biases is not None

    def combination(self, c: int) -> Tuple[int, int, int]:
        """(kernel index, dilation index, number of biases) of combination c."""
        dilation_index, kernel_index = divmod(c, NUM_KERNELS)
        return kernel_index, dilation_index, self.features_per_dilation[dilation_index]

    def feature_offsets(self) -> np.ndarray:
        counts = [self.combination(c)[2] for c in range(self.num_combinations)]
        return np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)

    def feature_spec(self) -> FeatureSpec:
        return FeatureSpec(
            num_features=self.num_features,
            features_per_dilation=self.features_per_dilation,
            quantiles=tuple(tuple(bias_quantiles(b)) for b in self.features_per_dilation),
            paddings=self.paddings,
            fit_indices=self.fit_indices,
        )


class LinearModel(BaseModel):
    """Standardization plus ridge weights; score = w . (f - mean) / scale + intercept."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    weights: np.ndarray
    intercept: float
    means: np.ndarray
    scales: np.ndarray
    alpha: float

    @property
    def num_features(self) -> int:
        return int(self.weights.shape[0])


def bias_quantiles(count: int) -> np.ndarray:
    """Quantile positions (2k-1)/(2B), k = 1..B."""
    k = np.arange(1, count + 1, dtype=np.float64)
    return (2 * k - 1) / (2 * count)


# =================================================================================
#  Bank construction
# =================================================================================

def dilation_schedule(n_s: int, features_per_kernel: int) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    """
    Geometric dilation grid d_j = floor(2^(j*log2(D_max)/(J-1))) with
    D_max = floor((n_s-1)/8), deduplicated. Duplicates fold into the bias
    count of the surviving dilation; the per-kernel feature budget is then
    spread over the grid, remainder first-come.
    """
    d_max = (n_s - 1) // (KERNEL_LENGTH - 1)
    grid_size = min(features_per_kernel, MAX_DILATIONS_PER_KERNEL)
    raw = np.floor(np.logspace(0, np.log2(d_max), grid_size, base=2) + 1e-9).astype(np.int64)
    dilations, counts = np.unique(raw, return_counts=True)

    per_dilation = np.floor(counts * (features_per_kernel / grid_size)).astype(np.int64)
    remainder = features_per_kernel - int(per_dilation.sum())
    i = 0
    while remainder > 0:
        per_dilation[i] += 1
        remainder -= 1
        i = (i + 1) % len(per_dilation)
    return tuple(int(d) for d in dilations), tuple(int(n) for n in per_dilation)


def build_kernel_bank(n_s: int, num_features: int = DEFAULT_NUM_FEATURES, seed: int = 0) -> KernelBank:
    """
    Kernel bank skeleton without biases. The feature count is rounded down to
    a multiple of the kernel count.
    """
    if n_s < KERNEL_LENGTH:
        raise ValueError(f"Sequence length {n_s} is shorter than the kernel length {KERNEL_LENGTH}.")
    if num_features < NUM_KERNELS:
        raise ValueError(f"num_features must be at least {NUM_KERNELS}, got {num_features}.")

    dilations, per_dilation = dilation_schedule(n_s, num_features // NUM_KERNELS)
    n_comb = NUM_KERNELS * len(dilations)
    return KernelBank(
        n_s=n_s,
        seed=seed,
        dilations=dilations,
        features_per_dilation=per_dilation,
        channels=tuple(CHANNELS[c % len(CHANNELS)] for c in range(n_comb)),
        paddings=tuple(PADDINGS[c % 2] for c in range(n_comb)),
    )


# =================================================================================
#  Convolution
# =================================================================================

def _as_batch(y: Union[BasebandSequence, np.ndarray], n_s: int) -> Tuple[np.ndarray, bool]:
    iq = y.iq if isinstance(y, BasebandSequence) else np.asarray(y)
    single = iq.ndim == 1
    batch = iq[np.newaxis, :] if single else iq
    if batch.shape[-1] != n_s:
        raise ValueError(f"Sequence length {batch.shape[-1]} does not match the kernel bank's N_s={n_s}.")
    return batch.astype(np.complex128, copy=False), single


def channel_view(iq: np.ndarray, channel: str) -> np.ndarray:
    if channel == 'I':
        return iq.real
    if channel == 'Q':
        return iq.imag
    return iq.real + iq.imag


def _shifted_taps(x: np.ndarray, dilation: int, padding: str) -> np.ndarray:
    """(9, batch, L_out) stack of the dilated taps; 'same' pads by edge replication."""
    half = (KERNEL_LENGTH // 2) * dilation
    if padding == 'same':
        x = np.pad(x, ((0, 0), (half, half)), mode='edge')
    out_len = x.shape[-1] - (KERNEL_LENGTH - 1) * dilation
    return np.stack([x[:, i * dilation:i * dilation + out_len] for i in range(KERNEL_LENGTH)])


def _kernel_output(taps: np.ndarray, total: np.ndarray, positions: np.ndarray) -> np.ndarray:
    # -1 on every tap plus 3 on the three weight-2 taps.
    return -total + 3.0 * (taps[positions[0]] + taps[positions[1]] + taps[positions[2]])


def convolve(bank: KernelBank, iq: np.ndarray, c: int) -> np.ndarray:
    """Output of combination c on a (batch, n_s) complex array: (batch, L_out)."""
    kernel_index, dilation_index, _ = bank.combination(c)
    x = channel_view(iq, bank.channels[c])
    taps = _shifted_taps(x, bank.dilations[dilation_index], bank.paddings[c])
    return _kernel_output(taps, taps.sum(axis=0), kernel_positions()[kernel_index])


# =================================================================================
#  Bias fitting and PPV transform
# =================================================================================

def fit_biases(bank: KernelBank, examples: np.ndarray) -> KernelBank:
    """
    For each combination, convolves one training example (drawn with the
    bank's seed) and places the biases at the (2k-1)/(2B) quantiles of that
    output. Returns a new bank with biases and fit indices set.
    """
    batch, _ = _as_batch(examples, bank.n_s)
    if batch.shape[0] == 0:
        raise ValueError("Bias fitting needs at least one training example.")

    rng = np.random.default_rng(bank.seed)
    fit_indices = rng.integers(0, batch.shape[0], size=bank.num_combinations)
    offsets = bank.feature_offsets()
    biases = np.empty(bank.num_features, dtype=np.float64)
    for c in range(bank.num_combinations):
        output = convolve(bank, batch[fit_indices[c]:fit_indices[c] + 1], c)[0]
        count = bank.combination(c)[2]
        biases[offsets[c]:offsets[c + 1]] = np.quantile(output, bias_quantiles(count))

    biases.setflags(write=False)
    return bank.model_copy(update={'biases': biases, 'fit_indices': tuple(int(i) for i in fit_indices)})


def proportion_above(output: np.ndarray, biases: np.ndarray) -> np.ndarray:
    """
    (M, B) fraction of each row of `output` (M, L) lying strictly above each
    bias. Each value is placed among the sorted biases once and the
    placements are histogrammed per row.
    """
    rows, length = output.shape
    count = biases.shape[0]
    order = np.argsort(biases, kind='stable')
    # below[m, n] = number of biases strictly less than output[m, n]
    below = np.searchsorted(biases[order], output, side='left')
    offsets = np.arange(rows, dtype=np.int64)[:, np.newaxis] * (count + 1)
    hist = np.bincount((below + offsets).ravel(), minlength=rows * (count + 1)).reshape(rows, count + 1)
    above = np.empty((rows, count), dtype=np.float64)
    above[:, order] = length - np.cumsum(hist[:, :count], axis=1)
    return above / length


def transform(bank: KernelBank, y: Union[BasebandSequence, np.ndarray]) -> np.ndarray:
    """PPV features of one normalized sequence (num_features,) or a batch (M, num_features)."""
    if not bank.is_fitted:
        raise ValueError("Kernel bank biases are not fitted.")
    batch, single = _as_batch(y, bank.n_s)
    features = np.empty((batch.shape[0], bank.num_features), dtype=np.float32)
    offsets = bank.feature_offsets()
    positions = kernel_positions()

    for dilation_index, dilation in enumerate(bank.dilations):
        cache = {}
        for kernel_index in range(NUM_KERNELS):
            c = dilation_index * NUM_KERNELS + kernel_index
            key = (bank.channels[c], bank.paddings[c])
            if key not in cache:
                taps = _shifted_taps(channel_view(batch, key[0]), dilation, key[1])
                cache[key] = (taps, taps.sum(axis=0))
            taps, total = cache[key]
            output = _kernel_output(taps, total, positions[kernel_index])
            biases = bank.biases[offsets[c]:offsets[c + 1]]
            features[:, offsets[c]:offsets[c + 1]] = proportion_above(output, biases)
    return features[0] if single else features


# =================================================================================
#  Ridge scorer
# =================================================================================

def train(
    features: np.ndarray,
    labels: np.ndarray,
    alphas: Sequence[float],
    cv_folds: int = 5,
    seed: int = 0,
) -> LinearModel:
    """
    Standardizes the features and fits ridge regression against {-1, +1}
    targets, choosing the ridge parameter by k-fold cross-validated squared
    error over `alphas`. Labels may be given as {0, 1} or {-1, +1}.
    """
    x = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if x.ndim != 2 or x.shape[0] != labels.shape[0]:
        raise ValueError("features must be (M, F) with one label per row.")
    targets = np.where(labels > 0, 1.0, -1.0)
    if np.unique(targets).size < 2:
        raise ValueError("Training needs both noise-only and signal-present examples.")
    if len(alphas) == 0 or min(alphas) <= 0:
        raise ValueError("The ridge grid must be a nonempty list of positive values.")

    scaler = StandardScaler().fit(x)
    folds = KFold(n_splits=max(2, min(cv_folds, x.shape[0])), shuffle=True, random_state=seed % 2**32)
    ridge = RidgeCV(alphas=np.asarray(alphas, dtype=np.float64), cv=folds, scoring='neg_mean_squared_error')
    ridge.fit(scaler.transform(x), targets)

    return LinearModel(
        weights=np.asarray(ridge.coef_, dtype=np.float64).ravel(),
        intercept=float(ridge.intercept_),
        means=np.asarray(scaler.mean_, dtype=np.float64),
        scales=np.asarray(scaler.scale_, dtype=np.float64),
        alpha=float(ridge.alpha_),
    )


def score(model: LinearModel, features: np.ndarray) -> Union[float, np.ndarray]:
    """Detection score(s); higher means signal present."""
    f = np.asarray(features, dtype=np.float64)
    if f.shape[-1] != model.num_features:
        raise ValueError(f"Feature length {f.shape[-1]} does not match the model's {model.num_features}.")
    return ((f - model.means) / model.scales) @ model.weights + model.intercept


def spread_indices(total: int, count: Optional[int]) -> np.ndarray:
    """`count` indices spread evenly over range(total); all of them when count is None or larger."""
    if count is None or count >= total:
        return np.arange(total)
    return np.linspace(0, total - 1, count).astype(np.int64)


# =================================================================================
#  Estimator wrapper
# =================================================================================

class KernelFeatureDetector(BaseEstimator, TransformerMixin):
    """
    fit / transform / decision_function over normalized I/Q batches. Batches
    are transformed in chunks, fanned out over `workers` threads.
    """

    def __init__(self, num_features=DEFAULT_NUM_FEATURES, seed=0, alphas=(1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0),
                 cv_folds=5, bias_fit_examples=None, workers=1, chunk_size=1024):
        self.num_features = num_features
        self.seed = seed
        self.alphas = alphas
        self.cv_folds = cv_folds
        self.bias_fit_examples = bias_fit_examples
        self.workers = workers
        self.chunk_size = chunk_size

    def fit(self, X, y):
        X = np.asarray(X)
        bank = build_kernel_bank(X.shape[-1], self.num_features, self.seed)
        self.bank_ = fit_biases(bank, X[spread_indices(X.shape[0], self.bias_fit_examples)])
        self.model_ = train(self.transform(X), y, self.alphas, self.cv_folds, self.seed)
        return self

    def transform(self, X):
        X = np.asarray(X)
        if X.ndim == 1 or X.shape[0] <= self.chunk_size:
            return transform(self.bank_, X)
        chunks = [X[i:i + self.chunk_size] for i in range(0, X.shape[0], self.chunk_size)]
        if self.workers <= 1:
            return np.concatenate([transform(self.bank_, c) for c in chunks])
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            return np.concatenate(list(pool.map(lambda c: transform(self.bank_, c), chunks)))

    def decision_function(self, X):
        return score(self.model_, self.transform(X))

    @classmethod
    def from_artifacts(cls, bank: KernelBank, model: LinearModel, workers: int = 1) -> 'KernelFeatureDetector':
        detector = cls(num_features=bank.num_features, seed=bank.seed, workers=workers)
        detector.bank_ = bank
        detector.model_ = model
        return detector
