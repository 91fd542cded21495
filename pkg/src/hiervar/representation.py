"""Random-kernel featurization: fixed-weight dilated kernels pooled by
threshold exceedance rate (TER) or randomized-threshold TER (rTER).

Every kernel has length 9 with three weights equal to 2 and six equal to -1,
giving 84 distinct patterns.  A feature is a (pattern, dilation, padding,
threshold) tuple; its value for a series is the fraction of convolution
outputs strictly above the threshold.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from itertools import combinations
from pathlib import Path

import numpy as np

from .data import TimeSeriesDataset
from .errors import ConfigurationError, LengthError, ModeError, StateError

KERNEL_LENGTH = 9
TER = "ter"
RTER = "rter"
MODES = (TER, RTER)
MAX_DILATION_DRAWS = 32
RTER_SAMPLE_SERIES = 10
RTER_QUANTILE = 0.9

BANK_FORMAT = "hiervar-kernel-bank"
BANK_VERSION = 1

# seed streams, so each random decision can be reproduced in isolation
_STREAM_STRUCTURE = 0
_STREAM_RTER = 1
_STREAM_BIASES = 2

# cap on elements of a single intermediate convolution block
_BLOCK_ELEMENTS = 4_000_000


def weight_patterns() -> np.ndarray:
    """The 84 kernels, one row per choice of three positions carrying weight 2."""
    rows = []
    for positions in combinations(range(KERNEL_LENGTH), 3):
        row = np.full(KERNEL_LENGTH, -1.0)
        row[list(positions)] = 2.0
        rows.append(row)
    return np.array(rows)


N_PATTERNS = 84


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), stream])


def _check_mode(mode: str) -> str:
    mode = str(mode).lower()
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES}, got {mode!r}")
    return mode


@dataclass(frozen=True, eq=False)
class KernelBank:
    """Frozen hyperparameters of the featurizer.

    Per-feature arrays have length ``n_features``.  ``biases`` holds NaN until
    :func:`fit_biases` is called (TER mode only).
    """

    kernel_weights: np.ndarray
    feature_to_kernel: np.ndarray
    dilations: np.ndarray
    paddings: np.ndarray
    biases: np.ndarray
    mode: str
    seed: int
    series_length: int
    threshold_range: float | None = None

    @property
    def n_features(self) -> int:
        return len(self.feature_to_kernel)

    @property
    def is_fitted(self) -> bool:
        return bool(np.all(~np.isnan(self.biases)))

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.mode}|{self.seed}|{self.series_length}|{self.threshold_range}".encode())
        for arr in (self.kernel_weights, self.feature_to_kernel, self.dilations,
                    self.paddings, self.biases):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()[:16]

    def __eq__(self, other):
        if not isinstance(other, KernelBank):
            return NotImplemented
        return self.fingerprint() == other.fingerprint()

    __hash__ = None


@dataclass(frozen=True)
class FeatureMatrix:
    """N x K exceedance-rate features plus the fingerprint of the bank that made them."""

    values: np.ndarray
    provenance: str = ""

    @property
    def feature_count(self) -> int:
        return self.values.shape[1]

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]


def _as_series(data) -> np.ndarray:
    x = data.series if isinstance(data, TimeSeriesDataset) else data
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    return x


def _check_length(bank: KernelBank, length: int):
    if length < KERNEL_LENGTH:
        raise LengthError(f"series length {length} is shorter than the kernel length 9")
    bad = (KERNEL_LENGTH - 1) * bank.dilations >= length
    if np.any(bad):
        raise LengthError(
            f"dilation {int(bank.dilations[bad].max())} is too large for series length {length}"
        )


def convolve(x: np.ndarray, weights: np.ndarray, dilation: int, padded: bool) -> np.ndarray:
    """Dilated convolution of every series in ``x`` (N x L) with every kernel row.

    Returns an array of shape (n_kernels, N, M) where M = L when padded
    (4 * dilation zeros on each side) and L - 8 * dilation otherwise.  Taps
    are accumulated in kernel order, the same order as a scalar loop.
    """
    x = np.atleast_2d(x)
    weights = np.atleast_2d(weights)
    length = x.shape[1]
    if padded:
        pad = (KERNEL_LENGTH - 1) // 2 * dilation
        x = np.pad(x, ((0, 0), (pad, pad)))
        m = length
    else:
        m = length - (KERNEL_LENGTH - 1) * dilation
    if m <= 0:
        raise LengthError(f"dilation {dilation} leaves no valid output for length {length}")
    out = np.zeros((weights.shape[0], x.shape[0], m))
    for j in range(KERNEL_LENGTH):
        start = j * dilation
        out += weights[:, j, None, None] * x[None, :, start:start + m]
    return out


def _groups(bank: KernelBank):
    """Feature indices grouped by (dilation, padding)."""
    keys = np.stack([bank.dilations, bank.paddings.astype(np.int64)], axis=1)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    for g, (dilation, padded) in enumerate(uniq):
        yield int(dilation), bool(padded), np.flatnonzero(inverse == g)


def generate_kernel_bank(
    series_length: int,
    n_features: int = 10_000,
    mode: str = TER,
    seed: int = 0,
    *,
    train=None,
    threshold_range: float | None = None,
) -> KernelBank:
    """Draw the random structure of a featurizer for series of a given length.

    Dilations are ``floor(2**u)`` with ``u ~ U[0, log2((L - 1) / 8)]``, one
    draw per block of 84 features up to 32 draws.  Features are spread over
    the (dilation draw, pattern) pairs as evenly as possible, contiguous per
    pair, and padding alternates feature by feature.

    In rTER mode thresholds are drawn from ``U[-q, q]``.  ``q`` is
    ``threshold_range`` when given, otherwise the 0.9 quantile of absolute
    convolution outputs over 10 random series of ``train``.
    """
    mode = _check_mode(mode)
    if series_length < KERNEL_LENGTH:
        raise LengthError(f"series length must be at least {KERNEL_LENGTH}, got {series_length}")
    if n_features < N_PATTERNS:
        raise ConfigurationError(f"need at least {N_PATTERNS} features, got {n_features}")
    if seed < 0 or seed >= 2**64:
        raise ConfigurationError("seed must be an unsigned 64-bit integer")

    rng = _rng(seed, _STREAM_STRUCTURE)
    max_exponent = np.log2((series_length - 1) / (KERNEL_LENGTH - 1))
    n_draws = min(n_features // N_PATTERNS, MAX_DILATION_DRAWS)
    draws = np.sort(np.floor(2.0 ** rng.uniform(0.0, max_exponent, n_draws)).astype(np.int64))

    n_pairs = n_draws * N_PATTERNS
    per_pair = np.full(n_pairs, n_features // n_pairs)
    per_pair[: n_features % n_pairs] += 1
    pair_dilation = np.repeat(draws, N_PATTERNS)
    pair_kernel = np.tile(np.arange(N_PATTERNS), n_draws)

    bank = KernelBank(
        kernel_weights=weight_patterns(),
        feature_to_kernel=np.repeat(pair_kernel, per_pair),
        dilations=np.repeat(pair_dilation, per_pair),
        paddings=np.arange(n_features) % 2 == 1,
        biases=np.full(n_features, np.nan),
        mode=mode,
        seed=int(seed),
        series_length=int(series_length),
    )

    if mode == RTER:
        if threshold_range is None:
            if train is None:
                raise ConfigurationError("rTER mode needs threshold_range or training data")
            threshold_range = estimate_threshold_range(bank, train, seed)
        if not threshold_range > 0:
            raise ConfigurationError("threshold_range must be positive")
        thresholds = _rng(seed, _STREAM_RTER).uniform(-threshold_range, threshold_range, n_features)
        bank = replace(bank, biases=thresholds, threshold_range=float(threshold_range))
    return bank


def estimate_threshold_range(bank: KernelBank, train, seed: int) -> float:
    """0.9 quantile of |convolution output| across a sample of training series."""
    x = _as_series(train)
    _check_length(bank, x.shape[1])
    rng = _rng(seed, _STREAM_RTER + 100)
    rows = rng.choice(x.shape[0], size=min(RTER_SAMPLE_SERIES, x.shape[0]), replace=False)
    sample = x[np.sort(rows)]
    outputs = []
    for dilation, padded, idx in _groups(bank):
        kernels = np.unique(bank.feature_to_kernel[idx])
        outputs.append(np.abs(convolve(sample, bank.kernel_weights[kernels], dilation, padded)).ravel())
    q = float(np.quantile(np.concatenate(outputs), RTER_QUANTILE))
    return q if q > 0 else 1.0


def _quantile(sorted_values: np.ndarray, level: float) -> float:
    pos = level * (len(sorted_values) - 1)
    lo = int(np.floor(pos))
    hi = min(lo + 1, len(sorted_values) - 1)
    frac = pos - lo
    a, b = sorted_values[lo], sorted_values[hi]
    return float(a + frac * (b - a))


def fit_biases(bank: KernelBank, train, seed: int | None = None) -> KernelBank:
    """Set each TER threshold to a random quantile of one training series'
    convolution output under that feature's kernel, dilation and padding.

    The series and quantile level are drawn per feature from ``seed``
    (defaults to the bank's seed).
    """
    if bank.mode != TER:
        raise ModeError("rTER thresholds are drawn when the bank is generated")
    x = _as_series(train)
    if x.shape[0] == 0:
        raise ConfigurationError("training set is empty")
    _check_length(bank, x.shape[1])
    seed = bank.seed if seed is None else seed
    rng = _rng(seed, _STREAM_BIASES)
    rows = rng.integers(0, x.shape[0], bank.n_features)
    levels = rng.uniform(0.0, 1.0, bank.n_features)

    biases = np.empty(bank.n_features)
    for dilation, padded, idx in _groups(bank):
        kernels, kpos = np.unique(bank.feature_to_kernel[idx], return_inverse=True)
        samples, spos = np.unique(rows[idx], return_inverse=True)
        conv = np.sort(convolve(x[samples], bank.kernel_weights[kernels], dilation, padded), axis=2)
        for f, ki, si in zip(idx, kpos.ravel(), spos.ravel()):
            biases[f] = _quantile(conv[ki, si], levels[f])
    return replace(bank, biases=biases)


def transform(dataset, bank: KernelBank) -> FeatureMatrix:
    """Exceedance-rate features: ``values[n, k] = mean(conv_k(x_n) > bias_k)``."""
    if not bank.is_fitted:
        raise StateError("kernel bank thresholds are not set; call fit_biases first")
    x = _as_series(dataset)
    _check_length(bank, x.shape[1])
    n, length = x.shape
    values = np.empty((n, bank.n_features))

    for dilation, padded, idx in _groups(bank):
        kernels, kpos = np.unique(bank.feature_to_kernel[idx], return_inverse=True)
        kpos = kpos.ravel()
        m = length if padded else length - (KERNEL_LENGTH - 1) * dilation
        biases = bank.biases[idx][:, None, None]
        step = max(1, _BLOCK_ELEMENTS // (max(len(idx), len(kernels)) * m))
        for lo in range(0, n, step):
            conv = convolve(x[lo:lo + step], bank.kernel_weights[kernels], dilation, padded)
            counts = np.count_nonzero(conv[kpos] > biases, axis=2)
            values[lo:lo + step, idx] = (counts / m).T
    return FeatureMatrix(values=values, provenance=bank.fingerprint())


def select_features(bank: KernelBank, indices) -> KernelBank:
    """Bank restricted to the given features, in ascending index order.

    Transforming with the reduced bank gives exactly the matching columns of
    the full transform, at a fraction of the cost.
    """
    idx = np.unique(np.asarray(indices, dtype=np.int64))
    return replace(
        bank,
        feature_to_kernel=bank.feature_to_kernel[idx],
        dilations=bank.dilations[idx],
        paddings=bank.paddings[idx],
        biases=bank.biases[idx],
    )


def save_kernel_bank(bank: KernelBank, path) -> None:
    payload = {
        "format": BANK_FORMAT,
        "version": BANK_VERSION,
        "mode": bank.mode,
        "seed": bank.seed,
        "series_length": bank.series_length,
        "n_features": bank.n_features,
        "threshold_range": bank.threshold_range,
        "feature_to_kernel": bank.feature_to_kernel.tolist(),
        "dilations": bank.dilations.tolist(),
        "paddings": bank.paddings.astype(int).tolist(),
        "biases": [None if np.isnan(b) else float(b) for b in bank.biases],
        "fingerprint": bank.fingerprint(),
    }
    Path(path).write_text(json.dumps(payload))


def load_kernel_bank(path) -> KernelBank:
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != BANK_FORMAT:
        raise ConfigurationError(f"{path} is not a kernel bank file")
    if payload.get("version") != BANK_VERSION:
        raise ConfigurationError(f"unsupported kernel bank version {payload.get('version')}")
    bank = KernelBank(
        kernel_weights=weight_patterns(),
        feature_to_kernel=np.array(payload["feature_to_kernel"], dtype=np.int64),
        dilations=np.array(payload["dilations"], dtype=np.int64),
        paddings=np.array(payload["paddings"], dtype=bool),
        biases=np.array([np.nan if b is None else b for b in payload["biases"]], dtype=np.float64),
        mode=payload["mode"],
        seed=int(payload["seed"]),
        series_length=int(payload["series_length"]),
        threshold_range=payload["threshold_range"],
    )
    if bank.fingerprint() != payload.get("fingerprint", bank.fingerprint()):
        raise ConfigurationError(f"{path} failed its integrity check")
    return bank
