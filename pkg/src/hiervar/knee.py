"""Coefficient ranking and KNEEDLE knee detection for E-ROCKET pruning."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

L2_NORM = "l2_norm"
MAX_ABS = "max_abs"
CONCAVE = "concave"
CONVEX = "convex"
FIRST = "first"
STRONGEST = "strongest"


class NoKneeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class CoefficientRanking:
    """Feature scores sorted ascending, with ``permutation[i]`` the original
    feature index at sorted position ``i``."""

    magnitudes: np.ndarray
    permutation: np.ndarray
    aggregation: str = L2_NORM

    @property
    def n_features(self) -> int:
        return len(self.magnitudes)


@dataclass(frozen=True)
class KneeResult:
    knee_index: int | None
    sensitivity: float
    difference_curve: np.ndarray
    candidates: tuple = ()
    shape: str = CONCAVE
    select: str = FIRST

    @property
    def found(self) -> bool:
        return self.knee_index is not None


def coefficient_scores(coefficients: np.ndarray, aggregation: str = L2_NORM) -> np.ndarray:
    w = np.asarray(coefficients, dtype=np.float64)
    if w.ndim == 1:
        return np.abs(w)
    if w.shape[1] == 2:
        # centred one-hot targets make the two columns negatives of each other
        return np.abs(w[:, 0])
    if aggregation == L2_NORM:
        return np.sqrt((w**2).sum(axis=1))
    if aggregation == MAX_ABS:
        return np.abs(w).max(axis=1)
    raise ConfigurationError(f"unknown aggregation {aggregation!r}")


def rank_coefficients(model, aggregation: str = L2_NORM) -> CoefficientRanking:
    """Sort per-feature coefficient magnitudes ascending (stable on ties).

    ``model`` may be a fitted linear model or a raw coefficient array.
    """
    coef = getattr(model, "coefficients", model)
    scores = coefficient_scores(coef, aggregation)
    order = np.argsort(scores, kind="stable")
    return CoefficientRanking(magnitudes=scores[order], permutation=order, aggregation=aggregation)


def _local_extrema(diff):
    inner = np.arange(1, len(diff) - 1)
    left, mid, right = diff[:-2], diff[1:-1], diff[2:]
    maxima = inner[(mid > left) & (mid >= right)]
    minima = inner[(mid < left) & (mid <= right)]
    return maxima, minima


def _kneedle_concave(y: np.ndarray, sensitivity: float):
    """Difference curve, local maxima and every confirmed knee, in scan order."""
    n = len(y)
    x_norm = np.linspace(0.0, 1.0, n)
    y_norm = (y - y.min()) / (y.max() - y.min())
    diff = y_norm - x_norm
    maxima, minima = _local_extrema(diff)
    step = np.mean(np.diff(x_norm))
    is_max = np.zeros(n, dtype=bool)
    is_max[maxima] = True
    is_min = np.zeros(n, dtype=bool)
    is_min[minima] = True

    confirmed = []
    candidate = None
    threshold = None
    for i in range(n):
        if is_max[i]:
            candidate, threshold = i, diff[i] - sensitivity * step
            continue
        if candidate is None:
            continue
        if diff[i] < threshold:
            confirmed.append(candidate)
            candidate = None
        elif is_min[i]:
            candidate = None
    return confirmed, diff, tuple(int(m) for m in maxima)


def kneedle_detect(
    curve, sensitivity: float = 1.0, shape: str = CONCAVE, select: str = FIRST
) -> KneeResult:
    """KNEEDLE on an increasing curve sampled at evenly spaced points.

    Normalizes index and value to [0, 1], takes the difference curve
    ``y - x`` and walks its local maxima; a maximum is confirmed as a knee
    once the curve falls more than ``sensitivity / (n - 1)`` below it before
    the next local maximum or minimum.  ``select="first"`` returns the first
    confirmed knee, ``select="strongest"`` the confirmed knee with the
    largest difference value.

    ``shape="convex"`` handles convex increasing curves (a sorted magnitude
    curve with a few large values) by mirroring both axes, which turns the
    curve concave; the returned index refers to the original curve and the
    stored difference curve is ``x - y`` in original order.
    """
    y = np.asarray(curve, dtype=np.float64)
    if y.ndim != 1 or len(y) < 3:
        raise ConfigurationError("knee detection needs a curve of at least 3 points")
    if not np.all(np.isfinite(y)):
        raise ConfigurationError("curve contains non-finite values")
    if shape not in (CONCAVE, CONVEX):
        raise ConfigurationError(f"shape must be {CONCAVE!r} or {CONVEX!r}")
    if select not in (FIRST, STRONGEST):
        raise ConfigurationError(f"select must be {FIRST!r} or {STRONGEST!r}")
    if sensitivity <= 0:
        raise ConfigurationError("sensitivity must be positive")
    n = len(y)
    if y.max() == y.min():
        return KneeResult(None, sensitivity, np.zeros(n), (), shape, select)

    work = y if shape == CONCAVE else (y.max() - y)[::-1]
    confirmed, diff, cands = _kneedle_concave(work, sensitivity)
    knee = None
    if confirmed:
        knee = confirmed[0] if select == FIRST else max(confirmed, key=lambda i: (diff[i], -i))
    if shape == CONCAVE:
        return KneeResult(knee, sensitivity, diff, cands, shape, select)

    def flip(i):
        return n - 1 - i

    return KneeResult(
        None if knee is None else flip(knee),
        sensitivity,
        diff[::-1].copy(),
        tuple(sorted(flip(c) for c in cands)),
        shape,
        select,
    )


def select_erocket(ranking: CoefficientRanking, knee: KneeResult) -> np.ndarray:
    """Original indices of the features strictly above the knee, ascending.

    Without a knee every feature is kept and a :class:`NoKneeWarning` is issued.
    """
    if not knee.found:
        warnings.warn("no knee detected; keeping all features", NoKneeWarning, stacklevel=2)
        return np.arange(ranking.n_features)
    return np.sort(ranking.permutation[knee.knee_index + 1:])


def write_knee_csv(path, ranking: CoefficientRanking, knee: KneeResult) -> None:
    """Sorted magnitude curve with its difference curve and knee/candidate marks."""
    cands = set(knee.candidates)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["position", "feature_index", "magnitude", "difference", "candidate", "knee"])
        for i, (f, m, d) in enumerate(zip(ranking.permutation, ranking.magnitudes,
                                          knee.difference_curve)):
            out.writerow([i, int(f), repr(float(m)), repr(float(d)), int(i in cands),
                          int(i == knee.knee_index)])
