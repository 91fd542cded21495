"""One-way ANOVA F-scores per feature and the hierarchical (HIERVAR) filter.

Groups are the class labels.  The pass threshold is the mean finite F-score
over all features divided by a divider ``d``; a feature survives when it
was kept by the first-stage selector and its F-score is strictly above the
threshold.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateLabelsError, ShapeError
from .representation import FeatureMatrix

DEFAULT_DIVIDER = 2.0


@dataclass(frozen=True)
class FScoreVector:
    f_scores: np.ndarray
    mean_f: float
    divider: float
    threshold: float
    group_counts: np.ndarray
    ssb: np.ndarray
    ssw: np.ndarray
    sst: np.ndarray

    @property
    def n_features(self) -> int:
        return len(self.f_scores)

    def passing(self) -> np.ndarray:
        return np.flatnonzero(self.f_scores > self.threshold)

    def with_divider(self, divider: float) -> "FScoreVector":
        """Same scores under a different divider (no recomputation)."""
        if not divider > 0:
            raise ConfigurationError("divider must be positive")
        return FScoreVector(self.f_scores, self.mean_f, float(divider), self.mean_f / divider,
                            self.group_counts, self.ssb, self.ssw, self.sst)


@dataclass(frozen=True)
class HiervarSelection:
    erocket_set: np.ndarray
    fscore_pass: np.ndarray
    final_set: np.ndarray
    n_features: int

    @property
    def reduction_ratio(self) -> float:
        return 1.0 - len(self.final_set) / self.n_features


def mean_finite(f_scores: np.ndarray) -> float:
    finite = f_scores[np.isfinite(f_scores)]
    return float(finite.mean()) if finite.size else 0.0


def f_scores(features, labels, d: float = DEFAULT_DIVIDER) -> FScoreVector:
    """F_j = (SSB_j / (C - 1)) / (SSW_j / (N - C)) for every column j.

    A feature constant inside every class but not overall scores +inf; a
    globally constant feature scores 0.  Infinite scores are left out of the
    mean that sets the threshold ``mean / d``.
    """
    z = features.values if isinstance(features, FeatureMatrix) else np.asarray(features, float)
    y = np.asarray(labels)
    if z.ndim != 2 or z.shape[0] != y.size:
        raise ShapeError(f"feature matrix {z.shape} does not match {y.size} labels")
    if not d > 0:
        raise ConfigurationError("divider d must be positive")
    classes, codes, counts = np.unique(y, return_inverse=True, return_counts=True)
    codes = codes.ravel()
    n, c = y.size, classes.size
    if c < 2:
        raise DegenerateLabelsError("ANOVA needs at least two classes")
    if n <= c:
        raise DegenerateLabelsError(f"need more samples than classes (N={n}, C={c})")

    onehot = np.zeros((n, c))
    onehot[np.arange(n), codes] = 1.0
    grand = z.mean(axis=0)
    group_means = (onehot.T @ z) / counts[:, None]
    ssb = counts @ (group_means - grand) ** 2
    ssw = ((z - group_means[codes]) ** 2).sum(axis=0)
    sst = ((z - grand) ** 2).sum(axis=0)

    # exact degeneracy tests, immune to rounding in the means
    constant = z.min(axis=0) == z.max(axis=0)
    order = np.argsort(codes, kind="stable")
    starts = np.r_[0, np.cumsum(counts)[:-1]]
    zs = z[order]
    within_constant = np.all(
        np.minimum.reduceat(zs, starts, axis=0) == np.maximum.reduceat(zs, starts, axis=0), axis=0
    )

    with np.errstate(divide="ignore", invalid="ignore"):
        f = (ssb / (c - 1)) / (ssw / (n - c))
    f = np.where(within_constant, np.inf, f)
    f = np.where(constant, 0.0, f)
    f = np.maximum(f, 0.0)

    mu = mean_finite(f)
    return FScoreVector(
        f_scores=f, mean_f=mu, divider=float(d), threshold=mu / d,
        group_counts=counts, ssb=np.where(constant, 0.0, ssb),
        ssw=np.where(within_constant, 0.0, ssw), sst=sst,
    )


def select_hiervar(fscores: FScoreVector, erocket_set) -> HiervarSelection:
    """Keep the first-stage features whose F-score is strictly above threshold."""
    s = np.unique(np.asarray(erocket_set, dtype=np.int64))
    k = fscores.n_features
    if s.size and (s[0] < 0 or s[-1] >= k):
        raise ConfigurationError(f"selection index out of range for {k} features")
    passing = fscores.passing()
    final = s[fscores.f_scores[s] > fscores.threshold]
    return HiervarSelection(erocket_set=s, fscore_pass=passing, final_set=final, n_features=k)


def apply_selection(features, selection) -> FeatureMatrix:
    """Column subset in ascending index order; an empty selection gives N x 0."""
    fm = features if isinstance(features, FeatureMatrix) else FeatureMatrix(np.asarray(features))
    idx = np.unique(np.asarray(selection, dtype=np.int64))
    if idx.size and (idx[0] < 0 or idx[-1] >= fm.feature_count):
        raise ConfigurationError("selection index out of range")
    return FeatureMatrix(values=fm.values[:, idx], provenance=fm.provenance)


def d_sweep(fscores: FScoreVector, erocket_set, dividers) -> list[tuple[float, int]]:
    """(d, surviving feature count) for each divider."""
    return [(float(d), len(select_hiervar(fscores.with_divider(d), erocket_set).final_set))
            for d in dividers]


def write_fscore_csv(path_or_file, fscores: FScoreVector, erocket_set=()) -> None:
    """Scores sorted descending, marking first-stage membership and threshold pass."""
    members = np.zeros(fscores.n_features, dtype=bool)
    members[np.asarray(erocket_set, dtype=np.int64)] = True
    order = np.lexsort((np.arange(fscores.n_features), -fscores.f_scores))
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["rank", "feature_index", "f_score", "erocket_selected", "above_threshold"])
        for rank, j in enumerate(order, start=1):
            f = fscores.f_scores[j]
            out.writerow([rank, int(j), "inf" if np.isinf(f) else repr(float(f)),
                          int(members[j]), int(f > fscores.threshold)])
    finally:
        if own:
            fh.close()
