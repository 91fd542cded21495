"""Linear classifiers on pooled features: weighted ridge with cross-validated
regularization, and one-vs-rest lasso by coordinate descent."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg
from numba import njit

from .errors import ConfigurationError, DegenerateLabelsError, ShapeError
from .representation import FeatureMatrix

LAMBDA_GRID = (0.001, 0.01, 0.1, 1.0)
DEFAULT_FOLDS = 5
LASSO_ALPHA = 1e-4
LASSO_MAX_ITER = 10_000
LASSO_TOL = 1e-5

MODEL_FORMAT = "hiervar-linear-model"
MODEL_VERSION = 1


def _matrix(features) -> np.ndarray:
    z = features.values if isinstance(features, FeatureMatrix) else features
    return np.asarray(z, dtype=np.float64)


def _labels(labels, n_classes=None):
    y = np.asarray(labels, dtype=np.int64)
    if y.ndim != 1:
        raise ShapeError("labels must be a vector")
    if y.size and y.min() < 1:
        raise ConfigurationError("labels must be coded 1..C")
    c = int(y.max()) if n_classes is None else int(n_classes)
    return y, c


def one_hot(labels, n_classes: int) -> np.ndarray:
    y = np.asarray(labels, dtype=np.int64)
    out = np.zeros((y.size, n_classes))
    out[np.arange(y.size), y - 1] = 1.0
    return out


def class_weights(labels, n_classes: int) -> np.ndarray:
    """Inverse-frequency weights ``N / (C * N_c)``; absent classes get 0."""
    y = np.asarray(labels, dtype=np.int64)
    counts = np.bincount(y, minlength=n_classes + 1)[1:].astype(np.float64)
    present = counts > 0
    weights = np.zeros(n_classes)
    weights[present] = y.size / (present.sum() * counts[present])
    return weights


@dataclass(frozen=True)
class RidgeModel:
    coefficients: np.ndarray  # K x C
    lam: float
    feature_means: np.ndarray
    class_weights: np.ndarray
    classes: int
    solver: str = "primal"
    pseudo_inverse: bool = False

    @property
    def n_features(self) -> int:
        return self.coefficients.shape[0]


@dataclass(frozen=True)
class LassoModel:
    coefficients: np.ndarray  # K x C
    alpha: float
    feature_means: np.ndarray
    max_iterations: int
    tolerance: float
    converged: bool
    iterations: tuple = ()

    @property
    def n_features(self) -> int:
        return self.coefficients.shape[0]

    def support(self) -> np.ndarray:
        """Indices of features with a nonzero coefficient for any class."""
        return np.flatnonzero(np.any(self.coefficients != 0.0, axis=1))


def _weighted_system(z, y, n_classes, class_weighting):
    if class_weighting:
        sample_w = class_weights(y, n_classes)[y - 1]
    else:
        sample_w = np.ones(y.size)
    # weighted centering makes Zc^T D 1 = 0, so the one-hot offset drops out
    means = sample_w @ z / sample_w.sum()
    root = np.sqrt(sample_w)[:, None]
    a = root * (z - means)
    b = root * one_hot(y, n_classes)
    return a, b, means, sample_w


def _check_fit_inputs(z, y, n_classes):
    if z.ndim != 2 or z.shape[0] != y.size:
        raise ShapeError(f"feature matrix {z.shape} does not match {y.size} labels")
    if z.shape[1] == 0:
        raise ShapeError("feature matrix has no columns")
    if y.size < 2:
        raise DegenerateLabelsError("need at least two samples")
    if np.unique(y).size < 2:
        raise DegenerateLabelsError("need at least two distinct classes")
    if y.max() > n_classes:
        raise ConfigurationError("label exceeds the number of classes")


def fit_ridge(
    features,
    labels,
    lam: float = 1.0,
    class_weighting: bool = True,
    *,
    n_classes: int | None = None,
    solver: str = "auto",
) -> RidgeModel:
    """Solve ``(Zc^T D Zc + lam I) W = Zc^T D Y`` for one-hot targets Y.

    ``Zc`` is Z centered by its (sample-weighted) column means and D holds
    the per-sample weights.  ``solver="auto"`` uses the N x N dual system
    when N < K.  With ``lam == 0`` the minimum-norm least-squares solution is
    returned and ``pseudo_inverse`` is set when the system is rank deficient.
    """
    z = _matrix(features)
    y, c = _labels(labels, n_classes)
    _check_fit_inputs(z, y, c)
    if lam < 0:
        raise ConfigurationError("lambda must be nonnegative")
    n, k = z.shape
    a, b, means, _ = _weighted_system(z, y, c, class_weighting)
    if solver == "auto":
        solver = "dual" if n < k else "primal"
    if solver not in ("primal", "dual"):
        raise ConfigurationError(f"unknown solver {solver!r}")

    pinv = False
    if lam == 0:
        w, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
        pinv = rank < k
        solver = "lstsq"
    elif solver == "primal":
        gram = a.T @ a
        gram[np.diag_indices(k)] += lam
        w = scipy.linalg.solve(gram, a.T @ b, assume_a="pos")
    else:
        gram = a @ a.T
        gram[np.diag_indices(n)] += lam
        w = a.T @ scipy.linalg.solve(gram, b, assume_a="pos")

    return RidgeModel(
        coefficients=w,
        lam=float(lam),
        feature_means=means,
        class_weights=class_weights(y, c) if class_weighting else np.ones(c),
        classes=c,
        solver=solver,
        pseudo_inverse=bool(pinv),
    )


def decision_function(model, features) -> np.ndarray:
    z = _matrix(features)
    if z.ndim != 2 or z.shape[1] != model.n_features:
        raise ShapeError(f"model expects {model.n_features} features, got {z.shape[-1]}")
    return (z - model.feature_means) @ model.coefficients


def predict(model, features) -> np.ndarray:
    """Class codes 1..C by argmax score; ties go to the smaller code."""
    return np.argmax(decision_function(model, features), axis=1) + 1


def ridge_residual(model: RidgeModel, features, labels, class_weighting: bool = True):
    """Relative infinity-norm residual of the weighted normal equations."""
    z = _matrix(features)
    y, c = _labels(labels, model.classes)
    a, b, _, _ = _weighted_system(z, y, c, class_weighting)
    w = model.coefficients
    resid = a.T @ (a @ w - b) + model.lam * w
    scale = np.abs(a.T @ b).max()
    return float(np.abs(resid).max() / scale) if scale > 0 else float(np.abs(resid).max())


# -- cross-validation ---------------------------------------------------------

def stratified_folds(labels, folds: int = DEFAULT_FOLDS, seed: int = 0):
    """Shuffled stratified (train, validation) index pairs.

    The fold count drops to the smallest class size (never below 2).
    Singleton classes stay in every training split.  When no class has two
    members, falls back to leave-one-out for N <= 50, otherwise to shuffled
    unstratified folds.
    """
    y = np.asarray(labels, dtype=np.int64)
    n = y.size
    if folds < 2:
        raise ConfigurationError("need at least 2 folds")
    rng = np.random.default_rng([int(seed), 3])
    classes, counts = np.unique(y, return_counts=True)
    assignment = np.full(n, -1)

    if counts.max() < 2:
        if n <= 50:
            k = n
            assignment = np.arange(n)
        else:
            k = min(folds, n)
            assignment[rng.permutation(n)] = np.arange(n) % k
    else:
        k = max(2, min(folds, int(counts.min())))
        offset = 0
        for cls, count in zip(classes, counts):
            if count < 2:
                continue
            members = rng.permutation(np.flatnonzero(y == cls))
            assignment[members] = (offset + np.arange(count)) % k
            offset += count

    splits = []
    for f in range(k):
        val = np.flatnonzero(assignment == f)
        if val.size == 0:
            continue
        train = np.flatnonzero(assignment != f)
        splits.append((train, val))
    return splits


def _ridge_path_scores(a, b, zc_val, lams):
    """Validation scores for every lambda from one eigendecomposition."""
    n, k = a.shape
    if n < k:
        s, u = np.linalg.eigh(a @ a.T)
        left = zc_val @ a.T @ u
        right = u.T @ b
    else:
        s, u = np.linalg.eigh(a.T @ a)
        left = zc_val @ u
        right = u.T @ (a.T @ b)
    s = np.clip(s, 0.0, None)
    cutoff = s.max() * max(n, k) * np.finfo(float).eps if s.size else 0.0
    out = []
    for lam in lams:
        denom = s + lam
        inv = np.divide(1.0, denom, out=np.zeros_like(s), where=denom > cutoff)
        out.append((left * inv) @ right)
    return out


def cross_validation_scores(
    features, labels, grid=LAMBDA_GRID, folds: int = DEFAULT_FOLDS,
    class_weighting: bool = True, seed: int = 0, *, n_classes=None,
) -> np.ndarray:
    """Mean fold accuracy for each value in ``grid``."""
    z = _matrix(features)
    y, c = _labels(labels, n_classes)
    grid = [float(g) for g in grid]
    if not grid:
        raise ConfigurationError("lambda grid is empty")
    totals = np.zeros(len(grid))
    used = 0
    for train, val in stratified_folds(y, folds, seed):
        if np.unique(y[train]).size < 2:
            continue
        a, b, means, _ = _weighted_system(z[train], y[train], c, class_weighting)
        scores = _ridge_path_scores(a, b, z[val] - means, grid)
        for i, sc in enumerate(scores):
            totals[i] += np.mean(np.argmax(sc, axis=1) + 1 == y[val])
        used += 1
    if used == 0:
        raise DegenerateLabelsError("no fold has two classes in its training split")
    return totals / used


def cross_validate_lambda(
    features, labels, grid=LAMBDA_GRID, folds: int = DEFAULT_FOLDS,
    class_weighting: bool = True, seed: int = 0, *, n_classes=None,
) -> float:
    """Grid value with the best mean stratified-fold accuracy.

    Ties (within 1e-12) resolve to the largest lambda.
    """
    grid = [float(g) for g in grid]
    if len(grid) == 1:
        return grid[0]
    acc = cross_validation_scores(
        features, labels, grid, folds, class_weighting, seed, n_classes=n_classes
    )
    best = acc.max()
    return max(g for g, s in zip(grid, acc) if s >= best - 1e-12)


# -- lasso --------------------------------------------------------------------

@njit(cache=True)
def _lasso_cd(xt, y, alpha, max_iter, tol, beta):
    # xt is K x N (rows are centered feature columns); y is centered
    k, n = xt.shape
    col_sq = np.empty(k)
    for j in range(k):
        col_sq[j] = np.dot(xt[j], xt[j]) / n
    r = y - xt.T @ beta
    for it in range(max_iter):
        max_change = 0.0
        for j in range(k):
            if col_sq[j] == 0.0:
                continue
            old = beta[j]
            rho = np.dot(xt[j], r) / n + col_sq[j] * old
            if rho > alpha:
                new = (rho - alpha) / col_sq[j]
            elif rho < -alpha:
                new = (rho + alpha) / col_sq[j]
            else:
                new = 0.0
            delta = new - old
            if delta != 0.0:
                r -= delta * xt[j]
                beta[j] = new
                if abs(delta) > max_change:
                    max_change = abs(delta)
        if max_change < tol:
            worst = 0.0
            for j in range(k):
                if col_sq[j] == 0.0:
                    continue
                g = np.dot(xt[j], r) / n
                if beta[j] == 0.0:
                    v = abs(g) - alpha
                elif beta[j] > 0.0:
                    v = abs(g - alpha)
                else:
                    v = abs(g + alpha)
                if v > worst:
                    worst = v
            if worst <= tol:
                return it + 1, True
    return max_iter, False


def lasso_alpha_max(features, labels, n_classes=None) -> float:
    """Smallest alpha at which every one-vs-rest lasso is identically zero."""
    z = _matrix(features)
    y, c = _labels(labels, n_classes)
    zc = z - z.mean(axis=0)
    yc = one_hot(y, c)
    yc -= yc.mean(axis=0)
    return float(np.abs(zc.T @ yc).max() / z.shape[0])


def fit_lasso(
    features,
    labels,
    alpha: float = LASSO_ALPHA,
    max_iterations: int = LASSO_MAX_ITER,
    tolerance: float = LASSO_TOL,
    *,
    n_classes: int | None = None,
) -> LassoModel:
    """One-vs-rest lasso, ``min (1/2N)||yc - Zc b||^2 + alpha ||b||_1`` per class.

    Cyclic coordinate descent with soft thresholding.  A run stops once a
    sweep moves no coefficient by ``tolerance`` or more and every KKT
    condition holds to ``tolerance``; otherwise after ``max_iterations``
    sweeps with ``converged=False``.
    """
    if not alpha > 0:
        raise ConfigurationError("alpha must be positive")
    z = _matrix(features)
    y, c = _labels(labels, n_classes)
    _check_fit_inputs(z, y, c)
    means = z.mean(axis=0)
    xt = np.ascontiguousarray((z - means).T)
    targets = one_hot(y, c)
    targets -= targets.mean(axis=0)

    coef = np.zeros((z.shape[1], c))
    converged = True
    iterations = []
    for cls in range(c):
        beta = np.zeros(z.shape[1])
        it, ok = _lasso_cd(xt, np.ascontiguousarray(targets[:, cls]), float(alpha),
                           int(max_iterations), float(tolerance), beta)
        coef[:, cls] = beta
        converged &= ok
        iterations.append(int(it))
    return LassoModel(
        coefficients=coef,
        alpha=float(alpha),
        feature_means=means,
        max_iterations=int(max_iterations),
        tolerance=float(tolerance),
        converged=bool(converged),
        iterations=tuple(iterations),
    )


def lasso_kkt_violation(model: LassoModel, features, labels) -> float:
    """Largest deviation from the lasso optimality conditions over all classes."""
    z = _matrix(features)
    y, c = _labels(labels, model.coefficients.shape[1])
    zc = z - z.mean(axis=0)
    yc = one_hot(y, c)
    yc -= yc.mean(axis=0)
    grad = zc.T @ (yc - zc @ model.coefficients) / z.shape[0]
    beta = model.coefficients
    active = beta != 0
    zero_var = ~np.any(zc != 0, axis=0)
    viol = np.where(active, np.abs(grad - model.alpha * np.sign(beta)),
                    np.maximum(np.abs(grad) - model.alpha, 0.0))
    viol[zero_var] = 0.0
    return float(viol.max())


# -- persistence --------------------------------------------------------------

def save_model(model, path) -> None:
    if isinstance(model, RidgeModel):
        payload = {"kind": "ridge", "lambda": model.lam, "classes": model.classes,
                   "class_weights": model.class_weights.tolist(), "solver": model.solver,
                   "pseudo_inverse": model.pseudo_inverse}
    else:
        payload = {"kind": "lasso", "alpha": model.alpha, "max_iterations": model.max_iterations,
                   "tolerance": model.tolerance, "converged": model.converged,
                   "iterations": list(model.iterations)}
    payload.update(format=MODEL_FORMAT, version=MODEL_VERSION,
                   coefficients=model.coefficients.tolist(),
                   feature_means=model.feature_means.tolist())
    Path(path).write_text(json.dumps(payload))


def load_model(path):
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != MODEL_FORMAT or payload.get("version") != MODEL_VERSION:
        raise ConfigurationError(f"{path} is not a supported model file")
    coef = np.array(payload["coefficients"], dtype=np.float64)
    means = np.array(payload["feature_means"], dtype=np.float64)
    if payload["kind"] == "ridge":
        return RidgeModel(coefficients=coef, lam=payload["lambda"], feature_means=means,
                          class_weights=np.array(payload["class_weights"]),
                          classes=payload["classes"], solver=payload["solver"],
                          pseudo_inverse=payload["pseudo_inverse"])
    return LassoModel(coefficients=coef, alpha=payload["alpha"], feature_means=means,
                      max_iterations=payload["max_iterations"], tolerance=payload["tolerance"],
                      converged=payload["converged"], iterations=tuple(payload["iterations"]))
