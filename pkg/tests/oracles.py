"""Slow, literal reference implementations used as test oracles."""

import math

import numpy as np


def anova_loop(z, labels):
    """One-way ANOVA F per column by explicit summation over classes and samples."""
    n, k = len(z), len(z[0])
    classes = sorted(set(int(v) for v in labels))
    c = len(classes)
    out = []
    for j in range(k):
        grand = sum(z[i][j] for i in range(n)) / n
        ssb = 0.0
        ssw = 0.0
        for cls in classes:
            members = [z[i][j] for i in range(n) if labels[i] == cls]
            mean_c = sum(members) / len(members)
            ssb += len(members) * (mean_c - grand) ** 2
            for v in members:
                ssw += (v - mean_c) ** 2
        if ssw == 0.0:
            out.append(0.0 if ssb == 0.0 else math.inf)
        else:
            out.append((ssb / (c - 1)) / (ssw / (n - c)))
    return np.array(out)


def curvature_knee(y):
    """Index of maximum discrete curvature of the curve in unit-square coordinates."""
    y = np.asarray(y, dtype=float)
    n = len(y)
    yn = (y - y.min()) / (y.max() - y.min())
    h = 1.0 / (n - 1)
    d1 = (yn[2:] - yn[:-2]) / (2 * h)
    d2 = (yn[2:] - 2 * yn[1:-1] + yn[:-2]) / h**2
    kappa = np.abs(d2) / (1 + d1**2) ** 1.5
    return int(np.argmax(kappa)) + 1
