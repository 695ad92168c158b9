"""Independent reference implementations used to freeze expected test values.

Everything here deliberately avoids the package's own code paths: brute-force
enumeration for clustering, a plain double loop for selection, colorsys for
color conversion, and mpmath for high-precision threshold evaluation.
"""

from __future__ import annotations

import colorsys
import itertools
import math

import mpmath
import numpy as np


def brute_force_kmeans(X, k: int) -> float:
    """Exact minimum of the sum-of-squared-distances objective.

    Enumerates every assignment of n points to k clusters; only usable for
    tiny fixtures (k**n assignments).
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    x_sq_total = float((X**2).sum())
    best = math.inf
    assignments = np.array(list(itertools.product(range(k), repeat=n)), dtype=np.int8)
    for start in range(0, assignments.shape[0], 100_000):
        block = assignments[start : start + 100_000]
        cost = np.full(block.shape[0], x_sq_total)
        for j in range(k):
            mask = block == j
            counts = mask.sum(axis=1)
            sums = mask.astype(np.float64) @ X
            nonempty = counts > 0
            cost[nonempty] -= (sums[nonempty] ** 2).sum(axis=1) / counts[nonempty]
        best = min(best, float(cost.min()))
    return best


def naive_select(ids, X, centers, thresholds):
    """Plain double-loop nearest-center assignment and thresholding."""
    decisions = []
    for sample_id, x in zip(ids, X):
        best_j, best_d = 0, math.inf
        for j, c in enumerate(centers):
            d = math.dist(x, c)
            if d < best_d:  # strict: first (lowest) index wins ties
                best_j, best_d = j, d
        decisions.append((sample_id, best_j, best_d, best_d <= thresholds[best_j]))
    return decisions


def threshold_highprec(lb, ub, n, n_max, alpha) -> float:
    """Density-aware threshold evaluated at 50 significant digits."""
    with mpmath.workdps(50):
        lb, ub = mpmath.mpf(lb), mpmath.mpf(ub)
        frac = 1 - mpmath.mpf(n) / mpmath.mpf(n_max)
        return float(lb + (ub - lb) * frac ** mpmath.mpf(alpha))


def hsv_reference(r: int, g: int, b: int) -> tuple[float, float, float]:
    """colorsys-based HSV on the package's scales (H in [0,180), S/V in [0,255])."""
    h, s, v = colorsys.rgb_to_hsv(r / 255.0, g / 255.0, b / 255.0)
    return h * 180.0, s * 255.0, v * 255.0
