"""Shared Lloyd k-means engine with seeded k-means++ initialization.

Used for both pixel-color quantization and feature-space prototype fitting.
Assignment breaks ties toward the lowest cluster index, empty clusters are
re-seeded with the point farthest from its current center, and the squared
distance objective is asserted non-increasing at every iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class KMeansResult:
    centers: np.ndarray  # (k, dim) float64
    labels: np.ndarray  # (n,) int64
    objective: float  # sum of squared distances to assigned centers
    n_iter: int
    objective_trace: list[float] = field(default_factory=list)


def squared_distances(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Fast pairwise squared distances via the inner-product expansion.

    Subject to ~1e-16 cancellation noise; fine for the comparisons inside
    Lloyd iterations but not for reported distances (see
    :func:`exact_squared_distances`).
    """
    x_sq = np.einsum("ij,ij->i", X, X)[:, None]
    c_sq = np.einsum("ij,ij->i", centers, centers)[None, :]
    d2 = x_sq + c_sq - 2.0 * (X @ centers.T)
    return np.maximum(d2, 0.0)


def exact_squared_distances(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Pairwise squared distances by direct differencing: a point equal to a
    center gets exactly zero. Chunked to bound the broadcast temporaries."""
    X = np.asarray(X, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.float64)
    n, d = X.shape
    k = centers.shape[0]
    out = np.empty((n, k), dtype=np.float64)
    chunk = max(1, 4_000_000 // max(1, k * d))
    for start in range(0, n, chunk):
        diff = X[start : start + chunk, None, :] - centers[None, :, :]
        out[start : start + chunk] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def kmeans_plus_plus(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Seeded k-means++ center selection."""
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]), dtype=np.float64)
    centers[0] = X[rng.integers(n)]
    if k == 1:
        return centers
    closest = squared_distances(X, centers[:1]).ravel()
    for j in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))  # all remaining mass at existing centers
        else:
            idx = int(rng.choice(n, p=closest / total))
        centers[j] = X[idx]
        np.minimum(closest, squared_distances(X, centers[j : j + 1]).ravel(), out=closest)
    return centers


def _reseed_empty(centers, labels, X, d_assigned, empty):
    """Move each empty center onto the point currently farthest from its center."""
    claimed = d_assigned.copy()
    for j in empty:
        far = int(np.argmax(claimed))
        centers[j] = X[far]
        claimed[far] = -1.0
    return centers


def kmeans_fit(
    X: np.ndarray,
    k: int,
    seed: int = 0,
    max_iters: int = 100,
    tol: float = 1e-4,
) -> KMeansResult:
    """Run Lloyd iterations until center movement drops below ``tol``.

    Deterministic for a given (X, k, seed). Raises ValueError for k < 1 or
    k greater than the number of samples.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > n:
        raise ValueError(f"k={k} exceeds sample count {n}")

    rng = np.random.default_rng(seed)
    centers = kmeans_plus_plus(X, k, rng)
    trace: list[float] = []
    prev_obj = np.inf
    n_iter = 0

    for n_iter in range(1, max_iters + 1):
        d2 = squared_distances(X, centers)
        labels = np.argmin(d2, axis=1)  # argmin takes the lowest index on ties
        d_assigned = d2[np.arange(n), labels]
        obj = float(d_assigned.sum())
        assert obj <= prev_obj * (1.0 + 1e-12) + 1e-12, (
            f"objective increased: {prev_obj} -> {obj}"
        )
        trace.append(obj)
        prev_obj = obj

        new_centers = centers.copy()
        counts = np.bincount(labels, minlength=k)
        for j in range(k):
            if counts[j] > 0:
                new_centers[j] = X[labels == j].mean(axis=0)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            new_centers = _reseed_empty(new_centers, labels, X, d_assigned, empty)

        shift = float(np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max())
        centers = new_centers
        if shift < tol:
            break

    # final assignment consistent with the returned centers, exact arithmetic
    d2 = exact_squared_distances(X, centers)
    labels = np.argmin(d2, axis=1)
    objective = float(d2[np.arange(n), labels].sum())
    return KMeansResult(centers=centers, labels=labels.astype(np.int64),
                        objective=objective, n_iter=n_iter, objective_trace=trace)
