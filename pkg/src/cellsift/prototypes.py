"""Prototype clustering over labeled feature vectors.

K-means (default k=11) produces one center per prototype plus the per-cluster
distance bounds the selector needs: LB/UB are the minimum and maximum
member-to-own-center Euclidean distances, and n_max is the largest cluster
size. A fitted model serializes to a versioned binary file ("APM1") that
reloads bit-exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from .features import FeatureSet, FeatureVector
from .kmeans import exact_squared_distances, kmeans_fit
from .validation import check_feature_matrix

MODEL_MAGIC = b"APM1"


@dataclass
class PrototypeModel:
    centers: np.ndarray  # (k, dim) float64
    sizes: np.ndarray  # (k,) int64
    lower_bounds: np.ndarray  # (k,) min member-to-center distance
    upper_bounds: np.ndarray  # (k,) max member-to-center distance
    objective: float
    seed: int
    members: list[list[str]] | None = None  # per-cluster sample ids; not serialized
    label_purity: np.ndarray | None = None  # diagnostic only
    objective_trace: list[float] = field(default_factory=list)

    def __post_init__(self):
        k = self.centers.shape[0]
        if self.sizes.shape[0] != k or self.lower_bounds.shape[0] != k or self.upper_bounds.shape[0] != k:
            raise ValueError("per-cluster arrays must all have length k")
        if self.sizes.min() < 1:
            raise ValueError("every cluster must have at least one member")
        if np.any(self.lower_bounds > self.upper_bounds + 1e-12):
            raise ValueError("lower bound exceeds upper bound")
        if self.members is not None:
            counts = [len(m) for m in self.members]
            if counts != self.sizes.tolist():
                raise ValueError("member lists inconsistent with sizes")

    @property
    def k(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    @property
    def n_max(self) -> int:
        return int(self.sizes.max())


def fit_prototypes(
    labeled: FeatureSet,
    k: int = 11,
    seed: int = 0,
    max_iters: int = 300,
    tol: float = 1e-6,
) -> PrototypeModel:
    """Cluster a feature set and compute per-cluster distance bounds.

    Labels, when present, are used only for the purity diagnostic; the
    clustering itself is unsupervised.
    """
    if len(labeled) == 0:
        raise ValueError("cannot fit prototypes on an empty feature set")
    if k > len(labeled):
        raise ValueError(f"k={k} exceeds labeled sample count {len(labeled)}")
    X = labeled.matrix()
    result = kmeans_fit(X, k, seed=seed, max_iters=max_iters, tol=tol)

    dists = np.sqrt(exact_squared_distances(X, result.centers))
    assigned = dists[np.arange(len(X)), result.labels]

    sizes = np.bincount(result.labels, minlength=k).astype(np.int64)
    lb = np.zeros(k)
    ub = np.zeros(k)
    members: list[list[str]] = [[] for _ in range(k)]
    ids = labeled.ids
    for j in range(k):
        mask = result.labels == j
        lb[j] = assigned[mask].min()
        ub[j] = assigned[mask].max()
        members[j] = [ids[i] for i in np.flatnonzero(mask)]

    purity = None
    labels = [v.label for v in labeled.vectors]
    if all(l is not None for l in labels) and labels:
        y = np.asarray(labels)
        purity = np.array([
            np.bincount(y[result.labels == j]).max() / sizes[j] for j in range(k)
        ])

    return PrototypeModel(
        centers=result.centers, sizes=sizes, lower_bounds=lb, upper_bounds=ub,
        objective=result.objective, seed=seed, members=members,
        label_purity=purity, objective_trace=result.objective_trace,
    )


def assign_nearest(x: np.ndarray, model: PrototypeModel) -> tuple[int, float]:
    """Index of the nearest prototype and the Euclidean distance to it.

    Ties break toward the lowest cluster index.
    """
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if x.shape[1] != model.dim:
        raise ValueError(f"dimension mismatch: vector has {x.shape[1]}, model has {model.dim}")
    d2 = exact_squared_distances(x, model.centers).ravel()
    idx = int(np.argmin(d2))
    return idx, float(np.sqrt(d2[idx]))


def assign_nearest_batch(X: np.ndarray, model: PrototypeModel) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized nearest-prototype assignment for an (n, dim) matrix."""
    X = check_feature_matrix(X, dim=model.dim)
    d2 = exact_squared_distances(X, model.centers)
    idx = np.argmin(d2, axis=1)
    return idx.astype(np.int64), np.sqrt(d2[np.arange(len(X)), idx])


def save_model(model: PrototypeModel, path: str | Path) -> None:
    """Write the model fields to a binary file; reload is bit-exact."""
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<IIqd", model.k, model.dim, model.seed, model.objective))
        fh.write(model.sizes.astype("<i8").tobytes())
        fh.write(model.centers.astype("<f8").tobytes())
        fh.write(model.lower_bounds.astype("<f8").tobytes())
        fh.write(model.upper_bounds.astype("<f8").tobytes())


def load_model(path: str | Path) -> PrototypeModel:
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != MODEL_MAGIC:
        raise ValueError(f"{path}: not a prototype model file")
    if len(data) < 28:
        raise ValueError(f"{path}: truncated model header")
    k, dim, seed, objective = struct.unpack_from("<IIqd", data, 4)
    off = 28
    expected = off + k * 8 + k * dim * 8 + 2 * k * 8
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, got {len(data)}")
    sizes = np.frombuffer(data, dtype="<i8", count=k, offset=off).copy()
    off += k * 8
    centers = np.frombuffer(data, dtype="<f8", count=k * dim, offset=off).reshape(k, dim).copy()
    off += k * dim * 8
    lb = np.frombuffer(data, dtype="<f8", count=k, offset=off).copy()
    off += k * 8
    ub = np.frombuffer(data, dtype="<f8", count=k, offset=off).copy()
    return PrototypeModel(centers=centers, sizes=sizes, lower_bounds=lb,
                          upper_bounds=ub, objective=objective, seed=seed)


class PrototypeKMeans(BaseEstimator, ClusterMixin):
    """Estimator facade over the prototype clustering for pipeline use.

    fit(X) computes cluster_centers_, labels_, sizes_ and the per-cluster
    distance bounds; predict(X) assigns nearest centers; transform(X)
    returns the distance matrix.
    """

    def __init__(self, n_clusters=11, seed=0, max_iter=300, tol=1e-6):
        self.n_clusters = n_clusters
        self.seed = seed
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y=None):
        X = check_feature_matrix(X)
        fset = FeatureSet(
            dim=X.shape[1],
            vectors=[FeatureVector(id=str(i), values=row) for i, row in enumerate(X)],
        )
        self.model_ = fit_prototypes(fset, k=self.n_clusters, seed=self.seed,
                                     max_iters=self.max_iter, tol=self.tol)
        self.cluster_centers_ = self.model_.centers
        self.labels_, _ = assign_nearest_batch(X, self.model_)
        self.sizes_ = self.model_.sizes
        self.inertia_ = self.model_.objective
        return self

    def predict(self, X):
        idx, _ = assign_nearest_batch(np.asarray(X, dtype=np.float64), self.model_)
        return idx

    def transform(self, X):
        X = check_feature_matrix(X, dim=self.model_.dim)
        return np.sqrt(exact_squared_distances(X, self.model_.centers))
