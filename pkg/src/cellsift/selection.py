"""Density-aware thresholding and candidate selection.

Each cluster gets an acceptance radius interpolating between its minimum and
maximum member-to-center distance::

    threshold_i = LB_i + (UB_i - LB_i) * (1 - n_i / n_max) ** alpha

so small (rare) clusters admit candidates over most of their observed radius
while the largest cluster accepts only within its minimum distance. A
candidate is assigned to its single nearest prototype and accepted iff its
distance is <= the cluster threshold (inclusive).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from .features import FeatureSet
from .prototypes import PrototypeModel, assign_nearest_batch, fit_prototypes


@dataclass
class ThresholdTable:
    thresholds: np.ndarray  # (k,) float64
    alpha: float
    lower_bounds: np.ndarray
    upper_bounds: np.ndarray
    sizes: np.ndarray
    n_max: int
    min_radius: float = 0.0

    @property
    def k(self) -> int:
        return self.thresholds.shape[0]


@dataclass
class SelectionRow:
    id: str
    cluster: int
    distance: float
    threshold: float
    accepted: bool


@dataclass
class SelectionManifest:
    rows: list[SelectionRow]
    per_cluster_accepted: np.ndarray
    per_cluster_rejected: np.ndarray
    config: dict = field(default_factory=dict)

    @property
    def accepted_ids(self) -> list[str]:
        return [r.id for r in self.rows if r.accepted]

    @property
    def n_accepted(self) -> int:
        return int(self.per_cluster_accepted.sum())


def compute_thresholds(
    model: PrototypeModel,
    alpha: float = 0.5,
    min_radius: float = 0.0,
) -> ThresholdTable:
    """Per-cluster acceptance radii from the model's distance bounds.

    ``min_radius`` optionally floors UB so degenerate (singleton) clusters
    can accept more than exact-center matches; the default 0 keeps the
    formula literal.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    lb = model.lower_bounds.astype(np.float64)
    ub = np.maximum(model.upper_bounds.astype(np.float64), min_radius)
    n = model.sizes.astype(np.float64)
    n_max = float(model.n_max)
    thresholds = lb + (ub - lb) * (1.0 - n / n_max) ** alpha
    return ThresholdTable(thresholds=thresholds, alpha=alpha,
                          lower_bounds=lb, upper_bounds=ub,
                          sizes=model.sizes.copy(), n_max=model.n_max,
                          min_radius=min_radius)


def make_fixed_table(model: PrototypeModel, value: float | np.ndarray | None = None) -> ThresholdTable:
    """Non-adaptive baseline: a constant radius for every cluster.

    With ``value=None`` each cluster is fixed at its own LB (the strictest
    policy the adaptive table can produce).
    """
    lb = model.lower_bounds.astype(np.float64)
    ub = model.upper_bounds.astype(np.float64)
    if value is None:
        thresholds = lb.copy()
    else:
        thresholds = np.broadcast_to(np.asarray(value, dtype=np.float64), lb.shape).copy()
    return ThresholdTable(thresholds=thresholds, alpha=float("nan"),
                          lower_bounds=lb, upper_bounds=ub,
                          sizes=model.sizes.copy(), n_max=model.n_max)


def select_samples(
    candidates: FeatureSet,
    model: PrototypeModel,
    table: ThresholdTable,
    config: dict | None = None,
) -> SelectionManifest:
    """Assign each candidate to its nearest prototype and apply the thresholds.

    Rows preserve candidate input order; acceptance is distance <= threshold.
    """
    if table.k != model.k:
        raise ValueError(f"threshold table has {table.k} clusters, model has {model.k}")
    if candidates.dim != model.dim:
        raise ValueError(
            f"dimension mismatch: candidates have {candidates.dim}, model has {model.dim}")

    accepted = np.zeros(model.k, dtype=np.int64)
    rejected = np.zeros(model.k, dtype=np.int64)
    rows: list[SelectionRow] = []
    if len(candidates):
        idx, dist = assign_nearest_batch(candidates.matrix(), model)
        for vec, j, d in zip(candidates.vectors, idx, dist):
            thr = float(table.thresholds[j])
            ok = bool(d <= thr)
            rows.append(SelectionRow(id=vec.id, cluster=int(j), distance=float(d),
                                     threshold=thr, accepted=ok))
            if ok:
                accepted[j] += 1
            else:
                rejected[j] += 1
    return SelectionManifest(rows=rows, per_cluster_accepted=accepted,
                             per_cluster_rejected=rejected, config=dict(config or {}))


def write_manifest(manifest: SelectionManifest, path: str | Path) -> None:
    """Line-delimited manifest: config echo, one row per candidate, summary."""
    lines = ["# cellsift selection manifest v1"]
    for key in sorted(manifest.config):
        lines.append(f"# config {key}={manifest.config[key]}")
    lines.append("id,cluster,distance,threshold,accepted")
    for r in manifest.rows:
        lines.append(f"{r.id},{r.cluster},{r.distance!r},{r.threshold!r},{int(r.accepted)}")
    lines.append("# summary columns: cluster accepted rejected")
    for j in range(len(manifest.per_cluster_accepted)):
        lines.append(f"# summary {j},{manifest.per_cluster_accepted[j]},{manifest.per_cluster_rejected[j]}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path: str | Path) -> SelectionManifest:
    """Parse a manifest file back (config values come back as strings)."""
    rows: list[SelectionRow] = []
    config: dict = {}
    summary: dict[int, tuple[int, int]] = {}
    k_max = -1
    for line in Path(path).read_text().splitlines():
        if line.startswith("# config "):
            key, _, value = line[len("# config "):].partition("=")
            config[key] = value
        elif line.startswith("# summary ") and "," in line:
            parts = line[len("# summary "):].split(",")
            j, acc, rej = int(parts[0]), int(parts[1]), int(parts[2])
            summary[j] = (acc, rej)
            k_max = max(k_max, j)
        elif line.startswith("#") or line.startswith("id,"):
            continue
        elif line.strip():
            sid, cluster, dist, thr, acc = line.rsplit(",", 4)
            rows.append(SelectionRow(id=sid, cluster=int(cluster), distance=float(dist),
                                     threshold=float(thr), accepted=bool(int(acc))))
    accepted = np.zeros(k_max + 1, dtype=np.int64)
    rejected = np.zeros(k_max + 1, dtype=np.int64)
    for j, (acc, rej) in summary.items():
        accepted[j], rejected[j] = acc, rej
    return SelectionManifest(rows=rows, per_cluster_accepted=accepted,
                             per_cluster_rejected=rejected, config=config)


def write_accepted_ids(manifest: SelectionManifest, path: str | Path) -> None:
    """Plain id list of accepted samples, one per line."""
    Path(path).write_text("".join(f"{i}\n" for i in manifest.accepted_ids))


class AdaptiveSelector(BaseEstimator):
    """Estimator facade: fit prototypes on labeled features, select candidates.

    predict(X) returns a boolean accept mask; decision_function(X) returns
    threshold minus distance (non-negative means accepted).
    """

    def __init__(self, n_clusters=11, alpha=0.5, min_radius=0.0, seed=0,
                 max_iter=300, tol=1e-6):
        self.n_clusters = n_clusters
        self.alpha = alpha
        self.min_radius = min_radius
        self.seed = seed
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y=None):
        from .validation import check_feature_matrix
        from .features import FeatureVector

        X = check_feature_matrix(X)
        fset = FeatureSet(
            dim=X.shape[1],
            vectors=[FeatureVector(id=str(i), values=row) for i, row in enumerate(X)],
        )
        self.model_ = fit_prototypes(fset, k=self.n_clusters, seed=self.seed,
                                     max_iters=self.max_iter, tol=self.tol)
        self.threshold_table_ = compute_thresholds(self.model_, alpha=self.alpha,
                                                   min_radius=self.min_radius)
        return self

    def decision_function(self, X):
        idx, dist = assign_nearest_batch(np.asarray(X, dtype=np.float64), self.model_)
        return self.threshold_table_.thresholds[idx] - dist

    def predict(self, X):
        return self.decision_function(X) >= 0.0
