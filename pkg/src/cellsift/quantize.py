"""Two-stage color quantization: per-image k-means followed by cluster merging.

Stage one partitions pixel colors into ``k1`` clusters (default 20); stage
two agglomeratively merges the closest center pairs down to ``k2`` (default
10). Each pixel is then repainted with its cluster-center color, producing
the denoised image used by region detection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kmeans import exact_squared_distances, kmeans_fit, squared_distances
from .validation import check_raster


@dataclass
class PixelClusterModel:
    """Cluster centers in RGB space plus per-pixel assignments.

    ``assignments`` is flat row-major over the source image; ``shape`` keeps
    (height, width) so the image can be reconstructed.
    """

    centers: np.ndarray  # (k, 3) float64
    assignments: np.ndarray  # (n_pixels,) int64
    cluster_sizes: np.ndarray  # (k,) int64
    shape: tuple[int, int]
    objective: float = 0.0
    objective_trace: list[float] | None = None

    def __post_init__(self):
        if not np.isfinite(self.centers).all():
            raise ValueError("cluster centers contain NaN or infinite values")
        k = self.centers.shape[0]
        if self.assignments.size and self.assignments.max() >= k:
            raise ValueError("assignment index out of range")
        if int(self.cluster_sizes.sum()) != self.assignments.size:
            raise ValueError("cluster sizes do not sum to pixel count")

    @property
    def k(self) -> int:
        return self.centers.shape[0]


def kmeans_pixels(
    img: np.ndarray,
    k: int,
    seed: int = 0,
    max_iters: int = 100,
    subsample_stride: int | None = None,
) -> PixelClusterModel:
    """Cluster pixel colors with Lloyd k-means (squared RGB distance).

    With ``subsample_stride`` set, centers are fitted on a strided pixel
    subsample and all pixels are assigned afterwards; intended for large
    slides, off by default.
    """
    img = check_raster(img)
    pixels = img.reshape(-1, 3).astype(np.float64)
    n = pixels.shape[0]
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > n:
        raise ValueError(f"k={k} exceeds pixel count {n}")

    if subsample_stride and subsample_stride > 1 and n > subsample_stride * k:
        fit = kmeans_fit(pixels[::subsample_stride], k, seed=seed, max_iters=max_iters, tol=1e-4)
        d2 = exact_squared_distances(pixels, fit.centers)
        labels = np.argmin(d2, axis=1).astype(np.int64)
        objective = float(d2[np.arange(n), labels].sum())
        trace = fit.objective_trace
        centers = fit.centers
    else:
        fit = kmeans_fit(pixels, k, seed=seed, max_iters=max_iters, tol=1e-4)
        labels, objective, trace, centers = fit.labels, fit.objective, fit.objective_trace, fit.centers

    sizes = np.bincount(labels, minlength=k).astype(np.int64)
    return PixelClusterModel(centers=centers, assignments=labels, cluster_sizes=sizes,
                             shape=(img.shape[0], img.shape[1]),
                             objective=objective, objective_trace=trace)


def merge_clusters(model: PixelClusterModel, target_k: int) -> PixelClusterModel:
    """Agglomeratively merge the closest center pair until ``target_k`` remain.

    Merged centers are size-weighted means, so the overall weighted center
    mass is conserved. Assignments follow their cluster's merge lineage.
    """
    if target_k < 1:
        raise ValueError(f"target_k must be >= 1, got {target_k}")
    if target_k > model.k:
        raise ValueError(f"target_k={target_k} exceeds current k={model.k}")
    if target_k == model.k:
        return model

    centers = [c.copy() for c in model.centers]
    sizes = [int(s) for s in model.cluster_sizes]
    remap = np.arange(model.k, dtype=np.int64)

    while len(centers) > target_k:
        arr = np.asarray(centers)
        d2 = squared_distances(arr, arr)
        np.fill_diagonal(d2, np.inf)
        flat = int(np.argmin(d2))  # row-major argmin = lexicographically first tie
        a, b = divmod(flat, len(centers))
        if a > b:
            a, b = b, a
        total = sizes[a] + sizes[b]
        centers[a] = (centers[a] * sizes[a] + centers[b] * sizes[b]) / total
        sizes[a] = total
        del centers[b], sizes[b]
        remap[remap == b] = a
        remap[remap > b] -= 1

    merged = PixelClusterModel(
        centers=np.asarray(centers),
        assignments=remap[model.assignments],
        cluster_sizes=np.asarray(sizes, dtype=np.int64),
        shape=model.shape,
        objective=model.objective,
        objective_trace=model.objective_trace,
    )
    return merged


def render_model(model: PixelClusterModel) -> np.ndarray:
    """Paint each pixel with its (rounded) cluster-center color."""
    palette = np.rint(model.centers).clip(0, 255).astype(np.uint8)
    h, w = model.shape
    return palette[model.assignments].reshape(h, w, 3)


def quantize_image(
    img: np.ndarray,
    seed: int = 0,
    k1: int = 20,
    k2: int = 10,
    subsample_stride: int | None = None,
) -> np.ndarray:
    """Full two-stage quantization: cluster to k1 colors, merge to k2, repaint.

    Images with fewer than k1 distinct colors fall back to k = distinct-color
    count (and merge targets shrink accordingly).
    """
    img = check_raster(img)
    distinct = np.unique(img.reshape(-1, 3), axis=0).shape[0]
    k_first = min(k1, distinct)
    k_second = min(k2, k_first)
    model = kmeans_pixels(img, k_first, seed=seed, subsample_stride=subsample_stride)
    model = merge_clusters(model, k_second)
    return render_model(model)
