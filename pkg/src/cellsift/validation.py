"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np


def check_raster(img: np.ndarray, name: str = "image") -> np.ndarray:
    """Validate an 8-bit RGB raster of shape (height, width, 3)."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"{name} must have shape (H, W, 3), got {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"{name} must be at least 1x1, got {img.shape[:2]}")
    if img.dtype != np.uint8:
        raise ValueError(f"{name} must be uint8, got {img.dtype}")
    return img


def check_hsv_image(hsv: np.ndarray, name: str = "hsv") -> np.ndarray:
    """Validate an HSV grid: float, H in [0, 180), S and V in [0, 255]."""
    hsv = np.asarray(hsv, dtype=np.float64)
    if hsv.ndim != 3 or hsv.shape[2] != 3:
        raise ValueError(f"{name} must have shape (H, W, 3), got {hsv.shape}")
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    if h.size and (h.min() < 0 or h.max() >= 180):
        raise ValueError(f"{name} hue out of [0, 180)")
    for comp, label in ((s, "saturation"), (v, "value")):
        if comp.size and (comp.min() < 0 or comp.max() > 255):
            raise ValueError(f"{name} {label} out of [0, 255]")
    return hsv


def check_mask(mask: np.ndarray, name: str = "mask") -> np.ndarray:
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {mask.shape}")
    if mask.dtype != bool:
        raise ValueError(f"{name} must be boolean, got {mask.dtype}")
    return mask


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "inputs") -> None:
    if a.shape[:2] != b.shape[:2]:
        raise ValueError(f"{what} have mismatched shapes {a.shape[:2]} vs {b.shape[:2]}")


def check_feature_matrix(X, dim: int | None = None) -> np.ndarray:
    """Coerce to a 2-D float64 matrix of finite values, optionally checking width."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D sample matrix, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise ValueError("feature matrix contains NaN or infinite values")
    if dim is not None and X.shape[1] != dim:
        raise ValueError(f"feature dimension mismatch: expected {dim}, got {X.shape[1]}")
    return X
