"""HSV dual-mask cell-region detection with size and fill-rate constraints.

A purple mask and a deep-blue mask are OR-combined, connected components are
labeled (8-connected by default), and components are kept only when their
bounding box is at least ``min_side`` on both dimensions and the fill rate
(on-pixels / bbox area) is at least ``tau``. Both bounds are inclusive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .raster import rgb_to_hsv
from .validation import check_hsv_image, check_mask, check_raster, check_same_shape

PURPLE_RANGE_DEFAULT = (30, 140, 100, 255, 0, 255)
DEEP_BLUE_RANGE_DEFAULT = (95, 105, 150, 255, 50, 255)


@dataclass(frozen=True)
class HsvRange:
    """Closed HSV interval: hue on [0, 180), saturation/value on [0, 255]."""

    h_lo: float
    h_hi: float
    s_lo: float
    s_hi: float
    v_lo: float
    v_hi: float

    def __post_init__(self):
        for lo, hi, label in ((self.h_lo, self.h_hi, "h"), (self.s_lo, self.s_hi, "s"),
                              (self.v_lo, self.v_hi, "v")):
            if lo > hi:
                raise ValueError(f"{label}_lo > {label}_hi ({lo} > {hi})")
        if self.h_lo < 0 or self.h_hi >= 180:
            raise ValueError("hue bounds must lie in [0, 180)")
        for v, label in ((self.s_lo, "s_lo"), (self.s_hi, "s_hi"),
                         (self.v_lo, "v_lo"), (self.v_hi, "v_hi")):
            if v < 0 or v > 255:
                raise ValueError(f"{label} out of [0, 255]")

    @classmethod
    def from_csv(cls, text: str) -> "HsvRange":
        parts = [float(p) for p in text.split(",")]
        if len(parts) != 6:
            raise ValueError(f"expected 6 comma-separated bounds, got {text!r}")
        return cls(*parts)


PURPLE_RANGE = HsvRange(*PURPLE_RANGE_DEFAULT)
DEEP_BLUE_RANGE = HsvRange(*DEEP_BLUE_RANGE_DEFAULT)


@dataclass
class CandidateRegion:
    """One detected region: bbox in (x, y, w, h), fill rate, and its crop.

    The crop is cut from the original (pre-quantization) image so downstream
    feature extraction sees full color fidelity.
    """

    bbox: tuple[int, int, int, int]
    fill_rate: float
    source_image_id: str = ""
    crop: np.ndarray | None = field(default=None, repr=False)


def hsv_threshold(hsv: np.ndarray, rng: HsvRange) -> np.ndarray:
    """Bit set iff all three components lie within their closed interval."""
    hsv = check_hsv_image(hsv)
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    return (
        (h >= rng.h_lo) & (h <= rng.h_hi)
        & (s >= rng.s_lo) & (s <= rng.s_hi)
        & (v >= rng.v_lo) & (v <= rng.v_hi)
    )


def combine_masks(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = check_mask(a, "mask a")
    b = check_mask(b, "mask b")
    check_same_shape(a, b, "masks")
    return a | b


def label_components(mask: np.ndarray, connectivity: int = 8):
    """Label connected components; returns (labels, count).

    ``connectivity`` is 8 (default, diagonal-touching blobs merge) or 4.
    """
    mask = check_mask(mask)
    if connectivity == 8:
        structure = np.ones((3, 3), dtype=int)
    elif connectivity == 4:
        structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    else:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    labels, count = ndimage.label(mask, structure=structure)
    return labels, count


def component_stats(mask: np.ndarray, connectivity: int = 8) -> list[tuple[tuple[int, int, int, int], int]]:
    """Bounding box (x, y, w, h) and pixel count for every component."""
    labels, count = label_components(mask, connectivity)
    stats = []
    for idx, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is None:
            continue
        y, x = sl[0].start, sl[1].start
        h = sl[0].stop - sl[0].start
        w = sl[1].stop - sl[1].start
        pixels = int((labels[sl] == idx).sum())
        stats.append(((x, y, w, h), pixels))
    return stats


def extract_regions(
    mask: np.ndarray,
    original: np.ndarray,
    min_side: int = 70,
    tau: float = 0.7,
    source_image_id: str = "",
    connectivity: int = 8,
) -> list[CandidateRegion]:
    """Connected components of the mask filtered by size and fill rate.

    Accepted regions are returned in top-left scan order with crops taken
    from ``original``. An empty mask yields an empty list.
    """
    mask = check_mask(mask)
    original = check_raster(original, "original")
    check_same_shape(mask, original, "mask and original")

    regions = []
    for (x, y, w, h), pixels in component_stats(mask, connectivity):
        fill = pixels / float(w * h)
        if w >= min_side and h >= min_side and fill >= tau:
            crop = original[y : y + h, x : x + w].copy()
            regions.append(CandidateRegion(bbox=(x, y, w, h), fill_rate=fill,
                                           source_image_id=source_image_id, crop=crop))
    regions.sort(key=lambda r: (r.bbox[1], r.bbox[0]))
    return regions


def detect_regions(
    detection_img: np.ndarray,
    original: np.ndarray | None = None,
    purple: HsvRange = PURPLE_RANGE,
    deep_blue: HsvRange = DEEP_BLUE_RANGE,
    min_side: int = 70,
    tau: float = 0.7,
    source_image_id: str = "",
    connectivity: int = 8,
    opening: int = 0,
    closing: int = 0,
) -> list[CandidateRegion]:
    """Full detection on one image: HSV transform, dual masks, OR, extraction.

    ``detection_img`` drives the masks (typically the quantized image);
    crops come from ``original`` (defaults to ``detection_img``). Optional
    morphological opening/closing (iterations) are off by default.
    """
    if original is None:
        original = detection_img
    hsv = rgb_to_hsv(detection_img)
    mask = combine_masks(hsv_threshold(hsv, purple), hsv_threshold(hsv, deep_blue))
    if opening > 0:
        mask = ndimage.binary_opening(mask, iterations=opening)
    if closing > 0:
        mask = ndimage.binary_closing(mask, iterations=closing)
    return extract_regions(mask, original, min_side=min_side, tau=tau,
                           source_image_id=source_image_id, connectivity=connectivity)
