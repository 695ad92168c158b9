"""Raster primitives: normalization, Gaussian smoothing, and RGB/HSV conversion.

Images are 8-bit RGB arrays of shape (H, W, 3). HSV grids are float64 with
hue on the half-degree [0, 180) scale and saturation/value on [0, 255];
keeping HSV in floating point preserves enough precision for an exact-ish
round trip back to RGB, which integer hue cannot provide.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import check_raster


@dataclass(frozen=True)
class GaussianKernelSpec:
    """Square Gaussian kernel: odd side length and positive sigma."""

    size: int = 3
    sigma: float = 1.5

    def __post_init__(self):
        if self.size < 1 or self.size % 2 == 0:
            raise ValueError(f"kernel size must be odd and >= 1, got {self.size}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


def normalize_image(img: np.ndarray) -> np.ndarray:
    """Per-channel min-max rescale to the full [0, 255] range.

    Constant channels pass through unchanged (degenerate range).
    """
    img = check_raster(img)
    out = img.astype(np.float64)
    for c in range(3):
        ch = out[..., c]
        lo, hi = ch.min(), ch.max()
        if hi > lo:
            out[..., c] = (ch - lo) * (255.0 / (hi - lo))
    return np.rint(out).clip(0, 255).astype(np.uint8)


def build_gaussian_kernel(spec: GaussianKernelSpec) -> np.ndarray:
    """Evaluate exp(-(x²+y²)/(2σ²)) at integer offsets and normalize to sum 1."""
    half = spec.size // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    sq = ax[:, None] ** 2 + ax[None, :] ** 2
    kernel = np.exp(-sq / (2.0 * spec.sigma**2))
    return kernel / kernel.sum()


def convolve_channel(channel: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """2-D convolution of one float channel with edge-replicate padding.

    Accumulates kernel taps in a fixed scan order so results are
    bit-reproducible.
    """
    channel = np.asarray(channel, dtype=np.float64)
    if channel.ndim != 2:
        raise ValueError(f"channel must be 2-D, got shape {channel.shape}")
    half = kernel.shape[0] // 2
    if half == 0:
        return channel * kernel[0, 0]
    padded = np.pad(channel, half, mode="edge")
    h, w = channel.shape
    out = np.zeros_like(channel)
    for dy in range(kernel.shape[0]):
        for dx in range(kernel.shape[1]):
            out += kernel[dy, dx] * padded[dy : dy + h, dx : dx + w]
    return out


def gaussian_filter(img: np.ndarray, spec: GaussianKernelSpec | None = None) -> np.ndarray:
    """Smooth each channel with the normalized Gaussian kernel.

    Arithmetic runs in float64 and is rounded to nearest on the way back to
    uint8 to avoid cumulative quantization bias.
    """
    img = check_raster(img)
    spec = spec or GaussianKernelSpec()
    kernel = build_gaussian_kernel(spec)
    out = np.empty_like(img, dtype=np.float64)
    for c in range(3):
        out[..., c] = convolve_channel(img[..., c].astype(np.float64), kernel)
    return np.rint(out).clip(0, 255).astype(np.uint8)


def rgb_to_hsv(img: np.ndarray) -> np.ndarray:
    """Convert an RGB raster to a float HSV grid (H in [0,180), S/V in [0,255])."""
    img = check_raster(img)
    rgb = img.astype(np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]

    v = rgb.max(axis=2)
    c = v - rgb.min(axis=2)

    s = np.zeros_like(v)
    nz = v > 0
    s[nz] = c[nz] / v[nz] * 255.0

    hue = np.zeros_like(v)
    chroma = c > 0
    safe_c = np.where(chroma, c, 1.0)
    seg_r = (g - b) / safe_c
    seg_g = (b - r) / safe_c + 2.0
    seg_b = (r - g) / safe_c + 4.0
    segment = np.select([r == v, g == v], [seg_r, seg_g], default=seg_b)
    hue = np.where(chroma, (segment * 60.0) % 360.0, 0.0)

    out = np.empty_like(rgb)
    out[..., 0] = hue / 2.0  # half-degree hue scale
    out[..., 1] = s
    out[..., 2] = v
    # guard against 179.999... % artifacts landing exactly on 180
    out[..., 0][out[..., 0] >= 180.0] = 0.0
    return out


def hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    """Inverse of :func:`rgb_to_hsv`, rounded back to an 8-bit RGB raster."""
    hsv = np.asarray(hsv, dtype=np.float64)
    if hsv.ndim != 3 or hsv.shape[2] != 3:
        raise ValueError(f"hsv must have shape (H, W, 3), got {hsv.shape}")
    h_deg = hsv[..., 0] * 2.0
    s = hsv[..., 1] / 255.0
    v = hsv[..., 2]

    c = s * v
    hp = h_deg / 60.0
    x = c * (1.0 - np.abs(hp % 2.0 - 1.0))
    m = v - c

    sextant = np.floor(hp).astype(int) % 6
    zeros = np.zeros_like(c)
    # (r, g, b) pattern per 60-degree sextant
    r = np.choose(sextant, [c, x, zeros, zeros, x, c])
    g = np.choose(sextant, [x, c, c, x, zeros, zeros])
    b = np.choose(sextant, [zeros, zeros, x, c, c, x])

    rgb = np.stack([r + m, g + m, b + m], axis=2)
    return np.rint(rgb).clip(0, 255).astype(np.uint8)
