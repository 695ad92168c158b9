"""Synthetic fixtures: long-tailed feature sets, slide images, and metrics.

The real stained-slide corpus is not distributable, so benchmarking runs on
generated data with known ground truth. Feature-space fixtures place one
Gaussian blob per class on scaled basis directions with power-law class
sizes plus optional far-away distractors. Slide fixtures paint stained-color
blobs of controlled bounding box and fill rate onto white canvases.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .features import FeatureSet, FeatureVector
from .selection import SelectionManifest


def power_law_sizes(n_classes: int, largest: int = 200, ratio: float = 20.0) -> list[int]:
    """Class sizes decaying geometrically from ``largest`` down to largest/ratio."""
    if n_classes < 1:
        raise ValueError("n_classes must be >= 1")
    if n_classes == 1:
        return [largest]
    decay = ratio ** (1.0 / (n_classes - 1))
    return [max(1, int(round(largest / decay**i))) for i in range(n_classes)]


@dataclass(frozen=True)
class SyntheticSpec:
    class_sizes: tuple[int, ...] = tuple(power_law_sizes(11))
    separation: float = 12.0
    spread: float = 1.0
    distractor_fraction: float = 0.1
    seed: int = 0
    dim: int = 16

    def __post_init__(self):
        if any(s < 1 for s in self.class_sizes):
            raise ValueError("class sizes must be >= 1")
        if not self.separation > 0:
            raise ValueError("separation must be positive")
        if self.spread < 0:
            raise ValueError("spread must be >= 0")  # 0 = degenerate point classes
        if not 0.0 <= self.distractor_fraction < 1.0:
            raise ValueError("distractor_fraction must lie in [0, 1)")
        if self.dim < len(self.class_sizes):
            raise ValueError(
                f"dim={self.dim} too small to separate {len(self.class_sizes)} classes")

    @property
    def n_classes(self) -> int:
        return len(self.class_sizes)


@dataclass
class GroundTruth:
    """Candidate id -> true class index (-1 marks a distractor)."""

    classes: dict[str, int]
    class_sizes: tuple[int, ...]


@dataclass
class SelectionMetrics:
    per_class_recall: np.ndarray
    contamination: float
    rare_class_recall: float
    common_class_recall: float
    degenerate_rates: list[str] = field(default_factory=list)  # rates that were 0/0


def class_centers(spec: SyntheticSpec) -> np.ndarray:
    """One center per class: scaled standard basis directions."""
    centers = np.zeros((spec.n_classes, spec.dim))
    for c in range(spec.n_classes):
        centers[c, c] = spec.separation
    return centers


def generate(spec: SyntheticSpec) -> tuple[FeatureSet, FeatureSet, GroundTruth]:
    """Deterministic labeled set, candidate set, and hidden ground truth.

    Candidates are drawn from the same per-class distributions (same counts
    as the labeled sizes) plus distractors placed several separations away
    from every center.
    """
    rng = np.random.default_rng(spec.seed)
    centers = class_centers(spec)

    labeled: list[FeatureVector] = []
    for c, size in enumerate(spec.class_sizes):
        pts = centers[c] + rng.normal(0.0, spec.spread, size=(size, spec.dim))
        labeled.extend(
            FeatureVector(id=f"lab_{c}_{i}", values=p, label=c) for i, p in enumerate(pts))

    candidates: list[FeatureVector] = []
    truth: dict[str, int] = {}
    for c, size in enumerate(spec.class_sizes):
        pts = centers[c] + rng.normal(0.0, spec.spread, size=(size, spec.dim))
        for i, p in enumerate(pts):
            cid = f"cand_{c}_{i}"
            candidates.append(FeatureVector(id=cid, values=p))
            truth[cid] = c

    n_distract = int(round(spec.distractor_fraction * len(candidates)))
    for i in range(n_distract):
        direction = -np.abs(rng.normal(size=spec.dim))  # away from every basis center
        direction /= np.linalg.norm(direction)
        radius = (3.0 + rng.uniform()) * spec.separation
        cid = f"dist_{i}"
        candidates.append(FeatureVector(id=cid, values=radius * direction))
        truth[cid] = -1

    labeled_set = FeatureSet(dim=spec.dim, vectors=labeled, source="baseline")
    candidate_set = FeatureSet(dim=spec.dim, vectors=candidates, source="baseline")
    return labeled_set, candidate_set, GroundTruth(classes=truth, class_sizes=spec.class_sizes)


def _pooled_recall(accepted_by_class, totals_by_class, classes, flags, name):
    num = sum(accepted_by_class.get(c, 0) for c in classes)
    den = sum(totals_by_class.get(c, 0) for c in classes)
    if den == 0:
        flags.append(name)
        return 0.0
    return num / den


def evaluate(manifest: SelectionManifest, truth: GroundTruth) -> SelectionMetrics:
    """Exact counting of recall and contamination against ground truth.

    0/0 rates are reported as 0 and named in ``degenerate_rates``.
    """
    totals: dict[int, int] = {}
    for cls in truth.classes.values():
        totals[cls] = totals.get(cls, 0) + 1
    accepted: dict[int, int] = {}
    n_accepted = 0
    for row in manifest.rows:
        if row.id not in truth.classes:
            raise ValueError(f"manifest id {row.id!r} missing from ground truth")
        if row.accepted:
            n_accepted += 1
            cls = truth.classes[row.id]
            accepted[cls] = accepted.get(cls, 0) + 1

    flags: list[str] = []
    n_classes = len(truth.class_sizes)
    recall = np.zeros(n_classes)
    for c in range(n_classes):
        den = totals.get(c, 0)
        if den == 0:
            flags.append(f"class_{c}_recall")
        else:
            recall[c] = accepted.get(c, 0) / den

    contamination = 0.0
    if n_accepted == 0:
        flags.append("contamination")
    else:
        contamination = accepted.get(-1, 0) / n_accepted

    order = np.argsort(truth.class_sizes, kind="stable")
    tercile = max(1, n_classes // 3)
    rare = order[:tercile].tolist()
    common = order[-tercile:].tolist()
    rare_recall = _pooled_recall(accepted, totals, rare, flags, "rare_class_recall")
    common_recall = _pooled_recall(accepted, totals, common, flags, "common_class_recall")

    return SelectionMetrics(per_class_recall=recall, contamination=contamination,
                            rare_class_recall=rare_recall, common_class_recall=common_recall,
                            degenerate_rates=flags)


def load_spec_file(path: str | Path) -> SyntheticSpec:
    """Parse a ``key = value`` spec file (see README for the schema)."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        raw[key.strip()] = value.strip()
    kwargs: dict = {}
    if "class_sizes" in raw:
        kwargs["class_sizes"] = tuple(int(x) for x in raw.pop("class_sizes").split(","))
    for key, cast in (("separation", float), ("spread", float),
                      ("distractor_fraction", float), ("seed", int), ("dim", int)):
        if key in raw:
            kwargs[key] = cast(raw.pop(key))
    if raw:
        raise ValueError(f"{path}: unknown keys {sorted(raw)}")
    return SyntheticSpec(**kwargs)


# ---------------------------------------------------------------------------
# Slide fixtures for the image pipeline


PURPLE_BASE = (105, 48, 220)  # stays inside the purple mask under mild jitter
DEEP_BLUE_BASE = (28, 142, 200)  # hue ~100 on the half-degree scale


def blob_mask(side: int, fill: str | tuple) -> np.ndarray:
    """Boolean stamp with bounding box exactly side x side.

    ``fill`` is "solid" or ("L", arm_w, arm_h): a top-left L shape whose
    vertical arm spans the full height and horizontal arm the full width,
    giving pixel count arm_w*side + arm_h*side - arm_w*arm_h.
    """
    stamp = np.zeros((side, side), dtype=bool)
    if fill == "solid":
        stamp[:, :] = True
    elif isinstance(fill, tuple) and fill[0] == "L":
        _, arm_w, arm_h = fill
        stamp[:, :arm_w] = True
        stamp[:arm_h, :] = True
    else:
        raise ValueError(f"unknown fill {fill!r}")
    return stamp


def paint_blob(canvas: np.ndarray, x: int, y: int, stamp: np.ndarray, color: tuple) -> None:
    region = canvas[y : y + stamp.shape[0], x : x + stamp.shape[1]]
    region[stamp] = color


def make_slide(
    size: tuple[int, int],
    blobs: list[tuple[int, int, np.ndarray, tuple]],
    marker: bool = True,
) -> np.ndarray:
    """White canvas with painted blobs and (optionally) a black corner marker.

    The 2x2 marker keeps every channel full-range so min-max normalization
    is an identity on these fixtures; it is far too small to ever pass the
    region size constraint.
    """
    h, w = size
    canvas = np.full((h, w, 3), 255, dtype=np.uint8)
    if marker:
        canvas[2:4, 2:4] = 0
    for x, y, stamp, color in blobs:
        paint_blob(canvas, x, y, stamp, color)
    return canvas


def _jittered_color(rng: np.random.Generator) -> tuple:
    if rng.uniform() < 0.5:
        base, jitter = PURPLE_BASE, 10
    else:
        base, jitter = DEEP_BLUE_BASE, 5
    return tuple(int(np.clip(b + rng.integers(-jitter, jitter + 1), 0, 255)) for b in base)


@dataclass
class SlideCorpus:
    image_dir: Path
    valid_cells: dict[str, int]  # image id -> number of plantable valid regions
    blank_ids: list[str]

    @property
    def total_valid(self) -> int:
        return int(sum(self.valid_cells.values()))


def make_slide_corpus(
    out_dir: str | Path,
    seed: int = 0,
    n_blank: int = 40,
    n_single: int = 120,
    n_double: int = 10,
    n_invalid: int = 30,
    slide_size: tuple[int, int] = (192, 192),
) -> SlideCorpus:
    """Write a deterministic slide corpus with known per-slide valid counts.

    Valid blobs are solid squares of side 80 or 90; invalid slides carry
    either an under-sized 55x55 square or a ~0.51-fill L shape in a 100x100
    box, both safely on the wrong side of the constraints even after the
    smoothing and quantization stages shift edges by a pixel or two.
    """
    from .pipeline import save_image  # file IO lives with the pipeline

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    valid_cells: dict[str, int] = {}
    blank_ids: list[str] = []

    kinds = ["blank"] * n_blank + ["single"] * n_single + ["double"] * n_double + ["invalid"] * n_invalid
    rng.shuffle(kinds)

    h, w = slide_size
    for i, kind in enumerate(kinds):
        image_id = f"slide_{i:04d}"
        if kind == "blank":
            canvas = make_slide(slide_size, [], marker=False)
            valid_cells[image_id] = 0
            blank_ids.append(image_id)
        elif kind == "single":
            side = int(rng.choice([80, 90]))
            x = int(rng.integers(8, w - side - 8))
            y = int(rng.integers(8, h - side - 8))
            canvas = make_slide(slide_size, [(x, y, blob_mask(side, "solid"), _jittered_color(rng))])
            valid_cells[image_id] = 1
        elif kind == "double":
            blobs = [
                (8, 8, blob_mask(80, "solid"), _jittered_color(rng)),
                (w - 88, h - 88, blob_mask(80, "solid"), _jittered_color(rng)),
            ]
            canvas = make_slide(slide_size, blobs)
            valid_cells[image_id] = 2
        else:
            if rng.uniform() < 0.5:
                stamp = blob_mask(55, "solid")  # under min side even after blur growth
            else:
                stamp = blob_mask(100, ("L", 30, 30))  # fill ~0.51, far below tau
            x = int(rng.integers(8, w - stamp.shape[1] - 8))
            y = int(rng.integers(8, h - stamp.shape[0] - 8))
            canvas = make_slide(slide_size, [(x, y, stamp, _jittered_color(rng))])
            valid_cells[image_id] = 0
        save_image(canvas, out_dir / f"{image_id}.png")

    return SlideCorpus(image_dir=out_dir, valid_cells=valid_cells, blank_ids=blank_ids)
