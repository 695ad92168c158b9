"""End-to-end orchestration: filter, prototype, and select stages.

Each stage reads and writes files under the configured output directory so
stages can run separately (even on different machines) or back to back via
``run_all``; both paths produce identical data artifacts. All outputs are
written to temporary names and renamed on completion, so an interrupted run
never leaves truncated files behind.

Outputs::

    crops/{image_id}_{index}.png   region crops from the filter stage
    regions.csv                    region manifest (one row per kept region)
    model.apm                      fitted prototype model
    selection.csv                  per-candidate selection manifest
    accepted_ids.txt               plain id list of accepted samples
    report.json                    run report (counts, timings, config echo)
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import __version__
from .features import FeatureSet, extract_feature_set, load_feature_file
from .prototypes import fit_prototypes, load_model, save_model
from .quantize import quantize_image
from .raster import GaussianKernelSpec, gaussian_filter, normalize_image, rgb_to_hsv
from .regions import (DEEP_BLUE_RANGE_DEFAULT, PURPLE_RANGE_DEFAULT, HsvRange,
                      combine_masks, component_stats, extract_regions, hsv_threshold)
from .selection import compute_thresholds, select_samples, write_accepted_ids, write_manifest

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}


class ConfigError(Exception):
    """Invalid configuration or missing referenced paths (exit code 1)."""


class DataError(Exception):
    """Unusable input data: empty directories, bad files, mismatches (exit code 2)."""


@dataclass
class PipelineConfig:
    output_dir: str = "out"
    unlabeled_dir: str | None = None
    labeled_dir: str | None = None
    labels_file: str | None = None
    labeled_features: str | None = None
    candidate_features: str | None = None
    sigma: float = 1.5
    kernel_size: int = 3
    quant_k1: int = 20
    quant_k2: int = 10
    purple_range: tuple = PURPLE_RANGE_DEFAULT
    blue_range: tuple = DEEP_BLUE_RANGE_DEFAULT
    min_side: int = 70
    fill_rate: float = 0.7
    prototypes: int = 11
    alpha: float = 0.5
    min_radius: float = 0.0
    seed: int = 0
    feature_source: str = "baseline"
    detect_source: str = "quantized"
    connectivity: int = 8
    opening: int = 0
    closing: int = 0
    workers: int = 4
    filter_labeled: bool = False
    subsample_stride: int = 0

    def __post_init__(self):
        try:
            self.purple = HsvRange(*self.purple_range)
            self.deep_blue = HsvRange(*self.blue_range)
            GaussianKernelSpec(self.kernel_size, self.sigma)
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from None
        if self.quant_k1 < 1 or self.quant_k2 < 1 or self.quant_k2 > self.quant_k1:
            raise ConfigError(f"need 1 <= quant_k2 <= quant_k1, got {self.quant_k1}/{self.quant_k2}")
        if not 0.0 <= self.fill_rate <= 1.0:
            raise ConfigError(f"fill_rate must lie in [0, 1], got {self.fill_rate}")
        if self.min_side < 1:
            raise ConfigError(f"min_side must be >= 1, got {self.min_side}")
        if self.prototypes < 1:
            raise ConfigError(f"prototypes must be >= 1, got {self.prototypes}")
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if self.min_radius < 0:
            raise ConfigError(f"min_radius must be >= 0, got {self.min_radius}")
        if self.feature_source not in ("baseline", "external"):
            raise ConfigError(f"feature_source must be baseline or external, got {self.feature_source}")
        if self.detect_source not in ("quantized", "smoothed"):
            raise ConfigError(f"detect_source must be quantized or smoothed, got {self.detect_source}")
        if self.connectivity not in (4, 8):
            raise ConfigError(f"connectivity must be 4 or 8, got {self.connectivity}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("purple", None)
        d.pop("deep_blue", None)
        d["purple_range"] = ",".join(str(v) for v in self.purple_range)
        d["blue_range"] = ",".join(str(v) for v in self.blue_range)
        return d

    def echo(self) -> dict:
        """Flat, sorted config snapshot for artifact headers.

        The output directory is omitted: it is where the artifact already
        lives and would break byte-comparison of otherwise identical runs.
        """
        d = self.to_dict()
        d.pop("output_dir")
        return {k: d[k] for k in sorted(d)}


_BOOL_KEYS = {"filter_labeled"}
_INT_KEYS = {"kernel_size", "quant_k1", "quant_k2", "min_side", "prototypes", "seed",
             "connectivity", "opening", "closing", "workers", "subsample_stride"}
_FLOAT_KEYS = {"sigma", "fill_rate", "alpha", "min_radius"}
_RANGE_KEYS = {"purple_range", "blue_range"}
_STR_KEYS = {"output_dir", "unlabeled_dir", "labeled_dir", "labels_file",
             "labeled_features", "candidate_features", "feature_source", "detect_source"}


def load_config_file(path: str | Path) -> dict:
    """Parse the flat ``key = value`` config format (# comments allowed)."""
    raw: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        raw[key.strip()] = value.strip()
    return raw


def build_config(raw: dict, overrides: dict | None = None) -> PipelineConfig:
    """Typed config from raw strings; explicit overrides (CLI flags) win."""
    merged = dict(raw)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    kwargs: dict = {}
    for key, value in merged.items():
        if key in _BOOL_KEYS:
            kwargs[key] = value if isinstance(value, bool) else str(value).lower() in ("1", "true", "yes")
        elif key in _INT_KEYS:
            kwargs[key] = int(value)
        elif key in _FLOAT_KEYS:
            kwargs[key] = float(value)
        elif key in _RANGE_KEYS:
            if isinstance(value, str):
                kwargs[key] = tuple(float(v) for v in value.split(","))
            else:
                kwargs[key] = tuple(value)
        elif key in _STR_KEYS:
            kwargs[key] = str(value) if value is not None else None
        else:
            raise ConfigError(f"unknown config key {key!r}")
    try:
        return PipelineConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# File helpers


def load_image(path: str | Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"))
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise DataError(f"cannot read image {path}: {exc}") from None


def save_image(img: np.ndarray, path: str | Path) -> None:
    path = Path(path)
    tmp = path.parent / (path.name + ".tmp")
    Image.fromarray(img, mode="RGB").save(tmp, format="PNG")
    os.replace(tmp, path)


def atomic_write_text(text: str, path: str | Path) -> None:
    path = Path(path)
    tmp = path.parent / (path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _atomic(write_fn, path: Path) -> None:
    tmp = path.parent / (path.name + ".tmp")
    write_fn(tmp)
    os.replace(tmp, path)


def load_labels_csv(path: str | Path) -> dict[str, int]:
    """Labels file: header then ``id,class_index`` rows."""
    labels: dict[str, int] = {}
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader, None)  # header
            for row in reader:
                if not row:
                    continue
                if len(row) < 2:
                    raise DataError(f"{path}: malformed label row {row!r}")
                labels[row[0]] = int(row[1])
    except OSError as exc:
        raise ConfigError(f"cannot read labels file: {exc}") from None
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    return labels


def list_images(directory: str | Path) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise ConfigError(f"image directory does not exist: {directory}")
    paths = sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not paths:
        raise DataError(f"no images found in {directory}")
    return paths


def _update_report(out_dir: Path, cfg: PipelineConfig, stage: str, payload: dict) -> None:
    report_path = out_dir / "report.json"
    report = {"tool": "cellsift", "version": __version__, "config": cfg.echo(), "stages": {}}
    if report_path.exists():
        try:
            previous = json.loads(report_path.read_text())
            report["stages"] = previous.get("stages", {})
        except (json.JSONDecodeError, OSError):
            pass
    report["stages"][stage] = payload
    atomic_write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", report_path)


# ---------------------------------------------------------------------------
# Stages


def _process_slide(path: Path, cfg: PipelineConfig):
    """Filter pipeline for one slide; returns (image_id, regions, found, error)."""
    image_id = path.stem
    try:
        img = load_image(path)
    except DataError as exc:
        return image_id, [], 0, str(exc)
    normalized = normalize_image(img)
    smoothed = gaussian_filter(normalized, GaussianKernelSpec(cfg.kernel_size, cfg.sigma))
    if cfg.detect_source == "quantized":
        detect_img = quantize_image(smoothed, seed=cfg.seed, k1=cfg.quant_k1, k2=cfg.quant_k2,
                                    subsample_stride=cfg.subsample_stride or None)
    else:
        detect_img = smoothed
    hsv = rgb_to_hsv(detect_img)
    mask = combine_masks(hsv_threshold(hsv, cfg.purple), hsv_threshold(hsv, cfg.deep_blue))
    if cfg.opening > 0:
        from scipy import ndimage
        mask = ndimage.binary_opening(mask, iterations=cfg.opening)
    if cfg.closing > 0:
        from scipy import ndimage
        mask = ndimage.binary_closing(mask, iterations=cfg.closing)
    found = len(component_stats(mask, cfg.connectivity))
    regions = extract_regions(mask, normalized, min_side=cfg.min_side, tau=cfg.fill_rate,
                              source_image_id=image_id, connectivity=cfg.connectivity)
    return image_id, regions, found, None


def run_filter_stage(cfg: PipelineConfig, image_dir: str | None = None) -> dict:
    """Detect cell regions on every unlabeled slide and persist the crops."""
    t0 = time.perf_counter()
    src = image_dir or cfg.unlabeled_dir
    if not src:
        raise ConfigError("filter stage needs unlabeled_dir")
    paths = list_images(src)

    out_dir = Path(cfg.output_dir)
    crops_dir = out_dir / "crops"
    crops_dir.mkdir(parents=True, exist_ok=True)

    failures: list[str] = []
    zero_region_images: list[str] = []
    manifest_rows: list[str] = []
    found_total = 0
    kept_total = 0
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        results = list(pool.map(lambda p: _process_slide(p, cfg), paths))
    for image_id, regions, found, error in results:
        if error is not None:
            failures.append(error)
            continue
        found_total += found
        kept_total += len(regions)
        if not regions:
            zero_region_images.append(image_id)
        for index, region in enumerate(regions):
            x, y, w, h = region.bbox
            save_image(region.crop, crops_dir / f"{image_id}_{index}.png")
            manifest_rows.append(f"{image_id},{x},{y},{w},{h},{region.fill_rate!r}")
    assert kept_total <= found_total

    lines = ["# cellsift region manifest v1"]
    lines += [f"# config {k}={v}" for k, v in cfg.echo().items()]
    lines.append("image_id,x,y,w,h,fill_rate")
    lines += manifest_rows
    atomic_write_text("\n".join(lines) + "\n", out_dir / "regions.csv")

    payload = {
        "images_in": len(paths),
        "images_failed": len(failures),
        "failures": failures,
        "images_without_regions": zero_region_images,
        "regions_found": found_total,
        "regions_kept": kept_total,
        "wall_clock_s": round(time.perf_counter() - t0, 6),
    }
    _update_report(out_dir, cfg, "filter", payload)
    return payload


def _labeled_feature_set(cfg: PipelineConfig) -> FeatureSet:
    if cfg.feature_source == "external" or cfg.labeled_features:
        if not cfg.labeled_features:
            raise ConfigError("feature_source=external requires labeled_features")
        try:
            return load_feature_file(cfg.labeled_features)
        except OSError as exc:
            raise ConfigError(f"cannot read labeled features: {exc}") from None
        except ValueError as exc:
            raise DataError(str(exc)) from None
    if not cfg.labeled_dir:
        raise ConfigError("prototype stage needs labeled_dir or labeled_features")
    labels = load_labels_csv(cfg.labels_file) if cfg.labels_file else {}
    crops: list[tuple[str, np.ndarray]] = []
    if cfg.filter_labeled:
        # run detection on labeled slides; crops inherit the slide's label
        for path in list_images(cfg.labeled_dir):
            image_id, regions, _, error = _process_slide(path, cfg)
            if error is not None:
                continue
            for index, region in enumerate(regions):
                crop_id = f"{image_id}_{index}"
                crops.append((crop_id, region.crop))
                if image_id in labels:
                    labels[crop_id] = labels[image_id]
    else:
        for path in list_images(cfg.labeled_dir):
            crops.append((path.stem, load_image(path)))
    return extract_feature_set(crops, labels)


def run_prototype_stage(cfg: PipelineConfig) -> dict:
    """Fit prototypes on labeled features and serialize the model."""
    t0 = time.perf_counter()
    labeled = _labeled_feature_set(cfg)
    if len(labeled) < cfg.prototypes:
        raise DataError(
            f"{len(labeled)} labeled samples but {cfg.prototypes} prototypes requested")
    try:
        model = fit_prototypes(labeled, k=cfg.prototypes, seed=cfg.seed)
    except ValueError as exc:
        raise DataError(str(exc)) from None

    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _atomic(lambda tmp: save_model(model, tmp), out_dir / "model.apm")

    payload = {
        "labeled_count": len(labeled),
        "k": model.k,
        "dim": model.dim,
        "objective": model.objective,
        "cluster_sizes": model.sizes.tolist(),
        "label_purity": None if model.label_purity is None else model.label_purity.tolist(),
        "wall_clock_s": round(time.perf_counter() - t0, 6),
    }
    _update_report(out_dir, cfg, "prototype", payload)
    return payload


def _candidate_feature_set(cfg: PipelineConfig, model_dim: int) -> FeatureSet:
    if cfg.candidate_features:
        try:
            return load_feature_file(cfg.candidate_features)
        except OSError as exc:
            raise ConfigError(f"cannot read candidate features: {exc}") from None
        except ValueError as exc:
            raise DataError(str(exc)) from None
    crops_dir = Path(cfg.output_dir) / "crops"
    if not crops_dir.is_dir():
        raise ConfigError(f"no candidate_features given and no crops at {crops_dir}")
    crop_paths = sorted(p for p in crops_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    crops = [(p.stem, load_image(p)) for p in crop_paths]
    if crops:
        return extract_feature_set(crops)
    return FeatureSet(dim=model_dim, vectors=[], source="baseline")


def run_select_stage(cfg: PipelineConfig) -> dict:
    """Apply adaptive thresholds to candidate features and write manifests."""
    t0 = time.perf_counter()
    out_dir = Path(cfg.output_dir)
    model_path = out_dir / "model.apm"
    if not model_path.exists():
        raise ConfigError(f"model file not found: {model_path}")
    try:
        model = load_model(model_path)
    except ValueError as exc:
        raise DataError(str(exc)) from None

    candidates = _candidate_feature_set(cfg, model.dim)
    if candidates.dim != model.dim:
        raise DataError(
            f"candidate dim {candidates.dim} does not match model dim {model.dim}")

    table = compute_thresholds(model, alpha=cfg.alpha, min_radius=cfg.min_radius)
    manifest = select_samples(candidates, model, table, config=cfg.echo())
    assert manifest.n_accepted <= len(candidates)
    _atomic(lambda tmp: write_manifest(manifest, tmp), out_dir / "selection.csv")
    _atomic(lambda tmp: write_accepted_ids(manifest, tmp), out_dir / "accepted_ids.txt")

    payload = {
        "candidates": len(candidates),
        "selected_total": manifest.n_accepted,
        "per_cluster_accepted": manifest.per_cluster_accepted.tolist(),
        "per_cluster_rejected": manifest.per_cluster_rejected.tolist(),
        "thresholds": table.thresholds.tolist(),
        "wall_clock_s": round(time.perf_counter() - t0, 6),
    }
    _update_report(out_dir, cfg, "select", payload)
    return payload


def run_all(cfg: PipelineConfig) -> dict:
    """Filter, prototype, and select in sequence through the same files."""
    return {
        "filter": run_filter_stage(cfg),
        "prototype": run_prototype_stage(cfg),
        "select": run_select_stage(cfg),
    }
