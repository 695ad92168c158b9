"""cellsift: stained-slide curation via region filtering and adaptive selection."""

__version__ = "0.1.0"

from .raster import (GaussianKernelSpec, build_gaussian_kernel, gaussian_filter,
                     hsv_to_rgb, normalize_image, rgb_to_hsv)
from .quantize import PixelClusterModel, kmeans_pixels, merge_clusters, quantize_image
from .regions import (CandidateRegion, HsvRange, combine_masks, detect_regions,
                      extract_regions, hsv_threshold)
from .features import (FeatureSet, FeatureVector, baseline_extract, read_features,
                       read_features_csv, write_features)
from .prototypes import (PrototypeKMeans, PrototypeModel, assign_nearest,
                         fit_prototypes, load_model, save_model)
from .selection import (AdaptiveSelector, SelectionManifest, ThresholdTable,
                        compute_thresholds, make_fixed_table, select_samples)
from .synth import SelectionMetrics, SyntheticSpec, evaluate, generate

__all__ = [
    "GaussianKernelSpec", "build_gaussian_kernel", "gaussian_filter", "hsv_to_rgb",
    "normalize_image", "rgb_to_hsv",
    "PixelClusterModel", "kmeans_pixels", "merge_clusters", "quantize_image",
    "CandidateRegion", "HsvRange", "combine_masks", "detect_regions",
    "extract_regions", "hsv_threshold",
    "FeatureSet", "FeatureVector", "baseline_extract", "read_features",
    "read_features_csv", "write_features",
    "PrototypeKMeans", "PrototypeModel", "assign_nearest", "fit_prototypes",
    "load_model", "save_model",
    "AdaptiveSelector", "SelectionManifest", "ThresholdTable", "compute_thresholds",
    "make_fixed_table", "select_samples",
    "SelectionMetrics", "SyntheticSpec", "evaluate", "generate",
    "__version__",
]
