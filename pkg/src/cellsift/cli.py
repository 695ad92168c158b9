"""Command-line interface.

Subcommands: filter, prototype, select, run-all, bench. Configuration comes
from an optional ``key = value`` file plus flag overrides (flags win).
Exit codes: 0 success, 1 configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .features import FeatureFormatError
from .pipeline import (ConfigError, DataError, build_config, load_config_file,
                       run_all, run_filter_stage, run_prototype_stage, run_select_stage)
from .prototypes import fit_prototypes
from .selection import compute_thresholds, make_fixed_table, select_samples
from .synth import SyntheticSpec, evaluate, generate, load_spec_file


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--out", dest="output_dir", help="output directory")
    p.add_argument("--seed", type=int, dest="seed")


def _add_filter_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--unlabeled", dest="unlabeled_dir", help="directory of slide images")
    p.add_argument("--sigma", type=float, dest="sigma")
    p.add_argument("--kernel-size", type=int, dest="kernel_size")
    p.add_argument("--quant-k1", type=int, dest="quant_k1")
    p.add_argument("--quant-k2", type=int, dest="quant_k2")
    p.add_argument("--purple-range", dest="purple_range", help="h_lo,h_hi,s_lo,s_hi,v_lo,v_hi")
    p.add_argument("--blue-range", dest="blue_range", help="h_lo,h_hi,s_lo,s_hi,v_lo,v_hi")
    p.add_argument("--min-side", type=int, dest="min_side")
    p.add_argument("--fill-rate", type=float, dest="fill_rate")
    p.add_argument("--detect-source", dest="detect_source", choices=["quantized", "smoothed"])
    p.add_argument("--connectivity", type=int, dest="connectivity", choices=[4, 8])
    p.add_argument("--opening", type=int, dest="opening", help="morphological opening iterations")
    p.add_argument("--closing", type=int, dest="closing", help="morphological closing iterations")
    p.add_argument("--workers", type=int, dest="workers")


def _add_prototype_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--labeled-dir", dest="labeled_dir", help="directory of labeled crops")
    p.add_argument("--labels", dest="labels_file", help="CSV of id,class_index")
    p.add_argument("--labeled-features", dest="labeled_features", help="external feature file")
    p.add_argument("--prototypes", "-k", type=int, dest="prototypes")
    p.add_argument("--feature-source", dest="feature_source", choices=["baseline", "external"])


def _add_select_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--candidate-features", dest="candidate_features", help="external feature file")
    p.add_argument("--alpha", type=float, dest="alpha")
    p.add_argument("--min-radius", type=float, dest="min_radius")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cellsift",
                                     description="Slide curation: region filtering and adaptive sample selection")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("filter", help="detect and crop cell regions")
    _add_common(p)
    _add_filter_flags(p)

    p = sub.add_parser("prototype", help="fit prototype clusters on labeled features")
    _add_common(p)
    _add_filter_flags(p)
    _add_prototype_flags(p)

    p = sub.add_parser("select", help="select candidates under adaptive thresholds")
    _add_common(p)
    _add_select_flags(p)

    p = sub.add_parser("run-all", help="filter, prototype, and select in sequence")
    _add_common(p)
    _add_filter_flags(p)
    _add_prototype_flags(p)
    _add_select_flags(p)

    p = sub.add_parser("bench", help="synthetic selection-quality benchmark")
    p.add_argument("--spec", help="synthetic spec file (key = value)")
    p.add_argument("--policy", choices=["adaptive", "fixed"], default="adaptive",
                   help="adaptive thresholds or fixed-at-LB baseline")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p.add_argument("--out", help="metrics report path (default: stdout)")
    return parser


_CONFIG_KEYS = ("output_dir", "unlabeled_dir", "labeled_dir", "labels_file",
                "labeled_features", "candidate_features", "sigma", "kernel_size",
                "quant_k1", "quant_k2", "purple_range", "blue_range", "min_side",
                "fill_rate", "prototypes", "alpha", "min_radius", "seed",
                "feature_source", "detect_source", "connectivity", "opening",
                "closing", "workers")


def _config_from_args(args: argparse.Namespace):
    raw = load_config_file(args.config) if args.config else {}
    overrides = {k: getattr(args, k) for k in _CONFIG_KEYS if hasattr(args, k)}
    return build_config(raw, overrides)


def run_bench(args: argparse.Namespace) -> None:
    spec = load_spec_file(args.spec) if args.spec else SyntheticSpec()
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    labeled, candidates, truth = generate(spec)
    model = fit_prototypes(labeled, k=spec.n_classes, seed=spec.seed)
    if args.policy == "adaptive":
        table = compute_thresholds(model, alpha=args.alpha)
    else:
        table = make_fixed_table(model)
    manifest = select_samples(candidates, model, table)
    metrics = evaluate(manifest, truth)

    lines = ["# cellsift bench report v1",
             f"# config policy={args.policy} alpha={args.alpha} seed={spec.seed} "
             f"classes={len(spec.class_sizes)} dim={spec.dim}",
             "metric,value"]
    for c, r in enumerate(metrics.per_class_recall):
        lines.append(f"class_{c}_recall,{r!r}")
    lines.append(f"contamination,{metrics.contamination!r}")
    lines.append(f"rare_class_recall,{metrics.rare_class_recall!r}")
    lines.append(f"common_class_recall,{metrics.common_class_recall!r}")
    lines.append(f"accepted_total,{manifest.n_accepted}")
    lines.append(f"candidates,{len(candidates)}")
    if metrics.degenerate_rates:
        lines.append("# degenerate (0/0) rates: " + ",".join(metrics.degenerate_rates))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.command == "bench":
            run_bench(args)
        else:
            cfg = _config_from_args(args)
            if args.command == "filter":
                payload = run_filter_stage(cfg)
                print(f"filter: kept {payload['regions_kept']} of {payload['regions_found']} "
                      f"regions from {payload['images_in']} images")
            elif args.command == "prototype":
                payload = run_prototype_stage(cfg)
                print(f"prototype: fitted k={payload['k']} on {payload['labeled_count']} samples")
            elif args.command == "select":
                payload = run_select_stage(cfg)
                print(f"select: accepted {payload['selected_total']} of {payload['candidates']} candidates")
            elif args.command == "run-all":
                payload = run_all(cfg)
                print(f"run-all: {payload['select']['selected_total']} samples selected")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (DataError, FeatureFormatError, ValueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
