"""Batch command-line interface.

Subcommands mirror the pipeline stages; each one reads the artifacts of
its predecessors from the output directory, so a run can be executed in
one `pipeline` invocation or stage by stage.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import pipeline as pl
from .errors import DataError, ReportError, StageError


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="path to a key = value config file")
    parser.add_argument("--seed", type=int, default=None, help="override the root seed")
    parser.add_argument("--out", default=None, help="override the output directory")


def _selector_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--pop", type=int, default=None, help="population size")
    parser.add_argument("--iters", type=int, default=None, help="search iterations")
    parser.add_argument("--alpha", type=float, default=None, help="amplitude constant")
    parser.add_argument("--abhc-iters", type=int, default=None, help="refinement iterations")
    parser.add_argument("--abhc-p", type=float, default=None, help="flip-decay shape")
    parser.add_argument("--beta-min", type=float, default=None, help="initial reset probability")
    parser.add_argument("--beta-max", type=float, default=None, help="final reset probability")
    parser.add_argument("--lambda", dest="sparsity", type=float, default=None,
                        help="sparsity penalty weight")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leukopipe",
        description="blood-cell classification pipeline: preprocessing, coupled "
                    "feature extraction, graph reconstruction, metaheuristic "
                    "feature selection, and classification")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("preprocess", "ingest, enhance, resize, and balance the training split"),
        ("extract", "compute global and spatial features from preprocessed images"),
        ("graph", "reconstruct features over the similarity graph"),
        ("select", "search for an optimal feature mask"),
        ("train", "train the classifier on masked training features"),
        ("eval", "evaluate the trained classifier on the test split"),
        ("pipeline", "run every enabled stage end to end"),
        ("report", "print a summary of a finished run"),
    ]:
        p = sub.add_parser(name, help=helptext)
        if name == "report":
            p.add_argument("--out", required=True, help="output directory of the run")
            continue
        _common_flags(p)
        if name in ("select", "pipeline"):
            _selector_flags(p)
        if name in ("graph", "pipeline"):
            p.add_argument("--diagnostics", action="store_true",
                           help="dump per-node graph similarity CSVs")
    return parser


def _load_config(args) -> pl.PipelineConfig:
    config = pl.load_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.out is not None:
        config = replace(config, out_dir=args.out)
    overrides = {
        "pop": "sca_pop", "iters": "sca_iters", "alpha": "sca_alpha",
        "abhc_iters": "abhc_iters", "abhc_p": "abhc_shape",
        "beta_min": "abhc_beta_min", "beta_max": "abhc_beta_max",
        "sparsity": "sparsity_weight",
    }
    for attr, field_name in overrides.items():
        value = getattr(args, attr, None)
        if value is not None:
            config = replace(config, **{field_name: value})
    return config


def _features_or_ingest(config: pl.PipelineConfig, out: Path) -> pl.Splits:
    """Reconstructed features from the graph stage artifacts."""
    splits = pl.Splits()
    for name in pl.SPLIT_NAMES:
        path = out / f"reconstructed_{name}.csv"
        if not path.exists():
            raise ReportError(f"missing {path}; run the graph stage first")
        setattr(splits, name, pl.read_feature_rows(path))
    return splits


def _extracted_features(config: pl.PipelineConfig, out: Path) -> pl.Splits:
    if config.dataset_format == "feature-csv":
        return pl.ingest(config)
    splits = pl.Splits()
    for name in pl.SPLIT_NAMES:
        path = out / f"features_{name}.csv"
        if not path.exists():
            raise ReportError(f"missing {path}; run the extract stage first")
        setattr(splits, name, pl.read_feature_rows(path))
    return splits


def run_command(args) -> int:
    if args.command == "report":
        print(pl.report_text(args.out))
        return 0
    config = _load_config(args)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.command == "pipeline":
        artifacts = pl.run_pipeline(config, diagnostics=args.diagnostics)
        print(pl.report_text(artifacts.out_dir))
        return 0
    if args.command == "preprocess":
        if config.dataset_format != "image-dir":
            raise DataError("preprocess applies to image-dir datasets only")
        pl.stage_preprocess(pl.ingest(config), config, out)
        return 0
    if args.command == "extract":
        if config.dataset_format == "feature-csv":
            for name, samples in pl.ingest(config).named():
                pl.write_feature_csv(out / f"features_{name}.csv", samples)
        else:
            pl.stage_extract(pl.load_preprocessed(config, out), config, out)
        return 0
    if args.command == "graph":
        pl.stage_graph(_extracted_features(config, out), config, out,
                       diagnostics=args.diagnostics)
        return 0
    if args.command == "select":
        pl.stage_select(_features_or_ingest(config, out), config, out)
        return 0
    if args.command == "train":
        splits = _features_or_ingest(config, out)
        pl.stage_train(splits, pl.read_mask(out), config, out)
        return 0
    if args.command == "eval":
        splits = _features_or_ingest(config, out)
        mask = pl.read_mask(out)
        pl.stage_eval(splits, mask, pl.load_classifier(config, mask, out), config, out)
        return 0
    raise AssertionError(f"unhandled command {args.command}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run_command(args)
    except (StageError, ReportError, DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
