"""Command line front end.

    biorec run      full repeated-split experiment, writes a results dir
    biorec search   architecture search only (first split), writes search.tsv
    biorec predict  classify images with a saved model bundle
    biorec report   summarize a results dir written by `run`

Exit codes: 0 success, 1 configuration problems, 2 unreadable or invalid
data/bundles, 3 training divergence.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import load_config
from .dataset import IMAGE_EXTENSIONS, make_split
from .errors import (BundleError, ConfigError, DatasetError,
                     TrainingDivergedError)
from .pipeline import (choose_architectures, load_bundle,
                       load_experiment_images, predict, run_experiment,
                       search_table_text, write_results)
from .seeds import derive_seed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="biorec",
        description="three-channel recognition pipeline (pixels / LBP / HOG "
                    "with PCA-reduced networks and decision fusion)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_experiment_flags(p):
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--preset", help="starting-point config "
                                        "(faces, objects, large)")
        p.add_argument("--data-dir", help="dataset root (one directory per "
                                          "category)")
        p.add_argument("--seed", type=int, help="root seed")
        p.add_argument("--splits", type=int, help="number of random splits")
        p.add_argument("--fusion", choices=("sum_rule", "fpt", "fnpt"),
                       help="decision fusion strategy")
        p.add_argument("--out", help="output directory "
                                     "(default: out_dir from the config)")

    run_p = sub.add_parser("run", help="run the full experiment")
    add_experiment_flags(run_p)
    run_p.set_defaults(func=cmd_run)

    search_p = sub.add_parser("search", help="architecture search only")
    add_experiment_flags(search_p)
    search_p.set_defaults(func=cmd_search)

    predict_p = sub.add_parser("predict", help="classify images")
    predict_p.add_argument("--model", required=True, help="model bundle path")
    predict_p.add_argument("inputs", nargs="+",
                           help="image files or directories")
    predict_p.set_defaults(func=cmd_predict)

    report_p = sub.add_parser("report", help="summarize a results directory")
    report_p.add_argument("results_dir")
    report_p.set_defaults(func=cmd_report)
    return parser


def _experiment_config(args):
    overrides = {}
    if args.data_dir is not None:
        overrides["data_dir"] = args.data_dir
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.splits is not None:
        overrides["n_splits"] = args.splits
    if args.fusion is not None:
        overrides["fusion"] = args.fusion
    if args.out is not None:
        overrides["out_dir"] = args.out
    return load_config(path=args.config, preset=args.preset,
                       overrides=overrides)


def cmd_run(args) -> int:
    cfg = _experiment_config(args)
    images = load_experiment_images(cfg)
    print(f"loaded {images.n_samples} images, "
          f"{images.n_categories} categories, "
          f"{images.height}x{images.width}")
    result = run_experiment(cfg, image_set=images, log=print)
    mean, std = result.aggregate["accuracy"]
    best = result.split_metrics[result.best_split].accuracy
    print(f"accuracy over {cfg.n_splits} splits: "
          f"mean {mean:.4f} (std {std:.4f}), best {best:.4f} "
          f"(split {result.best_split})")
    print(f"runtime: {result.runtime_seconds:.1f}s")
    paths = write_results(result, cfg.out_dir)
    for name, path in sorted(paths.items()):
        print(f"wrote {name}: {path}")
    return 0


def cmd_search(args) -> int:
    cfg = _experiment_config(args)
    if cfg.architecture.mode != "search":
        raise ConfigError("`biorec search` needs architecture.mode: search")
    images = load_experiment_images(cfg)
    plan = make_split(images, cfg.split, derive_seed(cfg.seed, "split", "0"))
    architectures, searches = choose_architectures(images, plan, cfg)
    for channel, (n_pcs, n_neurons), search in zip(cfg.channels,
                                                   architectures, searches):
        print(f"channel {channel.kind}: best {n_pcs} components, "
              f"{n_neurons} hidden units "
              f"(val accuracy {search.best_val_accuracy:.4f}, "
              f"{len(search.leaderboard)} points)")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    search_path = out / "search.tsv"
    search_path.write_text(search_table_text(cfg.channels, searches))
    print(f"wrote search: {search_path}")
    return 0


def _gather_inputs(inputs) -> list[Path]:
    files = []
    for item in inputs:
        path = Path(item)
        if path.is_dir():
            found = sorted(p for p in path.rglob("*")
                           if p.suffix.lower() in IMAGE_EXTENSIONS)
            if not found:
                raise DatasetError(f"no images under directory {path}")
            files.extend(found)
        elif path.is_file():
            files.append(path)
        else:
            raise DatasetError(f"no such file or directory: {path}")
    return files


def cmd_predict(args) -> int:
    bundle = load_bundle(args.model)
    files = _gather_inputs(args.inputs)
    for path, (name, scores) in zip(files, predict(bundle, files)):
        print(f"{path}\t{name}\t{scores.max():.4f}")
    return 0


def _read_metrics_table(path: Path):
    lines = path.read_text().splitlines()
    if not lines:
        raise DatasetError(f"{path} is empty")
    header = lines[0].split("\t")
    if header[:1] != ["split"]:
        raise DatasetError(f"{path} is not a metrics table")
    rows = [line.split("\t") for line in lines[1:] if line]
    return header[1:], rows


def cmd_report(args) -> int:
    results_dir = Path(args.results_dir)
    metrics_path = results_dir / "metrics.tsv"
    if not metrics_path.is_file():
        raise DatasetError(f"no metrics.tsv under {results_dir}")
    columns, rows = _read_metrics_table(metrics_path)

    bundle_path = results_dir / "model.biorec"
    if bundle_path.is_file():
        bundle = load_bundle(bundle_path)
        print(f"model: fusion {bundle.fusion}, "
              f"{len(bundle.category_names)} categories, "
              f"images {bundle.image_hw[0]}x{bundle.image_hw[1]}")
        for cm in bundle.channels:
            print(f"  {cm.channel.kind}: {cm.pca.n_components} components, "
                  f"{cm.net.n_hidden} hidden units")

    split_rows = [r for r in rows if r[0] not in ("mean", "std")]
    stat_rows = {r[0]: r[1:] for r in rows if r[0] in ("mean", "std")}
    print("per split:")
    named = dict(zip(columns, range(len(columns))))
    for row in split_rows:
        acc = float(row[1 + named["accuracy"]])
        f1 = float(row[1 + named["macro_f1"]])
        print(f"  {row[0]:>4}  accuracy {acc:.4f}  macro-F1 {f1:.4f}")
    if "mean" in stat_rows and "std" in stat_rows:
        print("aggregate (mean / std):")
        for i, name in enumerate(columns):
            mean = float(stat_rows["mean"][i])
            std = float(stat_rows["std"][i])
            print(f"  {name}: {mean:.4f} / {std:.4f}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"biorec: configuration error: {exc}", file=sys.stderr)
        return 1
    except (DatasetError, BundleError) as exc:
        print(f"biorec: data error: {exc}", file=sys.stderr)
        return 2
    except TrainingDivergedError as exc:
        print(f"biorec: training diverged: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
