"""Command-line frontend: embed, classify, ringdemo, bench, convert.

Every run is reproducible from (config, seed); commands that write artifacts
also write a manifest listing the config digest, seed, and every output
file.  Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from datetime import datetime, timezone

import numpy as np

from . import transport
from .graphs import GraphDataset, load_json, parse_tud, save_json, write_tud
from .lot import (
    embedding_geodesic, embedding_mean, lot_embed, make_ring_dataset, pseudo_invert,
)
from .pipeline import (
    PipelineConfig, complexity_probe, export_csv, export_embedded, import_embedded,
    knn_cv_details, roc_auc, wegl_embed,
)
from .reference import normal_reference, reference_size
from .storage import write_csv

GEODESIC_ALPHAS = (0.0, 0.25, 0.5, 0.75, 1.0)


class UsageError(Exception):
    """Bad invocation, config, or missing input; maps to exit code 2."""


def _load_dataset(path: str) -> GraphDataset:
    if os.path.isdir(path):
        name = os.path.basename(os.path.normpath(path))
        return parse_tud(path, name)
    if os.path.isfile(path):
        if path.endswith(".json"):
            return load_json(path)
        raise UsageError(f"unsupported dataset file (expected .json or TUD directory): {path}")
    raise UsageError(f"dataset not found: {path}")


def _resolve_seed(flag_seed: int | None, config_data: dict) -> int:
    if flag_seed is not None:
        return flag_seed
    if "seed" in config_data:
        return int(config_data["seed"])
    env = os.environ.get("WEGL_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise UsageError(f"WEGL_SEED must be an integer, got {env!r}") from exc
    return 0


def _load_config(path: str | None, flag_seed: int | None, overrides: dict) -> PipelineConfig:
    data: dict = {}
    if path is not None:
        if not os.path.isfile(path):
            raise UsageError(f"config file not found: {path}")
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise UsageError(f"config is not valid JSON: {exc}") from exc
    data["seed"] = _resolve_seed(flag_seed, data)
    for key, value in overrides.items():
        if value is None:
            continue
        if key in ("num_layers", "pooling"):
            data.setdefault("diffusion", {})
            if not isinstance(data["diffusion"], dict):
                raise UsageError("config key 'diffusion' must be an object")
            data["diffusion"][key] = value
        else:
            data[key] = value
    try:
        return PipelineConfig.from_dict(data)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc


def _write_manifest(path: str, config: PipelineConfig | None, seed: int,
                    dataset_name: str, outputs: list[str], started: str,
                    solve_count: int | None = None) -> None:
    manifest = {
        "config_digest": None if config is None else config.digest(),
        "config": None if config is None else config.to_dict(),
        "seed": seed,
        "dataset": dataset_name,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "outputs": sorted(os.path.abspath(p) for p in outputs),
        "ot_solve_count": solve_count,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def cmd_embed(args) -> int:
    started = _now()
    config = _load_config(args.config, args.seed, {
        "num_layers": args.layers,
        "pooling": args.pooling,
        "reference_source": args.reference_source,
    })
    dataset = _load_dataset(args.dataset)
    embedded = wegl_embed(dataset, config, threads=args.threads)
    export_embedded(embedded, args.out)
    outputs = [args.out]
    if args.csv:
        export_csv(embedded, args.csv)
        outputs.append(args.csv)
    manifest_path = args.out + ".manifest.json"
    _write_manifest(manifest_path, config, config.seed, dataset.name,
                    outputs + [manifest_path], started, embedded.ot_solve_count)
    print(f"embedded {len(dataset)} graphs -> {args.out} "
          f"(vector length {embedded.vectors.shape[1]}, {embedded.ot_solve_count} OT solves)")
    return 0


def cmd_classify(args) -> int:
    if not os.path.isfile(args.embeddings):
        raise UsageError(f"embeddings file not found: {args.embeddings}")
    embedded = import_embedded(args.embeddings)
    if embedded.labels is None:
        raise UsageError("embedded dataset carries no labels")
    seed = args.seed if args.seed is not None else _resolve_seed(None, {})
    accuracies, _, scores = knn_cv_details(embedded, args.k, args.folds, seed)
    mean, std = float(accuracies.mean()), float(accuracies.std())
    print(f"accuracy: {100 * mean:.1f} ± {100 * std:.1f}")
    labels = np.asarray(embedded.labels)
    if len(np.unique(labels)) == 2:
        print(f"roc_auc: {roc_auc(scores, labels):.4f}")
    return 0


def cmd_ringdemo(args) -> int:
    started = _now()
    os.makedirs(args.out_dir, exist_ok=True)
    seed = args.seed if args.seed is not None else _resolve_seed(None, {})
    clouds = make_ring_dataset(args.m, args.noise, seed)
    reference = normal_reference(reference_size(clouds), 2, seed)
    embeddings = [lot_embed(c, reference) for c in clouds]

    outputs = []

    def emit(name: str, points: np.ndarray, extra_col=None):
        path = os.path.join(args.out_dir, name)
        if extra_col is None:
            write_csv(path, ["x", "y"], points)
        else:
            rows = [[c, *p] for c, p in zip(extra_col, points)]
            write_csv(path, ["cloud", "x", "y"], rows)
        outputs.append(path)

    all_points = np.vstack(clouds)
    cloud_ids = np.concatenate([np.full(len(c), i, dtype=np.int64) for i, c in enumerate(clouds)])
    emit("rings.csv", all_points, cloud_ids)
    emit("reference.csv", reference.points)
    emit("mean_cloud.csv", pseudo_invert(embedding_mean(embeddings), reference))
    second = embeddings[1] if len(embeddings) > 1 else embeddings[0]
    for alpha in GEODESIC_ALPHAS:
        frame = embedding_geodesic(embeddings[0], second, alpha)
        emit(f"geodesic_{alpha:.2f}.csv", pseudo_invert(frame, reference))

    manifest_path = os.path.join(args.out_dir, "manifest.json")
    _write_manifest(manifest_path, None, seed, f"rings(m={args.m}, noise={args.noise})",
                    outputs + [manifest_path], started)
    print(f"ring demo written to {args.out_dir} ({len(outputs)} point-cloud files)")
    return 0


def cmd_bench(args) -> int:
    started = _now()
    config = _load_config(args.config, args.seed, {})
    sizes = [int(tok) for tok in args.sizes.split(",") if tok]
    if not sizes:
        raise UsageError("--sizes must list at least one dataset size")
    rows = complexity_probe(sizes, config, num_nodes=args.num_nodes,
                            pairwise_limit=args.pairwise_limit, seed=config.seed,
                            csv_path=args.out)
    manifest_path = args.out + ".manifest.json"
    _write_manifest(manifest_path, config, config.seed, "synthetic",
                    [args.out, manifest_path], started)
    for r in rows:
        pairwise = "-" if r.pairwise_solves is None else str(r.pairwise_solves)
        print(f"M={r.num_graphs}: {r.wegl_solves} solves in {r.wegl_seconds:.3f}s "
              f"(pairwise solves: {pairwise})")
    return 0


def cmd_convert(args) -> int:
    if os.path.isdir(args.input):
        name = args.name or os.path.basename(os.path.normpath(args.input))
        dataset = parse_tud(args.input, name)
        save_json(dataset, args.output)
    elif os.path.isfile(args.input) and args.input.endswith(".json"):
        dataset = load_json(args.input)
        write_tud(dataset, args.output)
    else:
        raise UsageError(f"input must be a TUD directory or a .json file: {args.input}")
    print(f"converted {len(dataset)} graphs -> {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wegl",
        description="Fixed-size graph vectors from diffusion node embeddings "
                    "and a linear Wasserstein embedding.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", help="embed a dataset into fixed-size vectors")
    p.add_argument("dataset", help="TUD directory or .json dataset file")
    p.add_argument("--config", help="pipeline config JSON file")
    p.add_argument("--out", required=True, help="output embeddings file")
    p.add_argument("--csv", help="also export embeddings as CSV")
    p.add_argument("--seed", type=int)
    p.add_argument("--layers", type=int, dest="layers")
    p.add_argument("--pooling", choices=("concat", "average", "final"))
    p.add_argument("--reference-source", choices=("kmeans_all", "kmeans_train", "normal"))
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("classify", help="k-NN cross-validation on stored embeddings")
    p.add_argument("embeddings", help="embeddings file written by `wegl embed`")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("ringdemo", help="ring-distribution demo: mean and geodesics")
    p.add_argument("out_dir")
    p.add_argument("--m", type=int, default=10, help="number of ring clouds")
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_ringdemo)

    p = sub.add_parser("bench", help="solve-count and wall-time scaling probe")
    p.add_argument("--sizes", default="50,100,200", help="comma-separated dataset sizes")
    p.add_argument("--out", required=True, help="timing CSV path")
    p.add_argument("--config")
    p.add_argument("--num-nodes", type=int, default=16)
    p.add_argument("--pairwise-limit", type=int, default=64)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("convert", help="convert between TUD directories and JSON")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--name", help="dataset name (defaults to the directory name)")
    p.set_defaults(func=cmd_convert)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
