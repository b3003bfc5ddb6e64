"""Command line entry point: generate-data, train, evaluate, ablate, project, curve."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig
from .data import build_dataset, load_dataset, save_dataset
from .experiments import (
    DataConfig,
    dominant_grid,
    ensure_dataset,
    export_curve,
    load_grid,
    project_embeddings,
    run_grid,
    structure_grid,
    write_curve,
)
from .retrieval import build_index, evaluate_map
from .training import run_training, write_metrics


def _add_generate(sub):
    p = sub.add_parser("generate-data", help="render a synthetic paired-modality dataset")
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--train", type=int, default=500)
    p.add_argument("--val", type=int, default=100)
    p.add_argument("--test", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--image-size", type=int, default=64)
    p.add_argument("--audio-length", type=int, default=4096)
    p.add_argument("--out", required=True)


def _add_train(sub):
    p = sub.add_parser("train", help="run both training stages from a JSON config")
    p.add_argument("--config", required=True, help="JSON file mirroring TrainConfig")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="output directory for metrics and checkpoint")


def _add_evaluate(sub):
    p = sub.add_parser("evaluate", help="MAP of a trained checkpoint on the test split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--query", required=True, choices=("vision", "audio", "touch"))
    p.add_argument(
        "--space",
        required=True,
        choices=("vision", "audio", "touch", "fused"),
        help="'fused' uses the checkpoint's configured retrieval pair",
    )
    p.add_argument("--out", required=True, help="results CSV path")


def _add_ablate(sub):
    p = sub.add_parser("ablate", help="run an experiment grid and write report.csv")
    p.add_argument("--grid", help="JSON grid file (list of cell objects)")
    p.add_argument("--preset", choices=("structure", "dominant"), help="built-in grid shape")
    p.add_argument("--config", help="optional base TrainConfig JSON")
    p.add_argument("--data", required=True, help="dataset directory (generated if absent)")
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--train", type=int, default=500)
    p.add_argument("--val", type=int, default=100)
    p.add_argument("--test", type=int, default=100)
    p.add_argument("--image-size", type=int, default=64)
    p.add_argument("--audio-length", type=int, default=4096)
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--seed", type=int, default=0, help="cell seed for preset grids")
    p.add_argument("--out", required=True)


def _add_project(sub):
    p = sub.add_parser("project", help="2D projection of test-split embeddings")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--space", default="fused", help="modality name, 'fused', or 'a+b' pair")
    p.add_argument("--out", required=True)


def _add_curve(sub):
    p = sub.add_parser("curve", help="extract the stage-2 validation MAP curve")
    p.add_argument("--metrics", required=True)
    p.add_argument("--out", required=True)


def _resolve_space(arg: str, config: TrainConfig) -> tuple[str, ...]:
    if arg == "fused":
        return config.retrieval_modalities
    return tuple(arg.split("+"))


def _cmd_generate(args) -> int:
    splits = build_dataset(
        args.classes,
        (args.train, args.val, args.test),
        seed=args.seed,
        image_size=args.image_size,
        audio_length=args.audio_length,
    )
    save_dataset(splits, args.out)
    print(f"wrote {args.train + args.val + args.test} samples to {args.out}")
    return 0


def _cmd_train(args) -> int:
    config = TrainConfig.from_json(args.config)
    dataset = load_dataset(args.data)
    result = run_training(dataset, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics(result.history, out / "metrics.csv")
    save_checkpoint(result.model, out / "checkpoint")
    final = result.history[-1] if result.history else {}
    print(f"finished stage {result.model.stage}; last row: {final}")
    return 0


def _cmd_evaluate(args) -> int:
    model = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.data)
    space = _resolve_space(args.space, model.config)
    map_score, num_queries = evaluate_map(model, dataset.test, (args.query,), space)
    with open(args.out, "w", newline="") as fh:
        fh.write("query_modality,space,map,num_queries,seed\n")
        fh.write(f"{args.query},{args.space},{map_score:.10f},{num_queries},{model.config.seed}\n")
    print(f"MAP({args.query} -> {args.space}) = {map_score:.4f} over {num_queries} queries")
    return 0


def _cmd_ablate(args) -> int:
    if bool(args.grid) == bool(args.preset):
        print("ablate: provide exactly one of --grid or --preset", file=sys.stderr)
        return 2
    if args.grid:
        cells = load_grid(args.grid)
    else:
        cells = structure_grid(args.seed) if args.preset == "structure" else dominant_grid(args.seed)
    base = TrainConfig.from_json(args.config) if args.config else TrainConfig()
    data_config = DataConfig(
        num_classes=args.classes,
        train_count=args.train,
        val_count=args.val,
        test_count=args.test,
        image_size=args.image_size,
        audio_length=args.audio_length,
        seed=args.data_seed,
    )
    dataset = ensure_dataset(args.data, data_config)
    results = run_grid(cells, base, dataset, args.out)
    failed = [r for r in results if r.failed]
    for result in results:
        row = result.report_row()
        print(f"{row['query']} -> {row['space']} dom={row['dominant']} attn={row['attention']}: "
              f"{row['map'] or row['status']}")
    if failed:
        print(f"{len(failed)} of {len(results)} cells failed", file=sys.stderr)
        return 1
    return 0


def _cmd_project(args) -> int:
    model = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.data)
    space = _resolve_space(args.space, model.config)
    index = build_index(model, dataset.split(args.split), space)
    coords, labels = project_embeddings(index.vectors, index.labels)
    with open(args.out, "w", newline="") as fh:
        fh.write("x,y,label\n")
        for (x, y), label in zip(coords, labels):
            fh.write(f"{x:.8f},{y:.8f},{label}\n")
    print(f"wrote {len(labels)} projected points to {args.out}")
    return 0


def _cmd_curve(args) -> int:
    curve = export_curve(args.metrics)
    write_curve(curve, args.out)
    print(f"wrote {len(curve)} curve rows to {args.out}")
    return 0


_COMMANDS = {
    "generate-data": _cmd_generate,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "ablate": _cmd_ablate,
    "project": _cmd_project,
    "curve": _cmd_curve,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vatcmr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    _add_generate(sub)
    _add_train(sub)
    _add_evaluate(sub)
    _add_ablate(sub)
    _add_project(sub)
    _add_curve(sub)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
