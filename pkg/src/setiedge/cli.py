"""Command-line entry point: ``setiedge <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .imgproc import ARMS
from .nn import CheckpointError
from .pipeline import stages
from .pipeline.config import ConfigError, HashMismatch, RunConfig

EXPECTED_ERRORS = (ConfigError, HashMismatch, CheckpointError, stages.TrainingError,
                   FileNotFoundError, ValueError, OSError, FloatingPointError)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run config (merged over the bundled desk defaults)")
    p.add_argument("--seed", type=int, help="override every seed in the config (unsigned 64-bit)")
    p.add_argument("--arm", choices=ARMS, help="preprocessing arm (default: config value)")
    p.add_argument("--out", help="output directory for runs and reports (overrides paths.out_dir)")
    p.add_argument("--data", help="dataset directory (overrides paths.data_dir)")
    p.add_argument("--workers", type=int, default=1, help="processes for per-sample stages")
    p.add_argument("--format", choices=("text", "json"), default="text", help="stdout report format")
    p.add_argument("-q", "--quiet", action="store_true", help="only warnings on stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="setiedge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("generate", "simulate the dataset and write the manifest"),
                       ("render", "render spectrogram images"),
                       ("preprocess", "apply smoothing, edge enhancement and resizing"),
                       ("train", "train MiniDense on one round"),
                       ("evaluate", "score a checkpoint on a split"),
                       ("compare", "train and test every preprocessing arm"),
                       ("run", "generate, render, preprocess, train and evaluate one arm"),
                       ("metrics-from-cm", "metrics from a confusion-matrix file")):
        p = sub.add_parser(name, help=text, description=text)
        _common(p)
        if name == "render":
            p.add_argument("--png", action="store_true", help="also write a PNG per sample")
        if name in ("train", "evaluate", "run"):
            p.add_argument("--round", type=int, dest="round_index", help="fold held out")
        if name == "train":
            p.add_argument("--resume", action="store_true", help="continue from state.ckpt")
            p.add_argument("--stop-after", type=int, help="stop after this epoch (resumable)")
        if name == "evaluate":
            p.add_argument("--checkpoint", help="checkpoint path (default: the run's model.ckpt)")
            p.add_argument("--split", choices=("train", "val", "test"), default="test")
        if name == "metrics-from-cm":
            p.add_argument("matrix", help="7x7 integer matrix, whitespace or comma separated")
    return parser


def _emit(args, report) -> None:
    if args.format == "json":
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        print(report.to_text(), end="")


def _run(args) -> int:
    if args.command == "metrics-from-cm":
        report = stages.cmd_metrics_from_cm(args.matrix)
        if args.out:
            stages.write_report(report, args.out, "metrics")
        _emit(args, report)
        return 0

    cfg = RunConfig.load(args.config, seed=args.seed).with_paths(args.data, args.out)
    arm = args.arm or cfg.arm
    if args.command == "generate":
        manifest = stages.cmd_generate(cfg, args.workers)
        print(f"manifest\t{cfg.data_dir / 'manifest.json'}\t{len(manifest['entries'])} entries"
              f"\tdata hash {manifest['data_hash']}")
        return 0
    if args.command == "run":
        stages.cmd_generate(cfg, args.workers)
    manifest = stages.load_manifest(cfg)
    if args.command in ("render", "run"):
        paths = stages.cmd_render(cfg, manifest, args.workers, getattr(args, "png", False))
        print(f"images\t{len(paths)}\tgallery {cfg.out_dir / 'figures' / 'gallery.png'}")
    if args.command in ("preprocess", "run"):
        stages.cmd_preprocess(cfg, manifest, arm, args.workers)
        print(f"preprocessed\t{arm}\t{cfg.data_dir / 'pre' / arm}")
    if args.command in ("train", "run"):
        res = stages.cmd_train(cfg, manifest, arm, args.round_index,
                               resume=getattr(args, "resume", False),
                               stop_after=getattr(args, "stop_after", None))
        state = "finished" if res.finished else "stopped"
        print(f"checkpoint\t{res.checkpoint}\tbest epoch {res.best_epoch}"
              f"\tval accuracy {res.best_val_accuracy:.4f}\t{state} after epoch {res.epochs_completed}")
    if args.command in ("evaluate", "run"):
        report = stages.cmd_evaluate(cfg, manifest, getattr(args, "checkpoint", None),
                                     getattr(args, "split", "test"), arm, args.round_index)
        _emit(args, report)
    if args.command == "compare":
        table = stages.cmd_compare(cfg, manifest, workers=args.workers)
        if args.format == "json":
            print(json.dumps(table, indent=2, sort_keys=True))
        else:
            print(stages.compare_text(table), end="")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return _run(args)
    except EXPECTED_ERRORS as exc:
        print(f"setiedge: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
