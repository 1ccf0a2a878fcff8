"""Command-line pipeline: synthesize data, train, segment, evaluate.

Four subcommands cover the workflow end to end::

    totseg synth OUT [options]          write a synthetic dataset
    totseg train DATA [options]         train one model per activity
    totseg segment DATA [options]       decode label files per video
    totseg eval DATA [options]          Hungarian matching + MOF / F1

Exit codes: 0 success, 1 usage problem, 2 data problem, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any

import numpy as np

from . import config as cfg
from . import dataio, decode, encoder, evaluate, losses, trainer, transport
from .errors import DataError, NumericalError, UsageError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

CHECKPOINT_NAME = "checkpoint.totc"
LOG_NAME = "train.log"


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so main() owns exit codes."""

    def error(self, message: str):
        raise UsageError(message)


def _add_registry_flags(parser: argparse.ArgumentParser, registry) -> None:
    parser.add_argument("--config", help="key = value config file")
    for option in registry:
        flag = f"--{option.name}"
        kwargs: dict[str, Any] = {"dest": option.name, "default": None, "help": option.help}
        if option.kind == "int":
            kwargs["type"] = int
        elif option.kind == "float":
            kwargs["type"] = float
        elif option.kind == "bool":
            kwargs["action"] = argparse.BooleanOptionalAction
        elif option.kind == "int_list":
            kwargs["type"] = int
            kwargs["nargs"] = "*"
        if option.choices:
            kwargs["choices"] = option.choices
        parser.add_argument(flag, **kwargs)


def _resolve(args: argparse.Namespace, registry) -> dict[str, Any]:
    flag_values = {option.name: getattr(args, option.name) for option in registry}
    values, provenance = cfg.resolve(registry, flag_values, args.config)
    print(cfg.describe(values, provenance))
    return values


def build_parser() -> _Parser:
    parser = _Parser(prog="totseg", description=__doc__.splitlines()[0])
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="generate a synthetic dataset")
    synth.add_argument("out", help="dataset root to create")
    _add_registry_flags(synth, cfg.SYNTH_OPTIONS)
    synth.set_defaults(func=cmd_synth)

    train = commands.add_parser("train", help="train one model per activity")
    train.add_argument("data", help="dataset root")
    _add_registry_flags(train, cfg.TRAIN_OPTIONS)
    train.set_defaults(func=cmd_train)

    segment = commands.add_parser("segment", help="decode per-video label files")
    segment.add_argument("data", help="dataset root")
    _add_registry_flags(segment, cfg.SEGMENT_OPTIONS)
    segment.set_defaults(func=cmd_segment)

    evaluation = commands.add_parser("eval", help="score predictions against ground truth")
    evaluation.add_argument("data", help="dataset root")
    _add_registry_flags(evaluation, cfg.EVAL_OPTIONS)
    evaluation.set_defaults(func=cmd_eval)
    return parser


def _activities(root: Path, requested: str | None) -> list[str]:
    if requested:
        names = [name.strip() for name in requested.split(",") if name.strip()]
        for name in names:
            if not (root / name / "features").is_dir():
                raise DataError(f"activity {name!r} not found under {root}")
        return names
    found = sorted(
        path.parent.name for path in root.glob("*/features") if path.is_dir()
    )
    if not found:
        raise DataError(f"no activities (subdirectories with features/) under {root}")
    return found


def cmd_synth(args: argparse.Namespace) -> int:
    values = _resolve(args, cfg.SYNTH_OPTIONS)
    try:
        spec = dataio.SyntheticSpec(
            num_videos=values["videos"],
            num_actions=values["k"],
            dim=values["dim"],
            mean_segment_len=values["segment-len"],
            len_jitter=values["len-jitter"],
            cluster_separation=values["separation"],
            noise_sigma=values["noise"],
            permute_prob=values["permute-prob"],
            drop_prob=values["drop-prob"],
            seed=values["seed"],
        )
    except ValueError as err:
        raise UsageError(str(err)) from None
    catalog = dataio.generate_synthetic(spec)
    catalog.activity = values["activity"]
    base = dataio.write_catalog(catalog, args.out)
    print(
        f"wrote {len(catalog.videos)} videos, {catalog.total_frames} frames to {base}"
    )
    return EXIT_OK


def _train_config(values: dict[str, Any]) -> trainer.TrainConfig:
    try:
        return trainer.TrainConfig(
            mode=values["mode"],
            epochs=values["epochs"],
            iterations=values["iterations"],
            batch_size=values["batch"],
            videos_per_batch=values["videos-per-batch"],
            freeze_iterations=values["freeze-iters"],
            seed=values["seed"],
            embed_dim=values["embed-dim"],
            hidden_dim=values["hidden-dim"],
            learning_rate=values["lr"],
            weight_decay=values["wd"],
            normalize=values["normalize"],
            prior_scope=values["prior-scope"],
            loss=losses.LossConfig(
                temperature=values["tau"],
                alpha=values["alpha"],
                window=values["lambda"],
                renormalize_codes=values["renormalize-q"],
            ),
            transport=transport.TransportConfig(
                epsilon=values["epsilon"],
                rho=values["rho"],
                sigma=values["sigma"],
                iterations=values["sinkhorn-iters"],
                marginal_tolerance=values["marginal-tol"],
            ),
        )
    except ValueError as err:
        raise UsageError(str(err)) from None


def _train_one_activity(
    data: str, activity: str, values: dict[str, Any], out: str
) -> str:
    """Train one activity and write its checkpoint and log; returns a summary."""
    run_config = _train_config(values)
    catalog = dataio.load_catalog(
        data, activity, split_background=values["split-background"]
    )
    out_dir = Path(out) / activity
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / LOG_NAME, "w") as log_stream:
        result = trainer.train(catalog, run_config, log_stream=log_stream)
    encoder.save_checkpoint(
        result.params,
        result.state,
        out_dir / CHECKPOINT_NAME,
        temperature=values["tau"],
        normalized=values["normalize"],
    )
    last = result.records[-1]
    return (
        f"{activity}: {len(result.records)} iterations in "
        f"{result.elapsed_seconds:.1f}s, final L={last.total_loss:.4f} "
        f"(L_CE={last.clustering_loss:.4f}, L_TC={last.coherence_loss:.4f}), "
        f"peak batch matrix {result.ledger.max_dimension()} rows"
    )


def cmd_train(args: argparse.Namespace) -> int:
    values = _resolve(args, cfg.TRAIN_OPTIONS)
    root = Path(args.data)
    if not root.is_dir():
        raise UsageError(f"dataset path does not exist: {root}")
    activities = _activities(root, values["activity"])
    workers = values["parallel-activities"]
    if workers < 1:
        raise UsageError(f"parallel-activities must be >= 1, got {workers}")
    if workers > 1 and len(activities) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            jobs = [
                pool.submit(_train_one_activity, args.data, name, values, values["out"])
                for name in activities
            ]
            for job in jobs:
                print(job.result())
    else:
        for name in activities:
            print(_train_one_activity(args.data, name, values, values["out"]))
    return EXIT_OK


def cmd_segment(args: argparse.Namespace) -> int:
    values = _resolve(args, cfg.SEGMENT_OPTIONS)
    root = Path(args.data)
    if not root.is_dir():
        raise UsageError(f"dataset path does not exist: {root}")
    activities = _activities(root, values["activity"])
    for activity in activities:
        checkpoint_path = Path(values["checkpoints"]) / activity / CHECKPOINT_NAME
        if not checkpoint_path.is_file():
            raise DataError(f"no checkpoint for activity {activity!r} at {checkpoint_path}")
        params, _, meta = encoder.load_checkpoint(checkpoint_path)
        catalog = dataio.load_catalog(root, activity)
        if catalog.dim != params.dims[0]:
            raise DataError(
                f"checkpoint {checkpoint_path} expects {params.dims[0]}-dim features, "
                f"dataset {activity!r} has {catalog.dim}"
            )
        out_dir = Path(values["out"]) / activity
        out_dir.mkdir(parents=True, exist_ok=True)
        for video_id, probs in trainer.embed_dataset(
            params,
            catalog,
            temperature=meta["temperature"],
            chunk_size=values["chunk-size"],
            normalize=meta["normalized"],
        ):
            result = decode.viterbi_fixed_order(decode.log_probabilities(probs))
            labels_path = out_dir / f"{video_id}.txt"
            labels_path.write_text(
                "\n".join(str(int(label)) for label in result.labels) + "\n"
            )
            if values["timeline"]:
                lines = [f"{c},{s},{e}" for c, s, e in result.segments]
                (out_dir / f"{video_id}.timeline.csv").write_text(
                    "\n".join(lines) + "\n"
                )
        print(f"{activity}: wrote {len(catalog.videos)} label files to {out_dir}")
    return EXIT_OK


def _read_predictions(path: Path) -> np.ndarray:
    try:
        lines = path.read_text().splitlines()
    except FileNotFoundError:
        raise DataError(f"missing prediction file: {path}") from None
    try:
        return np.asarray([int(line) for line in lines if line.strip()], dtype=np.int64)
    except ValueError:
        raise DataError(f"{path}: prediction lines must be integer cluster ids") from None


def cmd_eval(args: argparse.Namespace) -> int:
    values = _resolve(args, cfg.EVAL_OPTIONS)
    root = Path(args.data)
    if not root.is_dir():
        raise UsageError(f"dataset path does not exist: {root}")
    activities = _activities(root, values["activity"])
    report_lines: list[str] = []
    mofs: list[float] = []
    f1s: list[float] = []
    for activity in activities:
        catalog = dataio.load_catalog(
            root, activity, split_background=values["split-background"]
        )
        video_ids, predictions, ground_truth = [], [], []
        for video in catalog.videos:
            pred = _read_predictions(Path(values["pred"]) / activity / f"{video.video_id}.txt")
            gt = catalog.video_labels(video)
            if pred.size != gt.size:
                raise DataError(
                    f"video {video.video_id}: {pred.size} predicted frames "
                    f"vs {gt.size} ground-truth frames"
                )
            video_ids.append(video.video_id)
            predictions.append(pred)
            ground_truth.append(gt)
        num_clusters = max(int(p.max()) for p in predictions if p.size) + 1
        report = evaluate.evaluate_activity(
            video_ids,
            predictions,
            ground_truth,
            num_clusters=num_clusters,
            num_actions=catalog.num_actions,
            activity=activity,
            exclude=set(values["exclude-background"]),
            overlap=values["overlap"],
        )
        print(report.to_text(), end="")
        report_lines.append(report.to_text())
        mofs.append(report.mof)
        f1s.append(report.f1)
    summary = (
        f"dataset_mof = {float(np.mean(mofs)):.4f}\n"
        f"dataset_f1 = {float(np.mean(f1s)):.4f}\n"
    )
    print(summary, end="")
    if values["out"]:
        out_path = Path(values["out"])
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text("".join(report_lines) + summary)
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
