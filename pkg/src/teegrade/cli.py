"""Command-line entry point: gen / train / eval / agreement / gradcheck.

Every command derives all randomness from a single --seed through named
streams, writes its outputs plus a run manifest into --out, and is
byte-for-byte reproducible for identical flags and seed (the manifest's
timestamp and duration fields aside). Worker threads for generation come
from the TEEGRADE_THREADS environment variable and never change results.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .engine import TrainConfig, train
from .errors import ConfigError, DataError, TeegradeError
from .figures import save_agreement_bars, save_loss_curve, save_scatter
from .gradcheck import run_gradcheck
from .metrics import (
    MetricsReport,
    accuracy,
    grouped_video_stats,
    icc,
    interval_rmse,
    krippendorff_alpha,
    pearson,
    rmse,
)
from .models import build_model, model_spec
from .synthdata import (
    DEFAULT_TRAIN_FRACTION,
    GenConfig,
    SCORE_SCALES,
    checklist_score,
    generate_dataset,
    load_frames,
    read_manifest,
    split_by_participant,
)

SEED_STREAMS = ("criteria", "raters", "frame", "dropout", "split", "init", "shuffle")


def _threads() -> int:
    raw = os.environ.get("TEEGRADE_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"TEEGRADE_THREADS must be an integer, got {raw!r}")
    if value < 1:
        raise ConfigError(f"TEEGRADE_THREADS must be >= 1, got {value}")
    return value


def _write_run_manifest(out_dir: Path, command: str, config: dict, seed, outputs, t0: float):
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "seed_streams": list(SEED_STREAMS),
        "tool_version": __version__,
        "outputs": sorted(str(p) for p in outputs),
        "duration_seconds": round(time.time() - t0, 3),
        "created_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    tmp = out_dir / "run_manifest.json.tmp"
    tmp.write_text(json.dumps(manifest, indent=2) + "\n")
    os.replace(tmp, out_dir / "run_manifest.json")


def _parse_image_size(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    try:
        if len(parts) == 1:
            n = int(parts[0])
            return (n, n)
        if len(parts) == 2:
            return (int(parts[0]), int(parts[1]))
    except ValueError:
        pass
    raise ConfigError(f"bad --image-size {text!r}; expected N or HxW")


def _cmd_gen(args) -> int:
    t0 = time.time()
    config = GenConfig(
        participants=args.participants,
        frames=args.frames,
        image_hw=_parse_image_size(args.image_size),
        flip_noise=args.flip_noise,
        gi_noise=args.gi_noise,
        missing_prob=args.missing_prob,
        seed=args.seed,
    )
    out = Path(args.out)
    records = generate_dataset(config, out, threads=_threads())
    n_frames = sum(len(r.frame_paths) for r in records)
    _write_run_manifest(
        out,
        "gen",
        {
            "participants": config.participants,
            "frames": config.frames,
            "image_hw": list(config.image_hw),
            "flip_noise": config.flip_noise,
            "gi_noise": config.gi_noise,
            "missing_prob": config.missing_prob,
        },
        config.seed,
        ["manifest.jsonl"],
        t0,
    )
    print(f"gen: {len(records)} videos, {n_frames} frames -> {out}")
    return 0


def _default_batch(arch: str) -> int:
    return 64 if arch.startswith("vgg") else 128


def _cmd_train(args) -> int:
    t0 = time.time()
    records = read_manifest(Path(args.data) / "manifest.jsonl")
    train_records, _ = split_by_participant(records, args.train_fraction, args.seed)
    frames = load_frames(args.data, train_records, target=args.target)
    h, w = frames.images.shape[2], frames.images.shape[3]
    spec = model_spec(args.arch, input_hw=(h, w))
    model = build_model(spec, seed=args.seed, score_scale=SCORE_SCALES[args.target])
    batch = args.batch if args.batch is not None else _default_batch(args.arch)
    config = TrainConfig(
        epochs=args.epochs,
        batch_size=batch,
        lr=args.lr,
        seed=args.seed,
        target=args.target,
        view_loss_weight=args.view_loss_weight,
    )
    _, history = train(model, frames, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metadata = {
        "arch": args.arch,
        "target": args.target,
        "seed": args.seed,
        "epochs": args.epochs,
        "batch_size": batch,
        "lr": args.lr,
        "view_loss_weight": args.view_loss_weight,
        "train_fraction": args.train_fraction,
    }
    save_checkpoint(out / "checkpoint.teeg", Checkpoint.from_model(model, metadata))
    _write_history(out / "history.csv", history)
    save_loss_curve(out / "loss_curve.svg", history, title=f"{args.arch} ({args.target})")
    _write_run_manifest(
        out, "train", metadata, args.seed,
        ["checkpoint.teeg", "history.csv", "loss_curve.svg"], t0,
    )
    final = history[-1].train_loss if history else float("nan")
    print(
        f"train: {args.arch} target={args.target} lr={args.lr} epochs={args.epochs} "
        f"batch={batch} final_loss={final:.6g} -> {out}"
    )
    return 0


def _write_history(path: Path, history) -> None:
    with_val = any(st.val_rmse is not None for st in history)
    lines = ["epoch,train_loss" + (",val_rmse" if with_val else "")]
    for st in history:
        row = f"{st.epoch},{st.train_loss!r}"
        if with_val:
            row += f",{st.val_rmse!r}" if st.val_rmse is not None else ","
        lines.append(row)
    path.write_text("\n".join(lines) + "\n")


def _forward_all(model, images, chunk: int = 256):
    scores, logits = [], []
    for start in range(0, images.shape[0], chunk):
        s, l = model.forward(images[start : start + chunk])
        scores.append(s)
        logits.append(l)
    return np.concatenate(scores), np.concatenate(logits)


def _cmd_eval(args) -> int:
    t0 = time.time()
    ckpt_path = Path(args.checkpoint)
    if not ckpt_path.exists():
        raise DataError(f"checkpoint not found: {ckpt_path}")
    ckpt = load_checkpoint(ckpt_path)
    model = ckpt.to_model()
    target = ckpt.metadata.get("target", "cp")
    seed = args.seed if args.seed is not None else ckpt.metadata.get("seed", 0)
    fraction = (
        args.train_fraction
        if args.train_fraction is not None
        else ckpt.metadata.get("train_fraction", DEFAULT_TRAIN_FRACTION)
    )
    records = read_manifest(Path(args.data) / "manifest.jsonl")
    train_records, test_records = split_by_participant(records, fraction, seed)
    chosen = train_records if args.split == "train" else test_records
    frames = load_frames(args.data, chosen, target=target)
    scores_norm, logits = _forward_all(model, frames.images)
    scale = model.score_scale
    preds = scores_norm * scale
    truths = frames.scores * scale
    by_video: dict[str, list[float]] = {}
    for vid, p in zip(frames.video_ids, preds):
        by_video.setdefault(vid, []).append(float(p))
    grouped = grouped_video_stats(
        {k: np.asarray(v) for k, v in by_video.items()}, frames.video_truth
    )
    report = MetricsReport(
        target=target,
        overall_rmse=rmse(preds, truths),
        interval_rmse=interval_rmse(preds, truths, metric=target),
        grouped_rmse=grouped.rmse,
        grouped_mean_sigma=grouped.mean_sigma,
        view_accuracy=accuracy(logits.argmax(axis=1), frames.views),
        pearson_cp_gi=pearson(
            [r.mean_cp for r in chosen], [r.mean_gi for r in chosen]
        ),
        extra={"split": args.split, "n_frames": len(frames), "n_videos": len(grouped.rows)},
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(report.to_json())
    lines = ["video_id,truth,mean_pred,sigma"]
    for vid, truth, mean_pred, sigma in grouped.rows:
        lines.append(f"{vid},{truth!r},{mean_pred!r},{sigma!r}")
    (out / "predictions.csv").write_text("\n".join(lines) + "\n")
    label = "CP (%)" if target == "cp" else "GI (0-4)"
    save_scatter(
        out / "scatter.svg", grouped.rows, label,
        title=f"{ckpt.metadata.get('arch', model.spec.architecture)}: per-video estimates",
    )
    _write_run_manifest(
        out, "eval",
        {
            "checkpoint": str(ckpt_path),
            "data": str(args.data),
            "split": args.split,
            "train_fraction": fraction,
            "target": target,
        },
        seed,
        ["metrics.json", "predictions.csv", "scatter.svg"],
        t0,
    )
    print(
        f"eval: {args.split} split, {len(frames)} frames / {len(grouped.rows)} videos, "
        f"rmse={report.overall_rmse:.3f} grouped={grouped.rmse:.3f} "
        f"acc={report.view_accuracy:.3f} -> {out}"
    )
    return 0


def _cmd_agreement(args) -> int:
    t0 = time.time()
    records = read_manifest(Path(args.data) / "manifest.jsonl")
    per_view = {}
    for view_id in sorted({r.view_id for r in records}):
        rows = [
            [checklist_score(bits) for bits in r.rater_criteria]
            for r in records
            if r.view_id == view_id
        ]
        if len(rows) < 2:
            continue
        icc21, icc2k = icc(rows)
        per_view[str(view_id)] = {
            "n_videos": len(rows),
            "icc2_1": icc21,
            "icc2_k": icc2k,
            "alpha": krippendorff_alpha(rows),
        }
    pooled_rows = [
        [checklist_score(bits) for bits in r.rater_criteria] for r in records
    ]
    icc21, icc2k = icc(pooled_rows)
    report = MetricsReport(
        pearson_cp_gi=pearson(
            [r.mean_cp for r in records], [r.mean_gi for r in records]
        ),
        per_view_agreement=per_view,
        pooled_agreement={
            "n_videos": len(pooled_rows),
            "icc2_1": icc21,
            "icc2_k": icc2k,
            "alpha": krippendorff_alpha(pooled_rows),
        },
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "agreement.json").write_text(report.to_json())
    save_agreement_bars(out / "agreement.svg", per_view)
    _write_run_manifest(
        out, "agreement", {"data": str(args.data)}, None,
        ["agreement.json", "agreement.svg"], t0,
    )
    print(
        f"agreement: {len(records)} videos, pooled ICC(2,k)={icc2k:.3f} "
        f"alpha={report.pooled_agreement['alpha']:.3f} -> {out}"
    )
    return 0


def _cmd_gradcheck(args) -> int:
    results = run_gradcheck(
        trials=args.trials, step=args.step, tolerance=args.tolerance, seed=args.seed
    )
    width = max(len(r.kernel) for r in results)
    print(f"{'kernel':<{width}}  trials  max_rel_err  result")
    ok = True
    for r in results:
        status = "pass" if r.passed else "FAIL"
        ok &= r.passed
        print(f"{r.kernel:<{width}}  {r.trials:>6}  {r.max_rel_err:>11.3e}  {status}")
    return 0 if ok else 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="teegrade",
        description="Synthetic exam-image grading: data generation, CNN training, evaluation.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic dataset")
    gen.add_argument("--out", required=True)
    gen.add_argument("--participants", type=int, default=38)
    gen.add_argument("--frames", type=int, default=8)
    gen.add_argument("--image-size", default="64")
    gen.add_argument("--flip-noise", type=float, default=0.07)
    gen.add_argument("--gi-noise", type=float, default=0.35)
    gen.add_argument("--missing-prob", type=float, default=0.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.set_defaults(func=_cmd_gen)

    tr = sub.add_parser("train", help="train a model on a generated dataset")
    tr.add_argument("--data", required=True)
    tr.add_argument("--out", required=True)
    tr.add_argument(
        "--arch",
        default="alexnet-mini",
        choices=["alexnet-mini", "vgg-mini", "alexnet-full", "vgg-full"],
    )
    tr.add_argument("--target", default="cp", choices=["cp", "gi"])
    tr.add_argument("--epochs", type=int, default=10)
    tr.add_argument("--batch", type=int, default=None, help="default: 128 alexnet / 64 vgg")
    tr.add_argument("--lr", type=float, default=0.001)
    tr.add_argument(
        "--lambda", dest="view_loss_weight", type=float, default=0.1,
        help="view-classification loss weight",
    )
    tr.add_argument("--train-fraction", type=float, default=DEFAULT_TRAIN_FRACTION)
    tr.add_argument("--seed", type=int, default=0)
    tr.set_defaults(func=_cmd_train)

    ev = sub.add_parser("eval", help="evaluate a checkpoint")
    ev.add_argument("--data", required=True)
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--out", required=True)
    ev.add_argument("--split", default="test", choices=["test", "train"])
    ev.add_argument("--seed", type=int, default=None, help="default: from checkpoint")
    ev.add_argument("--train-fraction", type=float, default=None)
    ev.set_defaults(func=_cmd_eval)

    ag = sub.add_parser("agreement", help="inter-rater agreement report")
    ag.add_argument("--data", required=True)
    ag.add_argument("--out", required=True)
    ag.set_defaults(func=_cmd_agreement)

    gc = sub.add_parser("gradcheck", help="finite-difference check of all kernels")
    gc.add_argument("--trials", type=int, default=100)
    gc.add_argument("--step", type=float, default=1e-5)
    gc.add_argument("--tolerance", type=float, default=1e-4)
    gc.add_argument("--seed", type=int, default=0)
    gc.set_defaults(func=_cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TeegradeError as err:
        print(f"teegrade {args.command}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
