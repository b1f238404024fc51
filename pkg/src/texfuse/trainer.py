"""Training loop, learning-rate schedule, evaluation and report writing.

Optimization is plain momentum SGD with decoupled weight decay and a
per-step cosine learning-rate schedule.  Every step appends one JSON line
to the training log; every epoch appends a summary line (with validation
AUC when a validation set is given).  All randomness is derived from the
config seed, so identical configs produce byte-identical logs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .config import EVAL_MASK_MODES, TrainConfig, parse_pair
from .errors import ConfigError, DegenerateInputError, ManifestError, ScheduleError
from .metrics import auc, roc_points
from .model import FusionModel, build_model, load_checkpoint, save_checkpoint
from .objectives import cross_entropy, joint_loss, loss_report, masked_mse
from .synth import ClipRecord, read_clip, read_manifest
from .texture import descriptor_array
from .video import mask_for_clip_ids, sample_tube_mask

_EVAL_BATCH = 32


def cosine_lr(step: int, total_steps: int, lr_start: float, lr_min: float) -> float:
    """Cosine learning rate at a given optimizer step (no warmup).

    step 0 gives lr_start; step == total_steps gives lr_min.
    """
    if total_steps < 1:
        raise ScheduleError(f"total_steps must be >= 1, got {total_steps}")
    if not 0 <= step <= total_steps:
        raise ScheduleError(f"step {step} outside [0, {total_steps}]")
    return lr_min + 0.5 * (lr_start - lr_min) * (1.0 + math.cos(math.pi * step / total_steps))


@dataclass
class ClipSet:
    """An in-memory dataset: clip array plus per-clip metadata."""

    ids: list[str]
    clips: np.ndarray  # (N, T, C, H, W)
    labels: np.ndarray  # (N,)
    domains: list[str] = field(default_factory=list)

    def __post_init__(self):
        n = len(self.ids)
        if self.clips.shape[0] != n or self.labels.shape[0] != n:
            raise ManifestError(
                f"inconsistent clip set: {n} ids, {self.clips.shape[0]} clips, "
                f"{self.labels.shape[0]} labels"
            )
        if not self.domains:
            self.domains = ["unknown"] * n

    def __len__(self) -> int:
        return len(self.ids)


def load_clipset(manifest_path) -> ClipSet:
    """Read every clip referenced by a manifest into one array."""
    manifest_path = Path(manifest_path)
    records = read_manifest(manifest_path)
    clips, ids, labels, domains = [], [], [], []
    for record in records:
        clip_path = manifest_path.parent / record.path
        clip = read_clip(clip_path, clip_id=record.id)
        clips.append(clip.data[0])
        ids.append(record.id)
        labels.append(record.label)
        domains.append(record.domain)
    shapes = {c.shape for c in clips}
    if len(shapes) != 1:
        raise ManifestError(f"clips have inconsistent shapes: {sorted(shapes)}")
    return ClipSet(
        ids=ids,
        clips=np.stack(clips),
        labels=np.asarray(labels, dtype=np.int64),
        domains=domains,
    )


def _check_geometry(config: TrainConfig, clips: np.ndarray) -> None:
    expected = (config.frames, config.channels, config.height, config.width)
    if tuple(clips.shape[1:]) != expected:
        raise ConfigError(
            f"config geometry {expected} does not match stored clips "
            f"{tuple(clips.shape[1:])}"
        )


def _modality_cache(config: TrainConfig, clips: np.ndarray) -> dict[str, np.ndarray]:
    """Precompute the descriptor videos needed by the configured pair."""
    input_mod, target_mod = parse_pair(config.modality_pair)
    cache = {"RGB": clips}
    for mod in {input_mod, target_mod}:
        if mod not in cache:
            cache[mod] = descriptor_array(clips, mod.lower())
    return cache


def _sgd_step(model: FusionModel, velocity: dict, lr: float, momentum: float,
              weight_decay: float) -> None:
    """Momentum SGD with weight decay decoupled from the gradient."""
    with torch.no_grad():
        for name, param in model.named_parameters():
            if param.grad is None:
                continue
            v = velocity[name]
            v.mul_(momentum).add_(param.grad)
            param.mul_(1.0 - lr * weight_decay)
            param.add_(v, alpha=-lr)


def _step_seed(seed: int, global_step: int) -> int:
    return seed * 1_000_003 + global_step


def fit_model(
    config: TrainConfig,
    train_set: ClipSet,
    val_set: ClipSet | None = None,
    log_path=None,
) -> tuple[FusionModel, list[dict]]:
    """Train a model from scratch; returns (model, log records)."""
    _check_geometry(config, train_set.clips)
    if val_set is not None:
        _check_geometry(config, val_set.clips)
    geometry = config.geometry()
    model = build_model(config)
    np_dtype = np.float64 if config.dtype == "float64" else np.float32
    cache = _modality_cache(config, train_set.clips.astype(np_dtype))
    input_mod, target_mod = parse_pair(config.modality_pair)

    n = len(train_set)
    steps_per_epoch = math.ceil(n / config.batch_size)
    total_steps = config.epochs * steps_per_epoch
    velocity = {
        name: torch.zeros_like(p) for name, p in model.named_parameters()
    }
    records: list[dict] = []
    log_file = open(log_path, "w") if log_path is not None else None

    def emit(record: dict) -> None:
        records.append(record)
        if log_file is not None:
            log_file.write(json.dumps(record) + "\n")

    try:
        global_step = 0
        for epoch in range(config.epochs):
            order = np.random.default_rng([config.seed, 1, epoch]).permutation(n)
            epoch_losses = []
            model.train()
            for b in range(steps_per_epoch):
                idx = order[b * config.batch_size : (b + 1) * config.batch_size]
                mask = sample_tube_mask(
                    geometry, config.mask_ratio,
                    seed=_step_seed(config.seed, global_step),
                    batch_size=len(idx),
                )
                logits, pred, targets = model.forward_train(
                    cache["RGB"][idx], mask,
                    aux_clip=cache[input_mod][idx],
                    target_clip=cache[target_mod][idx],
                )
                l_cls = cross_entropy(logits, train_set.labels[idx])
                l_rec = masked_mse(pred, targets, mask, norm=config.rec_norm)
                total = joint_loss(l_cls, l_rec, config.loss_lambda)
                model.zero_grad(set_to_none=True)
                total.backward()
                lr = cosine_lr(global_step, total_steps, config.lr_start, config.lr_min)
                _sgd_step(model, velocity, lr, config.momentum, config.weight_decay)
                report = loss_report(
                    l_cls.detach(), l_rec.detach(), config.loss_lambda
                )
                step_record = {
                    "kind": "step", "step": global_step, "epoch": epoch, "lr": lr,
                }
                step_record.update(report.to_record())
                emit(step_record)
                epoch_losses.append(report)
                global_step += 1
            epoch_record = {
                "kind": "epoch",
                "epoch": epoch,
                "l_cls": float(np.mean([r.l_cls for r in epoch_losses])),
                "l_rec": float(np.mean([r.l_rec for r in epoch_losses])),
                "l_total": float(np.mean([r.l_total for r in epoch_losses])),
                "lambda": config.loss_lambda,
            }
            if val_set is not None:
                val = evaluate_clipset(model, config, val_set)
                epoch_record["val_auc"] = val.auc
                epoch_record["val_l_rec"] = val.mean_l_rec
            emit(epoch_record)
    finally:
        if log_file is not None:
            log_file.close()
    return model, records


def train(
    config: TrainConfig,
    train_manifest,
    out_dir,
    val_manifest=None,
) -> Path:
    """Train from manifests and write log + checkpoint; returns checkpoint path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_set = load_clipset(train_manifest)
    val_set = load_clipset(val_manifest) if val_manifest else None
    model, _ = fit_model(
        config, train_set, val_set, log_path=out_dir / "train_log.jsonl"
    )
    checkpoint = out_dir / "checkpoint.npz"
    save_checkpoint(checkpoint, model, config)
    return checkpoint


@dataclass
class PartitionResult:
    """Metrics over one subset of the evaluation clips."""

    n_clips: int
    auc: float | None
    roc: list[tuple[float, float]] | None
    degenerate: str | None = None


@dataclass
class EvalResult:
    """Scores and ranking metrics for one evaluation run."""

    ids: list[str]
    labels: np.ndarray
    domains: list[str]
    scores: np.ndarray
    eval_mask_mode: str
    overall: PartitionResult
    partitions: dict[str, PartitionResult]
    mean_l_rec: float | None

    @property
    def auc(self) -> float | None:
        return self.overall.auc


def _partition_metrics(scores: np.ndarray, labels: np.ndarray) -> PartitionResult:
    try:
        return PartitionResult(
            n_clips=len(scores),
            auc=float(auc(scores, labels)),
            roc=roc_points(scores, labels),
        )
    except DegenerateInputError:
        return PartitionResult(
            n_clips=len(scores), auc=None, roc=None, degenerate="single-class"
        )


def evaluate_clipset(
    model: FusionModel,
    config: TrainConfig,
    clip_set: ClipSet,
    eval_mask_mode: str | None = None,
) -> EvalResult:
    """Score every clip and compute AUC/ROC overall and per domain."""
    mode = eval_mask_mode or config.eval_mask_mode
    if mode not in EVAL_MASK_MODES:
        raise ConfigError(f"eval_mask_mode must be one of {EVAL_MASK_MODES}, got {mode!r}")
    _check_geometry(config, clip_set.clips)
    geometry = config.geometry()
    np_dtype = np.float64 if config.dtype == "float64" else np.float32
    cache = _modality_cache(config, clip_set.clips.astype(np_dtype))
    input_mod, target_mod = parse_pair(config.modality_pair)
    ratio = config.mask_ratio if mode == "training-ratio-deterministic" else 0.0

    model.eval()
    scores = np.zeros(len(clip_set), dtype=np.float64)
    rec_losses = []
    with torch.no_grad():
        for start in range(0, len(clip_set), _EVAL_BATCH):
            sl = slice(start, min(start + _EVAL_BATCH, len(clip_set)))
            ids = clip_set.ids[sl]
            mask = mask_for_clip_ids(geometry, ratio, ids)
            logits, pred, targets = model.forward_train(
                cache["RGB"][sl], mask,
                aux_clip=cache[input_mod][sl],
                target_clip=cache[target_mod][sl],
            )
            scores[sl] = torch.softmax(logits, dim=1)[:, 1].cpu().numpy()
            if mask.n_masked > 0:
                rec = masked_mse(pred, targets, mask, norm=config.rec_norm)
                rec_losses.append((float(rec), len(ids)))

    labels = clip_set.labels
    partitions = {}
    for domain in sorted(set(clip_set.domains)):
        sel = np.asarray([d == domain for d in clip_set.domains])
        partitions[domain] = _partition_metrics(scores[sel], labels[sel])
    mean_l_rec = None
    if rec_losses:
        total = sum(v * n for v, n in rec_losses)
        mean_l_rec = total / sum(n for _, n in rec_losses)
    return EvalResult(
        ids=list(clip_set.ids),
        labels=labels,
        domains=list(clip_set.domains),
        scores=scores,
        eval_mask_mode=mode,
        overall=_partition_metrics(scores, labels),
        partitions=partitions,
        mean_l_rec=mean_l_rec,
    )


def write_report(result: EvalResult, report_dir) -> Path:
    """Write scores.jsonl and summary.json for an evaluation run."""
    report_dir = Path(report_dir)
    report_dir.mkdir(parents=True, exist_ok=True)
    with open(report_dir / "scores.jsonl", "w") as fh:
        for cid, domain, label, score in zip(
            result.ids, result.domains, result.labels, result.scores
        ):
            fh.write(json.dumps({
                "id": cid, "domain": domain, "label": int(label),
                "score": float(score),
            }) + "\n")

    def partition_dict(p: PartitionResult) -> dict:
        return {
            "n_clips": p.n_clips,
            "auc": p.auc,
            "degenerate": p.degenerate,
            "roc": [[float(x), float(y)] for x, y in p.roc] if p.roc else None,
        }

    summary = {
        "eval_mask_mode": result.eval_mask_mode,
        "n_clips": len(result.ids),
        "mean_l_rec": result.mean_l_rec,
        "overall": partition_dict(result.overall),
        "partitions": {
            name: partition_dict(p) for name, p in result.partitions.items()
        },
    }
    (report_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return report_dir / "summary.json"


def evaluate(
    checkpoint_path,
    manifest_path,
    report_dir=None,
    eval_mask_mode: str | None = None,
) -> EvalResult:
    """Evaluate a stored checkpoint against a manifest."""
    model, config = load_checkpoint(checkpoint_path)
    clip_set = load_clipset(manifest_path)
    result = evaluate_clipset(model, config, clip_set, eval_mask_mode)
    if report_dir is not None:
        write_report(result, report_dir)
    return result
