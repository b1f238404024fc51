"""Modality-pair ablation: train one model per pair, compare AUCs.

Every pair trains from the same seed on the same training manifest.  The
test manifest is split into in-domain clips (domains that appear in the
training set) and cross-domain clips (all others); the summary CSV has a
row per pair and the ROC curves of all pairs are drawn into one SVG per
split.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import MODALITY_PAIRS, TrainConfig, parse_pair
from .errors import ParameterError
from .metrics import write_roc_svg
from .model import save_checkpoint
from .trainer import ClipSet, PartitionResult, _partition_metrics, evaluate_clipset, fit_model, load_clipset


@dataclass
class AblationRow:
    """Result line for one modality pair."""

    pair: str
    in_domain_auc: float | None
    cross_domain_auc: float | None
    in_roc: list | None
    cross_roc: list | None
    in_domain_n: int = 0
    cross_domain_n: int = 0


def _split_partition(clip_set: ClipSet, keep: np.ndarray) -> ClipSet:
    return ClipSet(
        ids=[cid for cid, k in zip(clip_set.ids, keep) if k],
        clips=clip_set.clips[keep],
        labels=clip_set.labels[keep],
        domains=[d for d, k in zip(clip_set.domains, keep) if k],
    )


def run_ablation(
    base_config: TrainConfig,
    pairs: list[str],
    train_manifest,
    test_manifest,
    out_dir,
    val_manifest=None,
) -> list[AblationRow]:
    """Train and evaluate one model per modality pair; write CSV + SVGs."""
    pairs = [p.upper() for p in pairs]
    for pair in pairs:
        parse_pair(pair)
    if len(set(pairs)) != len(pairs):
        raise ParameterError(f"duplicate modality pairs in {pairs}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    train_set = load_clipset(train_manifest)
    test_set = load_clipset(test_manifest)
    val_set = load_clipset(val_manifest) if val_manifest else None
    train_domains = set(train_set.domains)
    in_sel = np.asarray([d in train_domains for d in test_set.domains])
    in_set = _split_partition(test_set, in_sel) if in_sel.any() else None
    cross_set = _split_partition(test_set, ~in_sel) if (~in_sel).any() else None

    rows: list[AblationRow] = []
    for pair in pairs:
        config = base_config.replace(modality_pair=pair)
        pair_dir = out_dir / pair.lower()
        pair_dir.mkdir(exist_ok=True)
        model, _ = fit_model(
            config, train_set, val_set, log_path=pair_dir / "train_log.jsonl"
        )
        save_checkpoint(pair_dir / "checkpoint.npz", model, config)

        def metrics_for(subset: ClipSet | None) -> PartitionResult | None:
            if subset is None:
                return None
            result = evaluate_clipset(model, config, subset)
            return _partition_metrics(result.scores, result.labels)

        in_metrics = metrics_for(in_set)
        cross_metrics = metrics_for(cross_set)
        rows.append(
            AblationRow(
                pair=pair,
                in_domain_auc=in_metrics.auc if in_metrics else None,
                cross_domain_auc=cross_metrics.auc if cross_metrics else None,
                in_roc=in_metrics.roc if in_metrics else None,
                cross_roc=cross_metrics.roc if cross_metrics else None,
                in_domain_n=len(in_set) if in_set is not None else 0,
                cross_domain_n=len(cross_set) if cross_set is not None else 0,
            )
        )

    with open(out_dir / "ablation.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pair", "in_domain_auc", "cross_domain_auc"])
        for row in rows:
            writer.writerow([
                row.pair,
                "" if row.in_domain_auc is None else f"{row.in_domain_auc:.6f}",
                "" if row.cross_domain_auc is None else f"{row.cross_domain_auc:.6f}",
            ])

    def curve_label(row: AblationRow, value: float | None) -> str:
        return f"{row.pair} (AUC {value:.3f})" if value is not None else row.pair

    in_curves = [
        (curve_label(r, r.in_domain_auc), r.in_roc) for r in rows if r.in_roc
    ]
    if in_curves:
        write_roc_svg(out_dir / "roc_in_domain.svg", in_curves, title="ROC, in-domain test")
    cross_curves = [
        (curve_label(r, r.cross_domain_auc), r.cross_roc) for r in rows if r.cross_roc
    ]
    if cross_curves:
        write_roc_svg(
            out_dir / "roc_cross_domain.svg", cross_curves, title="ROC, cross-domain test"
        )
    return rows


ALL_PAIRS = MODALITY_PAIRS
