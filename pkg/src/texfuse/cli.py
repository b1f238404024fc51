"""Command-line interface.

Subcommands:
  extract    compute an LDP/LBP descriptor video for one stored clip
  synth-gen  generate a synthetic multi-domain dataset
  train      train a model from a config file and a manifest
  eval       evaluate a checkpoint against a manifest
  ablate     train/evaluate one model per modality pair
  roc-plot   render ROC curves of a report directory to SVG
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .ablation import run_ablation
from .config import MODALITY_PAIRS, read_config
from .synth import DOMAINS, build_dataset, read_clip, write_clip
from .texture import descriptor_video
from .trainer import evaluate, train


def _cmd_extract(args) -> int:
    clip = read_clip(args.in_path)
    coded = descriptor_video(clip, args.kind)
    write_clip(coded, args.out)
    print(f"wrote {args.kind} descriptor video to {args.out}")
    return 0


def _cmd_synth_gen(args) -> int:
    domains = []
    for name in args.domains.split(","):
        name = name.strip()
        if name not in DOMAINS:
            print(f"error: unknown domain {name!r}, have {sorted(DOMAINS)}", file=sys.stderr)
            return 2
        domains.append(DOMAINS[name])
    counts = {"train": args.train, "test": args.test}
    if args.val:
        counts["val"] = args.val
    manifests = build_dataset(
        args.out, domains=domains, counts=counts, seed=args.seed,
        frames=args.frames, height=args.size, width=args.size,
    )
    for name, path in manifests.items():
        print(f"{name}: {path}")
    return 0


def _cmd_train(args) -> int:
    config = read_config(args.config)
    checkpoint = train(
        config, args.manifest, args.out, val_manifest=args.val_manifest
    )
    print(f"checkpoint: {checkpoint}")
    print(f"log: {Path(args.out) / 'train_log.jsonl'}")
    return 0


def _cmd_eval(args) -> int:
    result = evaluate(
        args.checkpoint, args.manifest, report_dir=args.report,
        eval_mask_mode=args.mask_mode,
    )
    if result.auc is None:
        print("overall AUC: undefined (single-class manifest)")
    else:
        print(f"overall AUC: {result.auc:.4f}")
    for name, part in sorted(result.partitions.items()):
        shown = "undefined" if part.auc is None else f"{part.auc:.4f}"
        print(f"domain {name}: AUC {shown} over {part.n_clips} clips")
    print(f"report: {args.report}")
    return 0


def _cmd_ablate(args) -> int:
    config = read_config(args.config)
    pairs = [p.strip() for p in args.pairs.split(",") if p.strip()]
    rows = run_ablation(
        config, pairs, args.train_manifest, args.test_manifest, args.out,
        val_manifest=args.val_manifest,
    )
    for row in rows:
        in_auc = "-" if row.in_domain_auc is None else f"{row.in_domain_auc:.4f}"
        cross = "-" if row.cross_domain_auc is None else f"{row.cross_domain_auc:.4f}"
        print(f"{row.pair}: in-domain {in_auc}, cross-domain {cross}")
    print(f"summary: {Path(args.out) / 'ablation.csv'}")
    return 0


def _cmd_roc_plot(args) -> int:
    from .metrics import write_roc_svg

    summary_path = Path(args.report) / "summary.json"
    summary = json.loads(summary_path.read_text())
    curves = []
    overall = summary.get("overall") or {}
    if overall.get("roc"):
        label = f"overall (AUC {overall['auc']:.3f})"
        curves.append((label, [tuple(p) for p in overall["roc"]]))
    for name, part in sorted((summary.get("partitions") or {}).items()):
        if part.get("roc"):
            curves.append(
                (f"{name} (AUC {part['auc']:.3f})", [tuple(p) for p in part["roc"]])
            )
    if not curves:
        print("error: report contains no ROC curves (degenerate labels?)", file=sys.stderr)
        return 2
    write_roc_svg(args.out, curves, title="ROC")
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="texfuse",
        description="Masked texture-reconstruction video forgery detector.",
    )
    parser.add_argument("--version", action="version", version=f"texfuse {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="descriptor video for one clip file")
    p.add_argument("--in", dest="in_path", required=True, help="input .fsvc clip")
    p.add_argument("--kind", choices=("ldp", "lbp"), required=True)
    p.add_argument("--out", required=True, help="output .fsvc clip")
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("synth-gen", help="generate a synthetic dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--domains", default="alpha,beta", help="comma-separated domain names")
    p.add_argument("--train", type=int, default=100, help="train clips per domain")
    p.add_argument("--val", type=int, default=0, help="val clips per domain")
    p.add_argument("--test", type=int, default=50, help="test clips per domain")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--size", type=int, default=32, help="frame height and width")
    p.set_defaults(func=_cmd_synth_gen)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--config", required=True, help="flat key/value config file")
    p.add_argument("--manifest", required=True, help="training manifest (JSON lines)")
    p.add_argument("--val-manifest", default=None, help="optional validation manifest")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--report", required=True, help="report output directory")
    p.add_argument(
        "--mask-mode", default=None,
        choices=("training-ratio-deterministic", "unmasked"),
        help="override the checkpoint's evaluation masking mode",
    )
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ablate", help="modality-pair ablation")
    p.add_argument("--config", required=True)
    p.add_argument(
        "--pairs", default=",".join(MODALITY_PAIRS).lower(),
        help="comma-separated modality pairs, e.g. rgb-ldp,ldp-rgb",
    )
    p.add_argument("--train-manifest", required=True)
    p.add_argument("--test-manifest", required=True)
    p.add_argument("--val-manifest", default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("roc-plot", help="render report ROC curves to SVG")
    p.add_argument("--report", required=True, help="directory written by eval")
    p.add_argument("--out", required=True, help="output .svg path")
    p.set_defaults(func=_cmd_roc_plot)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
