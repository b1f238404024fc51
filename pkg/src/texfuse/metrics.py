"""Ranking metrics (AUC, ROC) and a small self-contained SVG plotter.

AUC is computed from tied ranks, which equals the pairwise probability
P(score_pos > score_neg) + 0.5 * P(score_pos = score_neg) exactly: both
reduce to the same half-integer numerator divided by n_pos * n_neg.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError, LabelError


def _check_scores_labels(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim != 1 or labels.shape != scores.shape:
        raise LabelError(
            f"scores and labels must be equal-length vectors, got "
            f"{scores.shape} and {labels.shape}"
        )
    if scores.size == 0:
        raise LabelError("scores must be non-empty")
    if not np.isin(labels, (0, 1)).all():
        raise LabelError("labels must be 0 or 1")
    labels = labels.astype(np.int64)
    if labels.min() == labels.max():
        raise DegenerateInputError(
            "AUC is undefined when only one class is present"
        )
    return scores, labels


def _tied_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the average rank of their run."""
    order = np.argsort(values, kind="stable")
    sorted_values = values[order]
    ranks = np.empty(values.size, dtype=np.float64)
    start = 0
    for i in range(1, values.size + 1):
        if i == values.size or sorted_values[i] != sorted_values[start]:
            # Ranks start+1 .. i average to (start + 1 + i) / 2.
            ranks[order[start:i]] = (start + 1 + i) / 2.0
            start = i
    return ranks


def auc(scores, labels) -> float:
    """Area under the ROC curve via the rank-sum (Mann-Whitney) statistic."""
    scores, labels = _check_scores_labels(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    ranks = _tied_ranks(scores)
    rank_sum = ranks[labels == 1].sum()
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def roc_points(scores, labels) -> list[tuple[float, float]]:
    """ROC curve as (fpr, tpr) points.

    One point per distinct score threshold in descending order (predict
    positive iff score >= threshold), starting at (0, 0) and ending at
    (1, 1).  The trapezoidal area under these points equals auc().
    """
    scores, labels = _check_scores_labels(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    tp = np.cumsum(sorted_labels)
    fp = np.cumsum(1 - sorted_labels)
    # Last index of every run of equal scores marks one threshold.
    boundary = np.flatnonzero(np.diff(sorted_scores) != 0)
    last = np.concatenate([boundary, [scores.size - 1]])
    points = [(0.0, 0.0)]
    for i in last:
        points.append((fp[i] / n_neg, tp[i] / n_pos))
    if points[-1] != (1.0, 1.0):
        points.append((1.0, 1.0))
    return points


def trapezoid_area(points) -> float:
    """Area under a piecewise-linear curve given as (x, y) points."""
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points[:-1], points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def write_roc_svg(path, curves, title: str = "ROC") -> None:
    """Render one or more ROC curves to a standalone SVG file.

    curves is a sequence of (label, points) with points as (fpr, tpr)
    pairs in [0, 1].  Output is deterministic for identical input.
    """
    width, height, margin = 480, 400, 54
    plot_w, plot_h = width - 2 * margin, height - 2 * margin

    def sx(x):
        return margin + x * plot_w

    def sy(y):
        return height - margin - y * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
        f'<line x1="{sx(0):.1f}" y1="{sy(0):.1f}" x2="{sx(1):.1f}" y2="{sy(0):.1f}" '
        f'stroke="black"/>',
        f'<line x1="{sx(0):.1f}" y1="{sy(0):.1f}" x2="{sx(0):.1f}" y2="{sy(1):.1f}" '
        f'stroke="black"/>',
        f'<line x1="{sx(0):.1f}" y1="{sy(0):.1f}" x2="{sx(1):.1f}" y2="{sy(1):.1f}" '
        f'stroke="#999" stroke-dasharray="5,4"/>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        parts.append(
            f'<text x="{sx(tick):.1f}" y="{height - margin + 18:.1f}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="10">'
            f"{tick:g}</text>"
        )
        parts.append(
            f'<text x="{margin - 8:.1f}" y="{sy(tick) + 3:.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="10">{tick:g}</text>'
        )
    parts.append(
        f'<text x="{width / 2:.1f}" y="{height - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="11">false positive rate</text>'
    )
    parts.append(
        f'<text x="16" y="{height / 2:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="11" '
        f'transform="rotate(-90 16 {height / 2:.1f})">true positive rate</text>'
    )
    for i, (label, points) in enumerate(curves):
        color = _SVG_COLORS[i % len(_SVG_COLORS)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in points)
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" '
            f'stroke-width="1.6"/>'
        )
        ly = margin + 16 + 15 * i
        parts.append(
            f'<line x1="{width - margin - 120}" y1="{ly - 4}" '
            f'x2="{width - margin - 100}" y2="{ly - 4}" stroke="{color}" '
            f'stroke-width="1.6"/>'
        )
        parts.append(
            f'<text x="{width - margin - 94}" y="{ly}" font-family="sans-serif" '
            f'font-size="10">{label}</text>'
        )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
