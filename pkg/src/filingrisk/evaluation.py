"""Rank-based evaluation for heavily imbalanced binary scoring.

Four scalar metrics plus the PR / ROC / CAP curves:

- ROC-AUC: probability a random positive outscores a random negative,
  with ties counted as half wins.
- Average precision: step-wise (non-interpolated) summary of the PR curve.
- recall@k: fraction of all positives ranked in the top k (stable
  original-order tie-breaking).
- CAP ratio (accuracy ratio): area between the cumulative accuracy
  profile and the diagonal, relative to the perfect model's area.  With
  tied scores handled as grouped linear segments this equals
  2 * ROC-AUC - 1 exactly.
"""

from __future__ import annotations

import csv
import warnings
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class UndefinedMetric(ValueError):
    """The metric needs both classes (or at least one positive) present."""


class TiesAtCutoffWarning(UserWarning):
    """Tied scores straddle the top-k boundary; ranking there is input order."""


def _validate(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be aligned 1-d arrays")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be binary 0/1")
    return scores, labels.astype(int)


def _descending_order(scores: np.ndarray) -> np.ndarray:
    """Stable sort by descending score; ties keep original input order."""
    return np.argsort(-scores, kind="stable")


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Pairwise win rate via average ranks, O(n log n)."""
    scores, labels = _validate(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetric("ROC-AUC needs both classes")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(scores.size, dtype=float)
    sorted_scores = scores[order]
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # average 1-based rank
        i = j + 1
    positive_rank_sum = float(ranks[labels == 1].sum())
    return (positive_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def average_precision(scores: Sequence[float], labels: Sequence[int]) -> float:
    scores, labels = _validate(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise UndefinedMetric("average precision needs at least one positive")
    ranked = labels[_descending_order(scores)]
    cum_pos = np.cumsum(ranked)
    precision = cum_pos / np.arange(1, labels.size + 1)
    return float(precision[ranked == 1].sum() / n_pos)


def recall_at_k(scores: Sequence[float], labels: Sequence[int], k: int = 100) -> float:
    scores, labels = _validate(scores, labels)
    if not 1 <= k <= labels.size:
        raise ValueError(f"k must be in 1..{labels.size}")
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise UndefinedMetric("recall@k needs at least one positive")
    order = _descending_order(scores)
    if k < labels.size and scores[order[k - 1]] == scores[order[k]]:
        warnings.warn(
            f"tied scores cross the k={k} cutoff", TiesAtCutoffWarning, stacklevel=2
        )
    return float(labels[order[:k]].sum() / n_pos)


def _grouped_counts(scores: np.ndarray, labels: np.ndarray):
    """Per distinct score level, descending: (group sizes, group positives)."""
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    boundaries = np.flatnonzero(sorted_scores[:-1] != sorted_scores[1:])
    ends = np.append(boundaries, scores.size - 1)
    starts = np.insert(boundaries + 1, 0, 0)
    sizes = ends - starts + 1
    cum = np.insert(np.cumsum(sorted_labels), 0, 0)
    positives = cum[ends + 1] - cum[starts]
    return sizes, positives


def cap_ratio(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Accuracy ratio of the cumulative accuracy profile.

    Tied scores contribute a single linear segment, making the curve (and
    the ratio) independent of input order.
    """
    scores, labels = _validate(scores, labels)
    n = labels.size
    n_pos = int(labels.sum())
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetric("CAP ratio needs both classes")
    sizes, positives = _grouped_counts(scores, labels)
    cum_pos_before = np.insert(np.cumsum(positives), 0, 0)[:-1]
    # Trapezoid area under the grouped CAP curve.
    area = float(np.sum(sizes * (cum_pos_before + positives / 2.0))) / (n * n_pos)
    perfect_area = 1.0 - n_pos / (2.0 * n)
    return (area - 0.5) / (perfect_area - 0.5)


@dataclass
class CurveSet:
    pr: list[tuple[float, float]]
    roc: list[tuple[float, float]]
    cap: list[tuple[float, float]]


def curves(scores: Sequence[float], labels: Sequence[int]) -> CurveSet:
    """PR, ROC and CAP curve points, one vertex per distinct score level.

    ROC and CAP are anchored at (0, 0) and end at (1, 1); PR is anchored at
    (0, 1) and ends at (1, prevalence).
    """
    scores, labels = _validate(scores, labels)
    n = labels.size
    n_pos = int(labels.sum())
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetric("curves need both classes")
    sizes, positives = _grouped_counts(scores, labels)
    cum_n = np.cumsum(sizes)
    cum_pos = np.cumsum(positives)
    cum_neg = cum_n - cum_pos

    recall = cum_pos / n_pos
    precision = cum_pos / cum_n
    fpr = cum_neg / n_neg
    observed = cum_n / n

    pr = [(0.0, 1.0)] + list(zip(recall.tolist(), precision.tolist()))
    roc = [(0.0, 0.0)] + list(zip(fpr.tolist(), recall.tolist()))
    cap = [(0.0, 0.0)] + list(zip(observed.tolist(), recall.tolist()))
    return CurveSet(pr=pr, roc=roc, cap=cap)


@dataclass
class MetricsReport:
    name: str
    roc_auc: float
    ap: float
    recall_at_k: float
    k: int
    cap_ratio: float
    n: int
    n_pos: int
    curves: CurveSet | None = field(default=None, repr=False)


def compute_report(
    name: str, scores: Sequence[float], labels: Sequence[int], k: int = 100
) -> MetricsReport:
    scores_arr, labels_arr = _validate(scores, labels)
    return MetricsReport(
        name=name,
        roc_auc=roc_auc(scores_arr, labels_arr),
        ap=average_precision(scores_arr, labels_arr),
        recall_at_k=recall_at_k(scores_arr, labels_arr, k=min(k, labels_arr.size)),
        k=min(k, labels_arr.size),
        cap_ratio=cap_ratio(scores_arr, labels_arr),
        n=int(labels_arr.size),
        n_pos=int(labels_arr.sum()),
        curves=curves(scores_arr, labels_arr),
    )


# ---------------------------------------------------------------------------
# Report files: metrics CSV, curve CSVs, SVG plots
# ---------------------------------------------------------------------------

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_SVG_W, _SVG_H = 640, 480
_MARGIN = 60


def _svg_plot(title: str, x_label: str, y_label: str, series: list[tuple[str, list[tuple[float, float]]]]) -> str:
    """Minimal self-contained SVG line plot; byte-identical for equal input."""
    plot_w = _SVG_W - 2 * _MARGIN
    plot_h = _SVG_H - 2 * _MARGIN

    def px(x: float) -> float:
        return _MARGIN + x * plot_w

    def py(y: float) -> float:
        return _SVG_H - _MARGIN - y * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" height="{_SVG_H}">',
        f'<rect width="{_SVG_W}" height="{_SVG_H}" fill="white"/>',
        f'<text x="{_SVG_W / 2:.1f}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="16">{title}</text>',
    ]
    # Axes with 0/0.5/1 ticks.
    parts.append(
        f'<polyline points="{px(0):.1f},{py(1):.1f} {px(0):.1f},{py(0):.1f} '
        f'{px(1):.1f},{py(0):.1f}" fill="none" stroke="black" stroke-width="1"/>'
    )
    for tick in (0.0, 0.5, 1.0):
        parts.append(
            f'<text x="{px(tick):.1f}" y="{_SVG_H - _MARGIN + 18:.1f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{tick:g}</text>'
        )
        parts.append(
            f'<text x="{_MARGIN - 8:.1f}" y="{py(tick) + 4:.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{tick:g}</text>'
        )
    parts.append(
        f'<text x="{_SVG_W / 2:.1f}" y="{_SVG_H - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{x_label}</text>'
    )
    parts.append(
        f'<text x="16" y="{_SVG_H / 2:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {_SVG_H / 2:.1f})">{y_label}</text>'
    )
    for index, (name, points) in enumerate(series):
        color = _PALETTE[index % len(_PALETTE)]
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in points)
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        legend_y = _MARGIN + 16 * index
        parts.append(
            f'<rect x="{_SVG_W - _MARGIN - 130}" y="{legend_y - 9}" width="12" height="3" fill="{color}"/>'
        )
        parts.append(
            f'<text x="{_SVG_W - _MARGIN - 112}" y="{legend_y - 4}" '
            f'font-family="sans-serif" font-size="11">{name}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_report(reports: list[MetricsReport], out_dir: str | Path) -> list[Path]:
    """Write metrics.csv, the three curve CSVs and matching SVG plots."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    metrics_path = out_dir / "metrics.csv"
    with metrics_path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["model", "roc_auc", "ap", "recall_at_k", "k", "cap_ratio", "n", "n_pos"])
        for report in reports:
            writer.writerow(
                [
                    report.name,
                    f"{report.roc_auc:.6f}",
                    f"{report.ap:.6f}",
                    f"{report.recall_at_k:.6f}",
                    report.k,
                    f"{report.cap_ratio:.6f}",
                    report.n,
                    report.n_pos,
                ]
            )
    written.append(metrics_path)

    curve_specs = (
        ("pr", "Precision-recall", "recall", "precision"),
        ("roc", "Receiver operating characteristic", "false positive rate", "true positive rate"),
        ("cap", "Cumulative accuracy profile", "fraction of observations", "recall"),
    )
    for key, title, x_label, y_label in curve_specs:
        csv_path = out_dir / f"{key}.csv"
        with csv_path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["model", "x", "y"])
            for report in reports:
                if report.curves is None:
                    continue
                for x, y in getattr(report.curves, key):
                    writer.writerow([report.name, f"{x:.8f}", f"{y:.8f}"])
        written.append(csv_path)

        series = [
            (report.name, getattr(report.curves, key))
            for report in reports
            if report.curves is not None
        ]
        svg_path = out_dir / f"{key}.svg"
        svg_path.write_text(_svg_plot(title, x_label, y_label, series), encoding="utf-8")
        written.append(svg_path)

    return written
