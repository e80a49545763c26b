"""cIoU-threshold matching and AP/AR metrics for circle detections.

Matching is the standard greedy score-ordered assignment: each prediction
takes the unmatched ground-truth circle it overlaps most, provided the
overlap reaches the threshold. AP uses the 101-point interpolated
convention; the headline number is the mean over thresholds 0.50 to 0.95 in
steps of 0.05, alongside AP at 0.50, AP at 0.75, and average recall over
the same sweep.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field

import numpy as np

from ._grid import NeighborGrid
from .geometry import Circle, ciou

__all__ = [
    "EvalConfig",
    "EvalReport",
    "match_at_threshold",
    "average_precision",
    "evaluate",
    "format_report",
]


def _default_thresholds() -> list[float]:
    return [round(0.5 + 0.05 * i, 2) for i in range(10)]


@dataclass(frozen=True, slots=True)
class EvalConfig:
    thresholds: tuple[float, ...] = tuple(_default_thresholds())
    interpolation_points: int = 101

    def __post_init__(self):
        ts = tuple(self.thresholds)
        object.__setattr__(self, "thresholds", ts)
        if not ts:
            raise ValueError("thresholds must be non-empty")
        if any(not (0.0 < t <= 1.0) for t in ts):
            raise ValueError(f"thresholds must lie in (0,1], got {ts}")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError(f"thresholds must be strictly increasing, got {ts}")
        if self.interpolation_points < 2:
            raise ValueError("interpolation_points must be >= 2")


@dataclass(slots=True)
class EvalReport:
    ap_per_threshold: dict[float, float]
    map_50_95: float
    ap_50: float | None
    ap_75: float | None
    average_recall: float
    n_gt: int
    n_pred: int

    def to_dict(self) -> dict:
        return {
            "ap_per_threshold": {f"{t:.2f}": ap for t, ap in self.ap_per_threshold.items()},
            "map_50_95": self.map_50_95,
            "ap_50": self.ap_50,
            "ap_75": self.ap_75,
            "average_recall": self.average_recall,
            "n_gt": self.n_gt,
            "n_pred": self.n_pred,
        }


def _pred_sort_key(p):
    c = p.circle
    return (-p.score, c.cx, c.cy, c.r, getattr(p, "model_id", ""))


def _candidate_lists(preds, gts: list[Circle]) -> list[list[tuple[float, int]]]:
    """Per-prediction GT candidates with positive cIoU, best overlap first."""
    if not gts:
        return [[] for _ in preds]
    grid = NeighborGrid(2.0 * statistics.median(g.r for g in gts))
    for j, g in enumerate(gts):
        grid.insert(j, g.cx, g.cy, g.r)
    out = []
    for p in preds:
        c = p.circle
        cands = []
        for j in grid.neighbors(c.cx, c.cy, c.r):
            overlap = ciou(c, gts[j])
            if overlap > 0.0:
                cands.append((overlap, j))
        cands.sort(key=lambda t: (-t[0], t[1]))
        out.append(cands)
    return out


def _flags_from_candidates(candidates, n_gt: int, t: float) -> list[bool]:
    matched = [False] * n_gt
    flags = []
    for cands in candidates:
        hit = False
        for overlap, j in cands:
            if overlap < t:
                break
            if not matched[j]:
                matched[j] = True
                hit = True
                break
        flags.append(hit)
    return flags


def match_at_threshold(preds, gts: list[Circle], t: float) -> list[bool]:
    """TP/FP flags in prediction order; preds must be score-sorted.

    Each prediction greedily matches the unmatched GT with the highest
    cIoU >= t (ties to the lowest GT index); each GT matches at most once.
    """
    return _flags_from_candidates(_candidate_lists(preds, gts), len(gts), t)


def average_precision(
    flags, scores, n_gt: int, interpolation_points: int = 101
) -> float:
    """Interpolated AP over evenly spaced recall levels in [0, 1].

    AP is the mean over levels of the maximum precision achieved at recall
    at or above each level. An empty class (no GT) scores 1.0 when there
    are no predictions and 0.0 otherwise.
    """
    flags = list(flags)
    scores = list(scores)
    if len(flags) != len(scores):
        raise ValueError("flags and scores must be aligned")
    if n_gt == 0:
        return 1.0 if not flags else 0.0
    if not flags:
        return 0.0

    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    tp = np.cumsum([1.0 if flags[i] else 0.0 for i in order])
    fp = np.cumsum([0.0 if flags[i] else 1.0 for i in order])
    recall = tp / n_gt
    precision = tp / (tp + fp)

    # Precision envelope: best precision at or beyond each point.
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    levels = np.linspace(0.0, 1.0, interpolation_points)
    idx = np.searchsorted(recall, levels, side="left")
    valid = idx < len(recall)
    interpolated = np.where(valid, envelope[np.minimum(idx, len(recall) - 1)], 0.0)
    return float(interpolated.mean())


def evaluate(preds, gts: list[Circle], cfg: EvalConfig = EvalConfig()) -> EvalReport:
    """Full metric suite over the configured cIoU threshold sweep.

    `preds` are scored circles (anything with .circle and .score). All
    supplied predictions are used; there is no max-detections cap.
    """
    preds = sorted(preds, key=_pred_sort_key)
    scores = [p.score for p in preds]
    n_gt = len(gts)
    candidates = _candidate_lists(preds, gts)

    ap_per_threshold: dict[float, float] = {}
    recalls = []
    for t in cfg.thresholds:
        flags = _flags_from_candidates(candidates, n_gt, t)
        ap_per_threshold[t] = average_precision(flags, scores, n_gt, cfg.interpolation_points)
        if n_gt == 0:
            recalls.append(1.0)
        else:
            recalls.append(sum(flags) / n_gt)

    def at(value: float) -> float | None:
        for t, ap in ap_per_threshold.items():
            if abs(t - value) < 1e-9:
                return ap
        return None

    return EvalReport(
        ap_per_threshold=ap_per_threshold,
        map_50_95=sum(ap_per_threshold.values()) / len(ap_per_threshold),
        ap_50=at(0.5),
        ap_75=at(0.75),
        average_recall=sum(recalls) / len(recalls),
        n_gt=n_gt,
        n_pred=len(preds),
    )


def format_report(report: EvalReport) -> str:
    lines = [
        f"{'cIoU threshold':>15} | {'AP':>8}",
        f"{'-' * 15}-+-{'-' * 8}",
    ]
    for t, ap in report.ap_per_threshold.items():
        lines.append(f"{t:>15.2f} | {ap:>8.4f}")
    lines.append(f"{'-' * 15}-+-{'-' * 8}")
    lines.append(f"mAP(0.5:0.95)   = {report.map_50_95:.4f}")
    if report.ap_50 is not None:
        lines.append(f"AP@0.50         = {report.ap_50:.4f}")
    if report.ap_75 is not None:
        lines.append(f"AP@0.75         = {report.ap_75:.4f}")
    lines.append(f"average recall  = {report.average_recall:.4f}")
    lines.append(f"predictions     = {report.n_pred}, ground truth = {report.n_gt}")
    return "\n".join(lines)
