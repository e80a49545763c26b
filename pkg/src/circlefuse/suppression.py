"""Greedy circle-NMS and the Soft-NMS baseline.

NMS removes every detection whose cIoU with a higher-scored kept detection
exceeds the threshold; applied per model after coordinate assembly it
collapses both tiling duplicates and within-patch duplicates in one pass.
Ordering uses a total tie-break (score desc, then cx, cy, r, model_id), so
the kept set never depends on input order.
"""

from __future__ import annotations

import math
import statistics

import numpy as np

from ._grid import NeighborGrid
from .backends import Detection, detection_sort_key
from .geometry import Circle, ciou, ciou_one_to_many

__all__ = ["nms", "soft_nms"]


def _grid_cell(detections: list[Detection]) -> float:
    return 2.0 * statistics.median(d.circle.r for d in detections)


def nms(detections: list[Detection], t_ciou: float = 0.5) -> list[Detection]:
    """Greedy NMS: keep the top-scored detection, drop overlaps above t_ciou.

    Returns kept detections in processing (score-sorted) order; the output
    is a subset of the input records.
    """
    if not (0.0 < t_ciou < 1.0):
        raise ValueError(f"t_ciou must be in (0,1), got {t_ciou}")
    if not detections:
        return []
    ordered = sorted(detections, key=detection_sort_key)
    grid = NeighborGrid(_grid_cell(ordered))
    kept: list[Detection] = []
    for det in ordered:
        c = det.circle
        suppressed = False
        for k in grid.neighbors(c.cx, c.cy, c.r):
            if ciou(c, kept[k].circle) > t_ciou:
                suppressed = True
                break
        if not suppressed:
            grid.insert(len(kept), c.cx, c.cy, c.r)
            kept.append(det)
    return kept


def soft_nms(
    detections: list[Detection], sigma: float = 0.5, score_floor: float = 0.05
) -> list[Detection]:
    """Gaussian Soft-NMS: decay overlapping scores instead of removing them.

    Iterates from the current top-scoring unprocessed detection, rescoring
    the rest by s * exp(-cIoU^2 / sigma) and discarding anything that falls
    below score_floor. Scores never increase. Output is sorted by final
    score descending.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if not detections:
        return []
    ordered = sorted(detections, key=detection_sort_key)
    cxs = np.array([d.circle.cx for d in ordered])
    cys = np.array([d.circle.cy for d in ordered])
    rs = np.array([d.circle.r for d in ordered])
    scores = np.array([d.score for d in ordered])
    alive = scores >= score_floor

    out: list[Detection] = []
    # Tie-break on the original canonical position: argmax picks the lowest
    # index among equal scores, and `ordered` is canonically sorted.
    while np.any(alive):
        masked = np.where(alive, scores, -1.0)
        i = int(np.argmax(masked))
        det = ordered[i]
        out.append(
            det if scores[i] == det.score
            else Detection(det.circle, float(scores[i]), det.model_id, det.label)
        )
        alive[i] = False
        idx = np.flatnonzero(alive)
        if idx.size:
            overlaps = ciou_one_to_many(det.circle, cxs[idx], cys[idx], rs[idx])
            scores[idx] = scores[idx] * np.exp(-(overlaps**2) / sigma)
            alive[idx] = scores[idx] >= score_floor
    out.sort(key=detection_sort_key)
    return out
