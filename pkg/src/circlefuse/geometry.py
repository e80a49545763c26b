"""Exact circle geometry: intersection area and circle IoU (cIoU).

cIoU is the overlap area of two circles divided by their union area. It is
the single overlap measure used everywhere in this package: de-duplication,
ensemble fusion matching, and evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["Circle", "intersection_area", "ciou", "ciou_one_to_many"]


@dataclass(frozen=True, slots=True)
class Circle:
    """A circle in slide pixel coordinates: center (cx, cy) and radius r."""

    cx: float
    cy: float
    r: float

    def __post_init__(self):
        if not (math.isfinite(self.cx) and math.isfinite(self.cy) and math.isfinite(self.r)):
            raise ValueError(f"circle fields must be finite, got {self!r}")
        if self.r <= 0:
            raise ValueError(f"circle radius must be > 0, got {self.r}")

    @property
    def area(self) -> float:
        return math.pi * self.r * self.r

    def translated(self, dx: float, dy: float) -> "Circle":
        return Circle(self.cx + dx, self.cy + dy, self.r)


def intersection_area(a: Circle, b: Circle) -> float:
    """Exact lens area of two overlapping circles, in square pixels.

    Containment and disjoint cases are resolved before the inverse-cosine
    branch; acos arguments are clamped to [-1, 1] so near-tangent pairs do
    not raise on floating-point roundoff.
    """
    d = math.hypot(b.cx - a.cx, b.cy - a.cy)
    if d >= a.r + b.r:
        return 0.0
    # Sub-epsilon center distances are concentric for all practical purposes
    # and would underflow the chord terms below.
    if d <= abs(a.r - b.r) or d < 1e-15 * (a.r + b.r):
        rm = min(a.r, b.r)
        return math.pi * rm * rm
    # Two circular segments; the sqrt term is twice the triangle area (Heron).
    cos_a = (d * d + a.r * a.r - b.r * b.r) / (2.0 * d * a.r)
    cos_b = (d * d + b.r * b.r - a.r * a.r) / (2.0 * d * b.r)
    cos_a = max(-1.0, min(1.0, cos_a))
    cos_b = max(-1.0, min(1.0, cos_b))
    tri = max(0.0, (-d + a.r + b.r) * (d + a.r - b.r) * (d - a.r + b.r) * (d + a.r + b.r))
    return a.r * a.r * math.acos(cos_a) + b.r * b.r * math.acos(cos_b) - 0.5 * math.sqrt(tri)


def ciou(a: Circle, b: Circle) -> float:
    """Circle IoU: intersection area over union area, in [0, 1]."""
    inter = intersection_area(a, b)
    union = a.area + b.area - inter
    return inter / union


def ciou_one_to_many(circle: Circle, cxs, cys, rs) -> np.ndarray:
    """Vectorized cIoU of one circle against arrays of circle parameters.

    Mirrors :func:`ciou` branch for branch so scalar and vector paths agree
    to floating-point roundoff.
    """
    cxs = np.asarray(cxs, dtype=np.float64)
    cys = np.asarray(cys, dtype=np.float64)
    rs = np.asarray(rs, dtype=np.float64)
    d = np.hypot(cxs - circle.cx, cys - circle.cy)
    r1 = circle.r

    inter = np.zeros_like(d)
    contained = (d <= np.abs(r1 - rs)) | (d < 1e-15 * (r1 + rs))
    rm = np.minimum(r1, rs)
    inter[contained] = np.pi * rm[contained] ** 2

    lens = (~contained) & (d < r1 + rs)
    if np.any(lens):
        dl, rl = d[lens], rs[lens]
        cos_a = np.clip((dl * dl + r1 * r1 - rl * rl) / (2.0 * dl * r1), -1.0, 1.0)
        cos_b = np.clip((dl * dl + rl * rl - r1 * r1) / (2.0 * dl * rl), -1.0, 1.0)
        tri = np.maximum(0.0, (-dl + r1 + rl) * (dl + r1 - rl) * (dl - r1 + rl) * (dl + r1 + rl))
        inter[lens] = (
            r1 * r1 * np.arccos(cos_a) + rl * rl * np.arccos(cos_b) - 0.5 * np.sqrt(tri)
        )

    union = np.pi * r1 * r1 + np.pi * rs * rs - inter
    return inter / union
