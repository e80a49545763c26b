"""Uniform hash grid over circle centers for radius-bounded neighbor queries.

Two circles can only overlap when their center distance is below the sum of
their radii, so a query for "everything with nonzero cIoU against c" scans
the cells within c.r + max stored radius of c's center. Keeps NMS, fusion,
and evaluation matching near-linear at 10^5 detections.
"""

from __future__ import annotations

import math
from collections import defaultdict

__all__ = ["NeighborGrid"]


class NeighborGrid:
    def __init__(self, cell_size: float):
        self.cell = max(1e-9, float(cell_size))
        self._buckets: dict[tuple[int, int], list[int]] = defaultdict(list)
        self._max_r = 0.0

    def cell_of(self, cx: float, cy: float) -> tuple[int, int]:
        return (math.floor(cx / self.cell), math.floor(cy / self.cell))

    def insert(self, idx: int, cx: float, cy: float, r: float) -> None:
        self._buckets[self.cell_of(cx, cy)].append(idx)
        if r > self._max_r:
            self._max_r = r

    def remove(self, idx: int, cx: float, cy: float) -> None:
        # max_r is not shrunk on removal; queries stay conservative (correct,
        # marginally wider than necessary).
        self._buckets[self.cell_of(cx, cy)].remove(idx)

    def move(self, idx: int, old_cx: float, old_cy: float, cx: float, cy: float, r: float) -> None:
        old_cell = self.cell_of(old_cx, old_cy)
        new_cell = self.cell_of(cx, cy)
        if old_cell != new_cell:
            self._buckets[old_cell].remove(idx)
            self._buckets[new_cell].append(idx)
        if r > self._max_r:
            self._max_r = r

    def neighbors(self, cx: float, cy: float, r: float) -> list[int]:
        """Indices whose stored circle may overlap a circle at (cx, cy, r).

        Superset guarantee: every stored circle with center distance
        < r + its radius is returned; order is deterministic for identical
        insertion histories.
        """
        reach = r + self._max_r
        ix0 = math.floor((cx - reach) / self.cell)
        ix1 = math.floor((cx + reach) / self.cell)
        iy0 = math.floor((cy - reach) / self.cell)
        iy1 = math.floor((cy + reach) / self.cell)
        out: list[int] = []
        buckets = self._buckets
        for ix in range(ix0, ix1 + 1):
            for iy in range(iy0, iy1 + 1):
                b = buckets.get((ix, iy))
                if b:
                    out.extend(b)
        return out
