"""Weighted Circle Fusion: cross-model clustering and consensus circles.

Detections from all models are pooled in score order and greedily clustered
by cIoU against each cluster's current fused geometry. A cluster's circle is
the confidence-weighted mean of its members (cx = sum(s_i * cx_i) / sum(s_i),
likewise cy and r); its score is the plain mean of member scores; its count
is the number of distinct contributing models. Retention keeps a fused
detection when enough models agree or, under the default policy, when its
confidence alone clears the rescue threshold.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field

from ._grid import NeighborGrid
from .backends import Detection, ModelRun, detection_sort_key
from .geometry import Circle, ciou

__all__ = [
    "WcfConfig",
    "FusedDetection",
    "wcf",
    "wcf_with_stats",
    "categorize",
    "DEFAULT_COLOR_MAP",
    "fused_document",
    "parse_fused_document",
]

FUSED_SCHEMA = "circlefuse-fused/1"

RETENTION_POLICIES = ("count_or_score", "count_and_score", "count_only")

DEFAULT_COLOR_MAP = {
    1: "#E6194B",
    2: "#F58231",
    3: "#FFE119",
    4: "#BFEF45",
    5: "#3CB44B",  # 5 and above
}


@dataclass(frozen=True, slots=True)
class WcfConfig:
    t_match: float = 0.5
    t_count: int = 2
    t_score: float = 0.9
    retention_policy: str = "count_or_score"

    def __post_init__(self):
        if not (0.0 < self.t_match < 1.0):
            raise ValueError(f"t_match must be in (0,1), got {self.t_match}")
        if self.t_count < 1:
            raise ValueError(f"t_count must be >= 1, got {self.t_count}")
        if not (0.0 <= self.t_score <= 1.0):
            raise ValueError(f"t_score must be in [0,1], got {self.t_score}")
        if self.retention_policy not in RETENTION_POLICIES:
            raise ValueError(
                f"retention_policy must be one of {RETENTION_POLICIES}, "
                f"got {self.retention_policy!r}"
            )

    def retains(self, count: int, score: float) -> bool:
        by_count = count >= self.t_count
        by_score = score >= self.t_score
        if self.retention_policy == "count_or_score":
            return by_count or by_score
        if self.retention_policy == "count_and_score":
            return by_count and by_score
        return by_count


@dataclass(slots=True)
class FusedDetection:
    """Consensus circle with averaged score and contributing-model count."""

    circle: Circle
    score: float
    count: int
    members: list[Detection] = field(default_factory=list)
    category: str = ""
    color: str | None = None


class _Cluster:
    __slots__ = ("sum_w", "sum_wcx", "sum_wcy", "sum_wr", "sum_score", "members", "model_ids", "circle")

    def __init__(self, det: Detection):
        self.sum_w = 0.0
        self.sum_wcx = 0.0
        self.sum_wcy = 0.0
        self.sum_wr = 0.0
        self.sum_score = 0.0
        self.members: list[Detection] = []
        self.model_ids: set[str] = set()
        self.circle = det.circle
        self.add(det)

    def add(self, det: Detection) -> None:
        s, c = det.score, det.circle
        self.sum_w += s
        self.sum_wcx += s * c.cx
        self.sum_wcy += s * c.cy
        self.sum_wr += s * c.r
        self.sum_score += s
        self.members.append(det)
        self.model_ids.add(det.model_id)
        if self.sum_w > 0:
            self.circle = Circle(
                self.sum_wcx / self.sum_w, self.sum_wcy / self.sum_w, self.sum_wr / self.sum_w
            )
        else:
            # All member scores are zero; weighted mean is undefined, fall
            # back to the plain mean so the cluster still has geometry.
            n = len(self.members)
            self.circle = Circle(
                sum(m.circle.cx for m in self.members) / n,
                sum(m.circle.cy for m in self.members) / n,
                sum(m.circle.r for m in self.members) / n,
            )

    @property
    def score(self) -> float:
        return self.sum_score / len(self.members)


def wcf(runs: list[ModelRun], cfg: WcfConfig = WcfConfig()) -> list[FusedDetection]:
    """Fuse per-model (already NMS-deduplicated) runs into consensus circles.

    Greedy pass over the pooled, canonically sorted detections: each
    detection joins the cluster whose current fused circle it overlaps most,
    provided that overlap reaches t_match and the cluster has no member from
    the same model yet; otherwise it seeds a new cluster. Every join updates
    the cluster's weighted-mean geometry, so later detections match against
    the running consensus. Output is retained per the config policy and
    sorted by fused score descending.
    """
    fused, _ = wcf_with_stats(runs, cfg)
    return fused


def wcf_with_stats(
    runs: list[ModelRun], cfg: WcfConfig = WcfConfig()
) -> tuple[list[FusedDetection], int]:
    """Like :func:`wcf` but also reports the number of clusters formed
    (before retention filtering), for run manifests."""
    if not runs:
        raise ValueError("wcf requires at least one model run")
    pooled = sorted((d for run in runs for d in run.detections), key=detection_sort_key)
    if not pooled:
        return [], 0

    grid = NeighborGrid(2.0 * statistics.median(d.circle.r for d in pooled))
    clusters: list[_Cluster] = []
    for det in pooled:
        c = det.circle
        candidates = grid.neighbors(c.cx, c.cy, c.r)
        candidates.sort()  # lowest cluster index wins cIoU ties
        best_idx = -1
        best_ciou = 0.0
        for k in candidates:
            overlap = ciou(c, clusters[k].circle)
            if overlap > best_ciou:
                best_ciou = overlap
                best_idx = k
        if (
            best_idx >= 0
            and best_ciou >= cfg.t_match
            and det.model_id not in clusters[best_idx].model_ids
        ):
            cluster = clusters[best_idx]
            old = cluster.circle
            cluster.add(det)
            new = cluster.circle
            grid.move(best_idx, old.cx, old.cy, new.cx, new.cy, new.r)
        else:
            grid.insert(len(clusters), c.cx, c.cy, c.r)
            clusters.append(_Cluster(det))

    fused = [
        FusedDetection(
            circle=cl.circle,
            score=cl.score,
            count=len(cl.model_ids),
            members=list(cl.members),
            category=f"consensus_{len(cl.model_ids)}",
        )
        for cl in clusters
        if cfg.retains(len(cl.model_ids), cl.score)
    ]
    fused.sort(key=lambda f: (-f.score, f.circle.cx, f.circle.cy, f.circle.r))
    return fused, len(clusters)


def categorize(
    fused: list[FusedDetection], color_map: dict[int, str] | None = None
) -> list[FusedDetection]:
    """Assign consensus categories and display colors in place.

    Category is "consensus_{count}"; the color map keys on count, clamping
    counts above the largest key (ensembles larger than the map) to that
    key's color.
    """
    colors = color_map or DEFAULT_COLOR_MAP
    top = max(colors)
    for f in fused:
        f.category = f"consensus_{f.count}"
        f.color = colors[min(f.count, top)] if f.count >= 1 else colors[top]
    return fused


# --- fused result file format (circlefuse-fused/1) ---


def fused_document(fused: list[FusedDetection], slide_id: str) -> dict:
    return {
        "schema": FUSED_SCHEMA,
        "slide_id": slide_id,
        "fused": [
            {
                "cx": f.circle.cx,
                "cy": f.circle.cy,
                "r": f.circle.r,
                "score": f.score,
                "count": f.count,
                "category": f.category,
                "members": [
                    {
                        "model_id": m.model_id,
                        "cx": m.circle.cx,
                        "cy": m.circle.cy,
                        "r": m.circle.r,
                        "score": m.score,
                    }
                    for m in f.members
                ],
            }
            for f in fused
        ],
    }


def parse_fused_document(doc: dict) -> tuple[str, list[FusedDetection]]:
    if not isinstance(doc, dict) or doc.get("schema") != FUSED_SCHEMA:
        raise ValueError(f"not a {FUSED_SCHEMA} document")
    fused = []
    for i, entry in enumerate(doc.get("fused", [])):
        try:
            members = [
                Detection(
                    Circle(float(m["cx"]), float(m["cy"]), float(m["r"])),
                    float(m["score"]),
                    str(m["model_id"]),
                )
                for m in entry.get("members", [])
            ]
            fused.append(
                FusedDetection(
                    circle=Circle(float(entry["cx"]), float(entry["cy"]), float(entry["r"])),
                    score=float(entry["score"]),
                    count=int(entry["count"]),
                    members=members,
                    category=str(entry.get("category", f"consensus_{entry['count']}")),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"fused[{i}]: {exc}") from exc
    return doc.get("slide_id", ""), fused
