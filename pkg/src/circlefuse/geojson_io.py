"""GeoJSON export/import of fused detections for slide viewers.

Circles are written as 64-vertex polygon rings (GeoJSON has no circle
primitive; 64 vertices keep radial error below 0.2% of r). The exact circle
parameters, score, count, and member provenance ride along in a namespaced
"circlefuse" property block so re-import is lossless; rings are only fitted
back to circles for hand-drawn features that lack the block.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .backends import Detection
from .fusion import DEFAULT_COLOR_MAP, FusedDetection, categorize
from .geometry import Circle

__all__ = [
    "RING_VERTICES",
    "export_geojson",
    "import_geojson",
    "ImportResult",
    "write_geojson",
    "read_geojson",
]

RING_VERTICES = 64

CRS_NOTE = (
    "Coordinates are level-0 slide pixels; y increases downward "
    "(slide raster convention)."
)


def _hex_to_rgb(color: str) -> list[int]:
    color = color.lstrip("#")
    return [int(color[0:2], 16), int(color[2:4], 16), int(color[4:6], 16)]


def _rgb_to_hex(rgb) -> str:
    return "#{:02X}{:02X}{:02X}".format(*(int(v) for v in rgb))


def _circle_ring(c: Circle, n: int = RING_VERTICES) -> list[list[float]]:
    """Closed counterclockwise ring: n vertices plus the first repeated."""
    pts = []
    for k in range(n):
        theta = 2.0 * math.pi * k / n
        pts.append([c.cx + c.r * math.cos(theta), c.cy + c.r * math.sin(theta)])
    pts.append(list(pts[0]))
    return pts


def export_geojson(fused: list[FusedDetection], slide_id: str) -> dict:
    """FeatureCollection of polygon-approximated circles with consensus classes."""
    features = []
    for f in fused:
        if f.color is None:
            categorize([f])
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [_circle_ring(f.circle)]},
                "properties": {
                    "objectType": "annotation",
                    "classification": {"name": f.category, "color": _hex_to_rgb(f.color)},
                    "circlefuse": {
                        "cx": f.circle.cx,
                        "cy": f.circle.cy,
                        "radius": f.circle.r,
                        "score": f.score,
                        "count": f.count,
                        "models": [
                            {
                                "model_id": m.model_id,
                                "cx": m.circle.cx,
                                "cy": m.circle.cy,
                                "r": m.circle.r,
                                "score": m.score,
                            }
                            for m in f.members
                        ],
                    },
                },
            }
        )
    return {
        "type": "FeatureCollection",
        "crs_note": CRS_NOTE,
        "slide_id": slide_id,
        "features": features,
    }


@dataclass(slots=True)
class ImportResult:
    fused: list[FusedDetection]
    slide_id: str = ""
    errors: list[str] = field(default_factory=list)


def _fit_circle_to_ring(ring: list[list[float]]) -> Circle:
    pts = ring[:-1] if len(ring) > 1 and ring[0] == ring[-1] else ring
    n = len(pts)
    cx = sum(p[0] for p in pts) / n
    cy = sum(p[1] for p in pts) / n
    r = sum(math.hypot(p[0] - cx, p[1] - cy) for p in pts) / n
    return Circle(cx, cy, r)


def import_geojson(document: dict) -> ImportResult:
    """Rebuild fused detections from an exported (possibly edited) document.

    Features carrying the "circlefuse" block restore exactly; hand-added
    polygon features are fitted as (vertex centroid, mean vertex distance)
    with score 1.0 and the "human" category. Non-polygon or malformed
    features are collected as errors without aborting the rest.
    """
    if not isinstance(document, dict) or document.get("type") != "FeatureCollection":
        raise ValueError("not a GeoJSON FeatureCollection")
    result = ImportResult(fused=[], slide_id=str(document.get("slide_id", "")))
    for i, feature in enumerate(document.get("features", [])):
        where = f"features[{i}]"
        try:
            geometry = feature.get("geometry") or {}
            props = feature.get("properties") or {}
            block = props.get("circlefuse")
            if block is not None:
                members = [
                    Detection(
                        Circle(float(m["cx"]), float(m["cy"]), float(m["r"])),
                        float(m["score"]),
                        str(m["model_id"]),
                    )
                    for m in block.get("models", [])
                ]
                fd = FusedDetection(
                    circle=Circle(
                        float(block["cx"]), float(block["cy"]), float(block["radius"])
                    ),
                    score=float(block["score"]),
                    count=int(block["count"]),
                    members=members,
                    category=(props.get("classification") or {}).get(
                        "name", f"consensus_{block['count']}"
                    ),
                )
                cls_color = (props.get("classification") or {}).get("color")
                if cls_color is not None:
                    fd.color = _rgb_to_hex(cls_color)
                result.fused.append(fd)
                continue
            if geometry.get("type") != "Polygon":
                raise ValueError(f"unsupported geometry type {geometry.get('type')!r}")
            rings = geometry.get("coordinates") or []
            if not rings or len(rings[0]) < 3:
                raise ValueError("polygon has no usable exterior ring")
            circle = _fit_circle_to_ring(rings[0])
            result.fused.append(
                FusedDetection(
                    circle=circle,
                    score=1.0,
                    count=1,
                    members=[],
                    category="human",
                    color=DEFAULT_COLOR_MAP[1],
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            result.errors.append(f"{where}: {exc}")
    return result


def write_geojson(document: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(document, indent=2), encoding="utf-8")


def read_geojson(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
