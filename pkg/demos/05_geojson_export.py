"""Export fused detections as viewer-ready GeoJSON and import them back.

Circles become 64-vertex polygon rings classified by consensus count; the
exact circle parameters ride in the namespaced "circlefuse" property block,
so the round trip is lossless. Hand-drawn rings without the block are
fitted back to circles on import.
"""

import json
import math
from pathlib import Path

from circlefuse import (
    ModelRun,
    SlideGeometry,
    SynthConfig,
    WcfConfig,
    categorize,
    export_geojson,
    import_geojson,
    nms,
    simulate_ensemble,
    wcf,
)

cfg = SynthConfig(seed=3, slide=SlideGeometry("demo", 5888, 5888), n_objects=25)
gt, runs = simulate_ensemble(cfg)
deduped = [ModelRun(r.model_id, nms(r.detections), r.source) for r in runs]
fused = categorize(wcf(deduped, WcfConfig()))

doc = export_geojson(fused, "demo")
out = Path("demo_export.geojson")
out.write_text(json.dumps(doc, indent=2))
print(f"wrote {len(doc['features'])} features to {out}")

feature = doc["features"][0]
props = feature["properties"]
ring = feature["geometry"]["coordinates"][0]
print(f"first feature: {props['classification']['name']}, "
      f"color {props['classification']['color']}, {len(ring)} ring points")

# Simulate a pathologist adding a circle by hand (no circlefuse block).
n = 64
hand_ring = [
    [1000 + 80 * math.cos(2 * math.pi * k / n), 2000 + 80 * math.sin(2 * math.pi * k / n)]
    for k in range(n)
]
hand_ring.append(list(hand_ring[0]))
doc["features"].append({
    "type": "Feature",
    "geometry": {"type": "Polygon", "coordinates": [hand_ring]},
    "properties": {"objectType": "annotation"},
})

result = import_geojson(doc)
print(f"\nre-imported {len(result.fused)} detections ({len(result.errors)} errors)")
human = result.fused[-1]
print(f"hand-drawn ring fitted to ({human.circle.cx:.1f}, {human.circle.cy:.1f}) "
      f"r={human.circle.r:.2f}, category {human.category!r}")

out.unlink()
