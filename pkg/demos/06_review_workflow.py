"""Drive the human-in-the-loop review service end to end, in process.

Loads a fused set, walks the low-consensus review queue the way the browser
client does (count ascending, then score ascending), applies edits through
the HTTP API, proves the edit log replays to the live state, and exports
the corrected GeoJSON.
"""

from pathlib import Path

from fastapi.testclient import TestClient

from circlefuse import (
    ModelRun,
    ReviewState,
    SlideGeometry,
    SynthConfig,
    WcfConfig,
    categorize,
    create_app,
    nms,
    replay,
    simulate_ensemble,
    wcf,
)

cfg = SynthConfig(seed=11, slide=SlideGeometry("demo", 5888, 5888), n_objects=40)
gt, runs = simulate_ensemble(cfg)
deduped = [ModelRun(r.model_id, nms(r.detections), r.source) for r in runs]
fused = categorize(wcf(deduped, WcfConfig()))

state = ReviewState(
    fused, slide_id="demo", width=cfg.slide.width, height=cfg.slide.height,
    export_path=Path("reviewed.geojson"),
)
client = TestClient(create_app(state))

meta = client.get("/api/slide").json()
print("slide:", meta["slide_id"], meta["width"], "x", meta["height"])
print("consensus counts:", meta["counts"])

# The review queue: low-consensus first, weakest scores first.
queue = sorted(
    client.get("/api/detections", params={"max_count": 2}).json(),
    key=lambda d: (d["count"], d["score"]),
)
print(f"\nreview queue ({len(queue)} items):")
for item in queue:
    print(f"  {item['id']}  count={item['count']} score={item['score']:.3f}")

if queue:
    first = queue[0]
    client.post("/api/edits", json={
        "op": "reject", "target_id": first["id"], "revision": first["revision"],
        "actor": "demo-reviewer",
    })
    print(f"\nrejected {first['id']} (likely false positive)")
if len(queue) > 1:
    second = queue[1]
    client.post("/api/edits", json={
        "op": "move", "target_id": second["id"], "revision": second["revision"],
        "payload": {"dx": 6, "dy": -4}, "actor": "demo-reviewer",
    })
    print(f"nudged {second['id']} by (6, -4)")
client.post("/api/edits", json={
    "op": "add", "payload": {"cx": 777, "cy": 777, "r": 180}, "actor": "demo-reviewer",
})
print("added one circle the models missed")

rebuilt = replay(
    state.initial_fused(), state.edit_log,
    {"slide_id": state.slide_id, "width": state.width, "height": state.height},
)
same = {k: v.to_dict() for k, v in rebuilt.records.items()} == {
    k: v.to_dict() for k, v in state.records.items()
}
print("\nedit-log replay reproduces live state:", same)

export = client.post("/api/export", json={}).json()
print(f"exported {export['feature_count']} features to {export['path']}")
print(f"edit log at {export['edit_log_path']}")

Path(export["path"]).unlink()
Path(export["edit_log_path"]).unlink()
