"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines as they complete. Tolerances and instance counts are pinned here and
must not be loosened.
"""

import json
import time
from dataclasses import replace

import numpy as np
import pytest
from fastapi.testclient import TestClient

from circlefuse import (
    Circle,
    Detection,
    EvalConfig,
    FusedDetection,
    ModelRun,
    ReviewState,
    SlideGeometry,
    SynthConfig,
    TilingConfig,
    WcfConfig,
    average_precision,
    bench_table1,
    categorize,
    ciou,
    create_app,
    evaluate,
    export_geojson,
    fuse_runs,
    fused_document,
    generate_patches,
    import_geojson,
    intersection_area,
    match_at_threshold,
    nms,
    paired_sign_test,
    replay,
    simulate_ensemble,
    wcf,
)
from circlefuse.pipeline import dump_json

from conftest import as_detection, as_tuple
from reference import (
    mc_intersection_area,
    random_detection_tuples,
    ref_match,
    ref_nms,
    ref_wcf,
)


def ok(line):
    print(f"PASS: {line}")


class TestGeometryOracle:
    def test_monte_carlo_and_invariants(self):
        t_start = time.perf_counter()
        rng = np.random.default_rng(2024)

        worst = 0.0
        for _ in range(100):
            a = Circle(rng.uniform(0, 300), rng.uniform(0, 300), rng.uniform(5, 80))
            b = Circle(rng.uniform(0, 300), rng.uniform(0, 300), rng.uniform(5, 80))
            analytic = intersection_area(a, b)
            estimate = mc_intersection_area(
                (a.cx, a.cy, a.r), (b.cx, b.cy, b.r), 10_000_000, rng
            )
            union = a.area + b.area - analytic
            err = abs(analytic - estimate)
            assert err <= 3e-3 * union
            worst = max(worst, err / union)

        rows = rng.uniform(0, 500, (100_000, 6))
        for row in rows:
            a = Circle(row[0], row[1], 1 + row[2] / 10)
            b = Circle(row[3], row[4], 1 + row[5] / 10)
            v = ciou(a, b)
            assert 0.0 <= v <= 1.0
            assert abs(v - ciou(b, a)) < 1e-12

        elapsed = time.perf_counter() - t_start
        assert elapsed < 60.0
        ok(
            f"geometry oracle: 100 MC pairs (1e7 samples) worst err "
            f"{worst:.2e} <= 3e-3 x union; symmetry+bounds on 1e5 pairs; "
            f"{elapsed:.1f}s < 60s"
        )


class TestTilingCoverage:
    def test_coverage_and_interior_multiplicity(self):
        t_start = time.perf_counter()
        rng = np.random.default_rng(7)
        patch = 512
        cfg = TilingConfig(patch, 0.5)
        sizes = [(int(rng.integers(40, 3000)), int(rng.integers(40, 3000))) for _ in range(44)]
        sizes += [(300, 700), (511, 513), (512, 512), (1024, 1024), (100, 2000), (2000, 100)]
        assert len(sizes) == 50

        for w, h in sizes:
            slide = SlideGeometry("s", w, h)
            cover = np.zeros((h, w), dtype=np.uint8)
            for p in generate_patches(slide, cfg):
                cover[p.y : p.y + p.h, p.x : p.x + p.w] += 1
            assert (cover >= 1).all(), f"uncovered pixel in {w}x{h}"
            if w >= 2 * patch and h >= 2 * patch:
                interior = cover[patch : h - patch, patch : w - patch]
                if interior.size:
                    assert (interior == 4).all(), f"interior multiplicity wrong in {w}x{h}"

        elapsed = time.perf_counter() - t_start
        assert elapsed < 10.0
        ok(f"tiling coverage: 50 slide sizes all covered, interior x4; {elapsed:.1f}s < 10s")


class TestNmsProperties:
    def test_thousand_randomized_instances(self):
        rng = np.random.default_rng(11)
        for i in range(1000):
            tuples = random_detection_tuples(rng, int(rng.integers(0, 51)))
            dets = [as_detection(t) for t in tuples]
            kept = nms(dets, 0.5)
            # idempotence
            assert nms(kept, 0.5) == kept
            # pairwise guarantee
            for j, a in enumerate(kept):
                for b in kept[j + 1 :]:
                    assert ciou(a.circle, b.circle) <= 0.5
            # permutation invariance + brute-force agreement
            shuffled = list(dets)
            rng.shuffle(shuffled)
            assert nms(shuffled, 0.5) == kept
            assert [as_tuple(d) for d in kept] == ref_nms(tuples, 0.5)
        ok("NMS properties: idempotence, pairwise bound, permutation invariance on 1000 instances")


class TestWcfOracle:
    def test_worked_example_exact(self):
        a = Detection(Circle(100, 100, 50), 0.9, "model1")
        b = Detection(Circle(104, 100, 50), 0.6, "model2")
        fused = wcf([ModelRun("model1", [a], "file"), ModelRun("model2", [b], "file")], WcfConfig())
        assert len(fused) == 1
        f = fused[0]
        assert f.circle.cx == (0.9 * 100 + 0.6 * 104) / (0.9 + 0.6)
        assert abs(f.circle.cx - 101.6) < 1e-9
        assert f.circle.cy == 100.0
        assert f.circle.r == 50.0
        assert f.score == 0.75
        assert f.count == 2
        ok("WCF worked example: fused (101.6, 100, 50), score 0.75, count 2")

    def test_thousand_small_instances_vs_brute_force(self):
        rng = np.random.default_rng(13)
        policies = ["count_or_score", "count_and_score", "count_only"]
        for i in range(1000):
            tuples = random_detection_tuples(rng, int(rng.integers(1, 11)))
            policy = policies[i % 3]
            t_count = int(rng.integers(1, 3))
            cfg = WcfConfig(t_count=t_count, t_score=0.9, retention_policy=policy)

            by_model = {}
            for t in tuples:
                by_model.setdefault(t[4], []).append(as_detection(t))
            runs = [ModelRun(m, ds, "synthetic") for m, ds in by_model.items()]
            fused = wcf(runs, cfg)
            expected = ref_wcf(tuples, t_match=0.5, t_count=t_count, t_score=0.9, policy=policy)

            assert len(fused) == len(expected)
            got = sorted(
                (f.circle.cx, f.circle.cy, f.circle.r, f.score, f.count,
                 tuple(sorted(as_tuple(m) for m in f.members)))
                for f in fused
            )
            want = sorted(
                (e["circle"][0], e["circle"][1], e["circle"][2], e["score"], e["count"],
                 tuple(sorted(e["members"])))
                for e in expected
            )
            for g, w in zip(got, want):
                assert g[5] == w[5], "cluster membership differs"
                assert g[4] == w[4], "count differs"
                for gv, wv in zip(g[:4], w[:4]):
                    assert abs(gv - wv) <= 1e-9
        ok("WCF small-instance oracle: 1000 instances match brute-force reference within 1e-9")


class TestNoiselessFixedPoint:
    def test_identical_runs_and_pipeline_map(self):
        base = [
            Detection(Circle(200.0 + 97 * i, 150.0 + 61 * (i % 9), 40.0 + (i % 7)), 0.6 + 0.02 * i, "m0")
            for i in range(12)
        ]
        k = 5
        runs = [
            ModelRun(f"m{j}", [Detection(d.circle, d.score, f"m{j}") for d in base], "synthetic")
            for j in range(k)
        ]
        single = nms(runs[0].detections, 0.5)
        fused = wcf(runs, WcfConfig())
        got = sorted((f.circle.cx, f.circle.cy, f.circle.r) for f in fused)
        want = sorted((d.circle.cx, d.circle.cy, d.circle.r) for d in single)
        assert len(got) == len(want)
        for g, w in zip(got, want):
            # weighted mean of k identical values reproduces them only to
            # float roundoff; 1e-9 is the fusion-oracle tolerance
            assert all(abs(a - b) <= 1e-9 for a, b in zip(g, w))
        assert all(f.count == k for f in fused)

        cfg = SynthConfig(
            seed=5, slide=SlideGeometry("noiseless", 3000, 3000), n_objects=25,
            miss_rate=0.0, fp_rate=0.0, center_jitter_sigma=0.0, radius_jitter_sigma=0.0,
        )
        gt, model_runs = simulate_ensemble(cfg)
        fused_pipeline, _ = fuse_runs(model_runs, WcfConfig())
        report = evaluate(fused_pipeline, gt.circles)
        assert report.map_50_95 == 1.0
        assert report.average_recall == 1.0
        ok("noiseless fixed point: K identical runs reproduce single-model geometry, counts=K, mAP=1.0")


class TestEvaluatorOracle:
    def test_ap_two_gt_one_tp(self):
        got = average_precision([True], [0.9], n_gt=2, interpolation_points=101)
        assert abs(got - 51 / 101) < 1e-12
        ok("evaluator: AP(2 GT, 1 TP) = 51/101 within 1e-12")

    def test_thousand_matching_instances_vs_brute_force(self):
        rng = np.random.default_rng(17)
        for _ in range(1000):
            n_p = int(rng.integers(0, 7))
            n_g = int(rng.integers(0, 7))
            preds = sorted(
                (
                    Detection(
                        Circle(rng.uniform(0, 120), rng.uniform(0, 120), rng.uniform(4, 30)),
                        float(rng.uniform(0, 1)),
                        "m",
                    )
                    for _ in range(n_p)
                ),
                key=lambda d: -d.score,
            )
            gts = [
                Circle(rng.uniform(0, 120), rng.uniform(0, 120), rng.uniform(4, 30))
                for _ in range(n_g)
            ]
            t = float(rng.uniform(0.2, 0.9))
            got = match_at_threshold(preds, gts, t)
            want = ref_match(
                [(p.circle.cx, p.circle.cy, p.circle.r) for p in preds],
                [(g.cx, g.cy, g.r) for g in gts],
                t,
            )
            assert got == want
            assert sum(got) == sum(want)
        ok("evaluator: greedy matching equals brute-force reference on 1000 instances")

    def test_threshold_monotonicity_on_benchmark_runs(self):
        result = bench_table1(SynthConfig(seed=0), seeds=[0, 1, 2])
        for method, reports in result.reports.items():
            for report in reports:
                values = [report.ap_per_threshold[t] for t in sorted(report.ap_per_threshold)]
                assert all(a >= b - 1e-12 for a, b in zip(values, values[1:])), method
        ok("evaluator: AP threshold-monotonicity holds on all benchmark runs")


class TestDirectionalTable1:
    def test_method_ordering_with_sign_tests(self):
        t_start = time.perf_counter()
        result = bench_table1(SynthConfig(seed=0), seeds=list(range(20)))

        wcf_s = result.series("wcf")
        nms_s = result.series("nms-pool")
        soft_s = result.series("soft-nms-pool")
        avg_s = result.series("model avg.")

        assert result.mean("wcf") > result.mean("nms-pool")
        assert result.mean("wcf") > result.mean("model avg.")
        assert result.mean("nms-pool") > result.mean("soft-nms-pool")

        p_wcf_nms = paired_sign_test(wcf_s, nms_s)
        p_wcf_avg = paired_sign_test(wcf_s, avg_s)
        p_nms_soft = paired_sign_test(nms_s, soft_s)
        assert p_wcf_nms < 0.05
        assert p_wcf_avg < 0.05
        assert p_nms_soft < 0.05

        elapsed = time.perf_counter() - t_start
        assert elapsed < 300.0
        ok(
            "directional Table-1 ordering over 20 seeds: "
            f"WCF {result.mean('wcf'):.3f} > NMS-pool {result.mean('nms-pool'):.3f} "
            f"> Soft-NMS-pool {result.mean('soft-nms-pool'):.3f}, "
            f"WCF > model avg. {result.mean('model avg.'):.3f}; "
            f"sign-test p = {p_wcf_nms:.2e}/{p_wcf_avg:.2e}/{p_nms_soft:.2e}; "
            f"{elapsed:.0f}s < 300s"
        )


class TestThroughput:
    def test_fuse_and_evaluate_100k_detections(self):
        cfg = SynthConfig(
            seed=42, slide=SlideGeometry("big", 20480, 20480), n_objects=20000,
            radius_range=(20.0, 60.0), miss_rate=0.0, fp_rate=0.0,
            center_jitter_sigma=2.0, radius_jitter_sigma=1.0, clustering=0.0,
        )
        gt, runs = simulate_ensemble(cfg)
        assert sum(len(r.detections) for r in runs) == 100_000

        t_start = time.perf_counter()
        fused1, _ = fuse_runs(runs, WcfConfig(), workers=1)
        evaluate(fused1, gt.circles)
        elapsed = time.perf_counter() - t_start
        assert elapsed < 10.0

        fused8, _ = fuse_runs(runs, WcfConfig(), workers=8)
        bytes1 = dump_json(fused_document(fused1, "big")).encode()
        bytes8 = dump_json(fused_document(fused8, "big")).encode()
        assert bytes1 == bytes8
        ok(
            f"throughput: fuse+evaluate 5x20000 detections in {elapsed:.1f}s < 10s; "
            "byte-identical at 1 and 8 workers"
        )


class TestGeojsonRoundTrip:
    def test_hundred_randomized_sets(self):
        rng = np.random.default_rng(23)
        for i in range(100):
            tuples = random_detection_tuples(rng, int(rng.integers(1, 30)))
            by_model = {}
            for t in tuples:
                by_model.setdefault(t[4], []).append(as_detection(t))
            fused = categorize(
                wcf(
                    [ModelRun(m, ds, "synthetic") for m, ds in by_model.items()],
                    WcfConfig(t_count=1, retention_policy="count_only"),
                )
            )
            doc = export_geojson(fused, f"slide-{i}")

            for f, feature in zip(fused, doc["features"]):
                ring = feature["geometry"]["coordinates"][0]
                assert len(ring) == 65
                tol = 1e-6 * max(1.0, f.circle.r)
                for x, y in ring[:-1]:
                    d = ((x - f.circle.cx) ** 2 + (y - f.circle.cy) ** 2) ** 0.5
                    assert abs(d - f.circle.r) <= tol

            result = import_geojson(doc)
            assert result.errors == []
            assert len(result.fused) == len(fused)
            for f, b in zip(fused, result.fused):
                assert abs(b.circle.cx - f.circle.cx) <= 1e-9
                assert abs(b.circle.cy - f.circle.cy) <= 1e-9
                assert abs(b.circle.r - f.circle.r) <= 1e-9
                assert abs(b.score - f.score) <= 1e-9
                assert b.count == f.count
                assert len(b.members) == len(f.members)
                for m_in, m_out in zip(f.members, b.members):
                    assert m_out.model_id == m_in.model_id
                    assert abs(m_out.circle.cx - m_in.circle.cx) <= 1e-9
                    assert abs(m_out.score - m_in.score) <= 1e-9
        ok("GeoJSON round trip: 100 randomized fused sets lossless within 1e-9; ring radii within 1e-6")


class TestReviewLoopSecondary:
    def make_fixture_state(self, tmp_path):
        fused = []
        i = 0
        for count, n in ((5, 40), (2, 3), (1, 2)):
            for _ in range(n):
                i += 1
                fused.append(
                    FusedDetection(
                        circle=Circle(100.0 * i, 40.0 + 50.0 * (i % 7), 30.0 + (i % 5)),
                        score=round(0.35 + 0.01 * i, 4),
                        count=count,
                        members=[],
                        category=f"consensus_{count}",
                    )
                )
        return ReviewState(
            fused, slide_id="fixture", width=8000, height=800,
            export_path=tmp_path / "reviewed.geojson",
        )

    def test_review_loop(self, tmp_path):
        state = self.make_fixture_state(tmp_path)
        client = TestClient(create_app(state))

        # Queue: filtered to low consensus, ordered count asc then score asc
        # (the ordering rule the review UI applies to build its worklist).
        items = client.get("/api/detections", params={"max_count": 2}).json()
        queue = sorted(items, key=lambda d: (d["count"], d["score"]))
        assert len(queue) == 5
        assert [d["count"] for d in queue] == [1, 1, 2, 2, 2]
        assert queue[0]["score"] <= queue[1]["score"]
        assert queue[2]["score"] <= queue[3]["score"] <= queue[4]["score"]

        # Round-trip each edit op through the service.
        first, second = queue[0], queue[1]
        r = client.post("/api/edits", json={
            "op": "accept", "target_id": first["id"], "revision": first["revision"]})
        assert r.status_code == 200 and r.json()["status"] == "accepted"
        r = client.post("/api/edits", json={
            "op": "reject", "target_id": second["id"], "revision": second["revision"]})
        assert r.status_code == 200 and r.json()["status"] == "rejected"
        r = client.post("/api/edits", json={
            "op": "move", "target_id": queue[2]["id"], "revision": queue[2]["revision"],
            "payload": {"dx": 5, "dy": -3}})
        assert r.status_code == 200
        assert r.json()["cx"] == queue[2]["cx"] + 5
        r = client.post("/api/edits", json={
            "op": "resize", "target_id": queue[3]["id"], "revision": queue[3]["revision"],
            "payload": {"new_r": 63}})
        assert r.status_code == 200 and r.json()["r"] == 63
        r = client.post("/api/edits", json={"op": "add", "payload": {"cx": 400, "cy": 400, "r": 35}})
        assert r.status_code == 200 and r.json()["status"] == "human_added"

        # Edit-log replay reproduces the live state exactly.
        rebuilt = replay(
            state.initial_fused(), state.edit_log,
            {"slide_id": state.slide_id, "width": state.width, "height": state.height},
        )
        assert {k: v.to_dict() for k, v in rebuilt.records.items()} == {
            k: v.to_dict() for k, v in state.records.items()
        }

        # Export excludes the one rejection: 45 + 1 added - 1 rejected - ... = 45
        body = client.post("/api/export", json={}).json()
        assert body["feature_count"] == 45  # 44 originals + 1 human-added
        doc = json.loads(open(body["path"]).read())
        assert len(doc["features"]) == 45

        # And with only the rejection (fresh fixture): 44 features.
        fresh_dir = tmp_path / "fresh"
        fresh_dir.mkdir()
        state2 = self.make_fixture_state(fresh_dir)
        client2 = TestClient(create_app(state2))
        target = client2.get("/api/detections", params={"max_count": 1}).json()[0]
        client2.post("/api/edits", json={
            "op": "reject", "target_id": target["id"], "revision": target["revision"]})
        body2 = client2.post("/api/export", json={}).json()
        assert body2["feature_count"] == 44
        ok(
            "review loop: queue of 5 in count-then-score order; accept/reject/move/resize/add "
            "round-trip; replay == live state; export after one rejection has 44 features"
        )
