"""Independent brute-force references used as oracles by the test suite.

Everything here is deliberately coded without the package's grid index,
candidate caching, or vectorization, and circle overlap uses the
half-angle/segment formulation rather than the package's Heron-based one.
"""

from __future__ import annotations

import math

import numpy as np


def ref_intersection_area(a, b):
    """(cx, cy, r) tuples; circular-segment formulation via full apex angles."""
    ax, ay, ar = a
    bx, by, br = b
    d = math.sqrt((bx - ax) ** 2 + (by - ay) ** 2)
    if d >= ar + br:
        return 0.0
    if d <= abs(ar - br):
        rm = min(ar, br)
        return math.pi * rm * rm
    alpha = 2.0 * math.acos(max(-1.0, min(1.0, (d * d + ar * ar - br * br) / (2.0 * d * ar))))
    beta = 2.0 * math.acos(max(-1.0, min(1.0, (d * d + br * br - ar * ar) / (2.0 * d * br))))
    return 0.5 * ar * ar * (alpha - math.sin(alpha)) + 0.5 * br * br * (beta - math.sin(beta))


def ref_ciou(a, b):
    inter = ref_intersection_area(a, b)
    return inter / (math.pi * a[2] ** 2 + math.pi * b[2] ** 2 - inter)


def mc_intersection_area(a, b, n, rng) -> float:
    """Monte-Carlo lens area: uniform samples over the circles' shared bbox."""
    ax, ay, ar = a
    bx, by, br = b
    x0, x1 = max(ax - ar, bx - br), min(ax + ar, bx + br)
    y0, y1 = max(ay - ar, by - br), min(ay + ar, by + br)
    if x0 >= x1 or y0 >= y1:
        return 0.0
    xs = rng.uniform(x0, x1, n)
    ys = rng.uniform(y0, y1, n)
    inside = ((xs - ax) ** 2 + (ys - ay) ** 2 <= ar * ar) & (
        (xs - bx) ** 2 + (ys - by) ** 2 <= br * br
    )
    return float(inside.mean()) * (x1 - x0) * (y1 - y0)


def _sort_key(det):
    # det: (cx, cy, r, score, model_id)
    return (-det[3], det[0], det[1], det[2], det[4])


def ref_nms(detections, t_ciou=0.5):
    """Naive greedy NMS over (cx, cy, r, score, model_id) tuples."""
    remaining = sorted(detections, key=_sort_key)
    kept = []
    while remaining:
        top = remaining.pop(0)
        kept.append(top)
        remaining = [
            d for d in remaining if ref_ciou(top[:3], d[:3]) <= t_ciou
        ]
    return kept


def _weighted_mean_circle(members):
    sw = swx = swy = swr = 0.0
    for cx, cy, r, s, _m in members:
        sw += s
        swx += s * cx
        swy += s * cy
        swr += s * r
    if sw > 0:
        return (swx / sw, swy / sw, swr / sw)
    n = len(members)
    return (
        sum(m[0] for m in members) / n,
        sum(m[1] for m in members) / n,
        sum(m[2] for m in members) / n,
    )


def ref_wcf(detections, t_match=0.5, t_count=2, t_score=0.9, policy="count_or_score"):
    """Naive greedy weighted circle fusion over pooled detection tuples.

    Returns retained clusters as dicts with keys circle, score, count,
    members (input tuples).
    """
    pooled = sorted(detections, key=_sort_key)
    clusters = []
    for det in pooled:
        best_i = -1
        best_o = 0.0
        for i, cl in enumerate(clusters):
            o = ref_ciou(det[:3], cl["circle"])
            if o > best_o:
                best_o = o
                best_i = i
        if (
            best_i >= 0
            and best_o >= t_match
            and det[4] not in {m[4] for m in clusters[best_i]["members"]}
        ):
            cl = clusters[best_i]
            cl["members"].append(det)
            cl["circle"] = _weighted_mean_circle(cl["members"])
        else:
            clusters.append({"members": [det], "circle": det[:3]})

    out = []
    for cl in clusters:
        members = cl["members"]
        count = len({m[4] for m in members})
        score = sum(m[3] for m in members) / len(members)
        by_count = count >= t_count
        by_score = score >= t_score
        if policy == "count_or_score":
            keep = by_count or by_score
        elif policy == "count_and_score":
            keep = by_count and by_score
        else:
            keep = by_count
        if keep:
            out.append(
                {"circle": cl["circle"], "score": score, "count": count, "members": members}
            )
    return out


def ref_match(pred_circles, gt_circles, t):
    """Naive greedy matcher; preds must already be score-ordered.

    pred_circles: (cx, cy, r) tuples in score order. Returns TP flags.
    """
    matched = set()
    flags = []
    for p in pred_circles:
        best_j = -1
        best_o = 0.0
        for j, g in enumerate(gt_circles):
            if j in matched:
                continue
            o = ref_ciou(p, g)
            if o > best_o:
                best_o = o
                best_j = j
        if best_j >= 0 and best_o >= t:
            matched.add(best_j)
            flags.append(True)
        else:
            flags.append(False)
    return flags


def ref_average_precision(flags, n_gt, points=101):
    """Direct loop over recall levels; no vectorization."""
    if n_gt == 0:
        return 1.0 if not flags else 0.0
    tp = 0
    fp = 0
    pr = []
    for f in flags:
        if f:
            tp += 1
        else:
            fp += 1
        pr.append((tp / n_gt, tp / (tp + fp)))
    total = 0.0
    for i in range(points):
        level = i / (points - 1)
        best = 0.0
        for recall, precision in pr:
            if recall >= level and precision > best:
                best = precision
        total += best
    return total / points


def random_detection_tuples(rng: np.random.Generator, n, n_models=5, extent=400.0, r_range=(8.0, 40.0)):
    """Random pooled detections as (cx, cy, r, score, model_id) tuples."""
    out = []
    for _ in range(n):
        out.append(
            (
                float(rng.uniform(0, extent)),
                float(rng.uniform(0, extent)),
                float(rng.uniform(*r_range)),
                float(rng.uniform(0, 1)),
                f"model_{int(rng.integers(1, n_models + 1))}",
            )
        )
    return out
