"""Seeded synthetic ensembles: planted ground truth plus K noisy model runs.

Stands in for a real model ensemble at desk scale. Ground truth circles are
rejection-sampled to stay discrete (pairwise cIoU < 0.3, fully inside the
slide); each simulated model independently misses objects, jitters centers
and radii with Gaussian noise, and sprinkles Poisson false positives. All
randomness derives from (seed, model_index) streams, so runs are
reproducible and models are independent but re-generable in any order.
"""

from __future__ import annotations

import bisect
import math
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._grid import NeighborGrid
from .backends import DEFAULT_LABEL, Detection, DetectionFile, ModelRun, detection_sort_key
from .geometry import Circle, ciou
from .tiling import Patch, SlideGeometry, from_slide_coords

__all__ = [
    "SynthConfig",
    "GroundTruthSet",
    "generate_ground_truth",
    "simulate_model",
    "simulate_ensemble",
    "ground_truth_document",
    "parse_ground_truth_document",
    "write_ground_truth",
    "read_ground_truth",
    "runs_to_detection_files",
]

GT_SCHEMA = "circlefuse-gt/1"
GT_MAX_PAIRWISE_CIOU = 0.3
FP_MAX_GT_CIOU = 0.05


def _default_slide() -> SlideGeometry:
    return SlideGeometry("synthetic", 5888, 5888)


@dataclass(slots=True)
class SynthConfig:
    """Knobs for the synthetic ensemble.

    Defaults are the noisy desk-scale benchmark setting: 5 models, 15% miss
    rate, 4 px center jitter, 3 px radius jitter, and a false-positive rate
    that puts single-model precision near 0.85.
    """

    seed: int = 0
    slide: SlideGeometry = field(default_factory=_default_slide)
    n_objects: int = 137
    radius_range: tuple[float, float] = (150.0, 250.0)
    n_models: int = 5
    center_jitter_sigma: float = 4.0
    radius_jitter_sigma: float = 3.0
    miss_rate: float = 0.15
    fp_rate: float = 0.59  # per model per megapixel; ~0.85 single-model precision
    tp_score_range: tuple[float, float] = (0.30, 0.99)
    fp_score_range: tuple[float, float] = (0.05, 0.90)
    # Fraction of objects proposed adjacent to an already-placed object;
    # glomeruli pack into cortical clusters rather than spreading uniformly.
    clustering: float = 0.7

    def __post_init__(self):
        if self.n_objects < 0:
            raise ValueError("n_objects must be >= 0")
        if self.n_models < 1:
            raise ValueError("n_models must be >= 1")
        for name in ("radius_range", "tp_score_range", "fp_score_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} must be ordered, got ({lo}, {hi})")
        if not (0.0 <= self.miss_rate <= 1.0):
            raise ValueError("miss_rate must be in [0,1]")
        if self.fp_rate < 0:
            raise ValueError("fp_rate must be >= 0")
        if not (0.0 <= self.clustering <= 1.0):
            raise ValueError("clustering must be in [0,1]")
        for name in ("tp_score_range", "fp_score_range"):
            lo, hi = getattr(self, name)
            if not (0.0 <= lo and hi <= 1.0):
                raise ValueError(f"{name} must lie inside [0,1]")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "slide": {
                "slide_id": self.slide.slide_id,
                "width": self.slide.width,
                "height": self.slide.height,
            },
            "n_objects": self.n_objects,
            "radius_range": list(self.radius_range),
            "n_models": self.n_models,
            "center_jitter_sigma": self.center_jitter_sigma,
            "radius_jitter_sigma": self.radius_jitter_sigma,
            "miss_rate": self.miss_rate,
            "fp_rate": self.fp_rate,
            "tp_score_range": list(self.tp_score_range),
            "fp_score_range": list(self.fp_score_range),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        kwargs = dict(data)
        slide = kwargs.pop("slide", None)
        if slide is not None:
            kwargs["slide"] = SlideGeometry(
                slide.get("slide_id", "synthetic"), int(slide["width"]), int(slide["height"])
            )
        for name in ("radius_range", "tp_score_range", "fp_score_range"):
            if name in kwargs:
                kwargs[name] = tuple(kwargs[name])
        return cls(**kwargs)


@dataclass(slots=True)
class GroundTruthSet:
    slide_id: str
    circles: list[Circle]
    labels: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.labels:
            self.labels = [DEFAULT_LABEL] * len(self.circles)
        if len(self.labels) != len(self.circles):
            raise ValueError("labels and circles must have the same length")


def _gt_rng(cfg: SynthConfig) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, 0])


def _model_rng(cfg: SynthConfig, model_index: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, model_index + 1])


def generate_ground_truth(cfg: SynthConfig) -> GroundTruthSet:
    """Plant n_objects circles, rejection-sampled to pairwise cIoU < 0.3.

    A `clustering` fraction of proposals lands adjacent to an already-placed
    circle (random direction, near-touching distance), the rest uniformly
    over the slide; every proposal is rejected unless it stays fully inside
    the slide and below the pairwise-overlap cap. Deterministic for a given
    seed. Raises if the slide cannot fit the requested density within a
    bounded number of rejection rounds.
    """
    rng = _gt_rng(cfg)
    w, h = cfg.slide.width, cfg.slide.height
    r_lo, r_hi = cfg.radius_range
    if 2 * r_lo > w or 2 * r_lo > h:
        raise ValueError(f"slide {w}x{h} cannot contain a circle of radius {r_lo}")

    grid = NeighborGrid(cell_size=2.0 * r_hi)
    circles: list[Circle] = []
    max_attempts = 1000 + 200 * cfg.n_objects
    attempts = 0
    while len(circles) < cfg.n_objects:
        if attempts >= max_attempts:
            raise RuntimeError(
                f"placed only {len(circles)}/{cfg.n_objects} ground-truth circles after "
                f"{max_attempts} attempts; lower the object density or grow the slide"
            )
        attempts += 1
        r = float(rng.uniform(r_lo, r_hi))
        if 2 * r > w or 2 * r > h:
            continue
        if circles and rng.random() < cfg.clustering:
            anchor = circles[int(rng.integers(len(circles)))]
            dist = (anchor.r + r) * float(rng.uniform(0.52, 0.85))
            theta = float(rng.uniform(0.0, 2.0 * math.pi))
            cx = anchor.cx + dist * math.cos(theta)
            cy = anchor.cy + dist * math.sin(theta)
            if not (r <= cx <= w - r and r <= cy <= h - r):
                continue
        else:
            cx = float(rng.uniform(r, w - r))
            cy = float(rng.uniform(r, h - r))
        cand = Circle(cx, cy, r)
        ok = all(
            ciou(cand, circles[j]) < GT_MAX_PAIRWISE_CIOU
            for j in grid.neighbors(cx, cy, r)
        )
        if ok:
            grid.insert(len(circles), cx, cy, r)
            circles.append(cand)
    return GroundTruthSet(slide_id=cfg.slide.slide_id, circles=circles)


def simulate_model(gt: GroundTruthSet, cfg: SynthConfig, model_index: int) -> ModelRun:
    """One noisy model's slide-level detections for the planted ground truth.

    Per ground-truth circle: emitted with probability 1 - miss_rate, center
    perturbed by isotropic Gaussian noise, radius perturbed by Gaussian
    noise floored at 1 px, score uniform in tp_score_range. False positives
    are Poisson at fp_rate per megapixel with fp_score_range scores.
    """
    rng = _model_rng(cfg, model_index)
    model_id = f"model_{model_index + 1}"
    w, h = cfg.slide.width, cfg.slide.height
    detections: list[Detection] = []

    for circle, label in zip(gt.circles, gt.labels):
        if rng.random() < cfg.miss_rate:
            continue
        dx, dy = rng.normal(0.0, cfg.center_jitter_sigma, size=2)
        dr = rng.normal(0.0, cfg.radius_jitter_sigma)
        score = float(rng.uniform(*cfg.tp_score_range))
        jittered = Circle(circle.cx + float(dx), circle.cy + float(dy), max(1.0, circle.r + float(dr)))
        detections.append(Detection(jittered, score, model_id, label))

    # False positives never correspond to a planted object (otherwise they
    # would match at evaluation time and fp_rate would not control
    # precision), so their placement is rejection-sampled off the ground
    # truth.
    gt_grid = NeighborGrid(cell_size=2.0 * max((c.r for c in gt.circles), default=1.0))
    for j, c in enumerate(gt.circles):
        gt_grid.insert(j, c.cx, c.cy, c.r)

    n_fp = int(rng.poisson(cfg.fp_rate * (w * h / 1e6)))
    r_lo, r_hi = cfg.radius_range
    for _ in range(n_fp):
        candidate = None
        for _attempt in range(200):
            r = float(rng.uniform(r_lo, r_hi))
            cx = float(rng.uniform(min(r, w - r), max(r, w - r))) if 2 * r <= w else w / 2.0
            cy = float(rng.uniform(min(r, h - r), max(r, h - r))) if 2 * r <= h else h / 2.0
            candidate = Circle(cx, cy, r)
            if all(
                ciou(candidate, gt.circles[j]) < FP_MAX_GT_CIOU
                for j in gt_grid.neighbors(cx, cy, r)
            ):
                break
        score = float(rng.uniform(*cfg.fp_score_range))
        detections.append(Detection(candidate, score, model_id, DEFAULT_LABEL))

    detections.sort(key=detection_sort_key)
    return ModelRun(model_id=model_id, detections=detections, source="synthetic")


def simulate_ensemble(cfg: SynthConfig) -> tuple[GroundTruthSet, list[ModelRun]]:
    gt = generate_ground_truth(cfg)
    return gt, [simulate_model(gt, cfg, k) for k in range(cfg.n_models)]


# --- ground-truth file format (circlefuse-gt/1) ---


def ground_truth_document(gt: GroundTruthSet) -> dict:
    return {
        "schema": GT_SCHEMA,
        "slide_id": gt.slide_id,
        "circles": [
            {"cx": c.cx, "cy": c.cy, "r": c.r, "label": label}
            for c, label in zip(gt.circles, gt.labels)
        ],
    }


def parse_ground_truth_document(doc: dict) -> GroundTruthSet:
    if not isinstance(doc, dict) or doc.get("schema") != GT_SCHEMA:
        raise ValueError(f"not a {GT_SCHEMA} document")
    circles, labels = [], []
    for i, entry in enumerate(doc.get("circles", [])):
        try:
            circles.append(Circle(float(entry["cx"]), float(entry["cy"]), float(entry["r"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"circles[{i}]: {exc}") from exc
        labels.append(entry.get("label", DEFAULT_LABEL))
    return GroundTruthSet(slide_id=doc.get("slide_id", ""), circles=circles, labels=labels)


def write_ground_truth(gt: GroundTruthSet, path: str | Path) -> None:
    Path(path).write_text(json.dumps(ground_truth_document(gt), indent=2), encoding="utf-8")


def read_ground_truth(path: str | Path) -> GroundTruthSet:
    return parse_ground_truth_document(json.loads(Path(path).read_text(encoding="utf-8")))


def runs_to_detection_files(
    runs: list[ModelRun], slide: SlideGeometry, patches: list[Patch]
) -> list[DetectionFile]:
    """Re-express slide-space runs as patch-local detection files.

    Each detection is attributed to every patch containing its center (after
    clamping the center into slide bounds), which reproduces the duplication
    a real tiled detector produces on overlapping patches.
    """
    by_origin = {(p.x, p.y): p for p in patches}
    xs = sorted({p.x for p in patches})
    ys = sorted({p.y for p in patches})
    w = patches[0].w
    h = patches[0].h

    def covering_starts(starts: list[int], extent: int, coord: float) -> list[int]:
        lo = bisect.bisect_right(starts, coord - extent)
        hi = bisect.bisect_right(starts, coord)
        return starts[lo:hi]

    files = []
    for run in runs:
        df = DetectionFile(model_id=run.model_id, slide_id=slide.slide_id)
        for det in run.detections:
            px = min(max(det.circle.cx, 0.0), slide.width - 1e-9)
            py = min(max(det.circle.cy, 0.0), slide.height - 1e-9)
            for x in covering_starts(xs, w, px):
                for y in covering_starts(ys, h, py):
                    patch = by_origin[(x, y)]
                    local = from_slide_coords(patch, det.circle)
                    df.patches.setdefault(patch.patch_id, []).append(
                        Detection(local, det.score, det.model_id, det.label)
                    )
        files.append(df)
    return files
