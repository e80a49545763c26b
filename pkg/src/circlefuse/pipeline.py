"""End-to-end orchestration: tile, ingest, assemble, NMS, fuse, export.

Every run produces a manifest recording the configuration, input digests,
per-stage counts, and wall-clock per stage. Per-patch backend failures are
recorded in the manifest instead of aborting the run; identical inputs and
configuration reproduce byte-identical fused output regardless of worker
count.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .backends import (
    DetectionFile,
    ModelRun,
    assemble,
    load_detection_file,
    remote_model_run,
)
from .fusion import FusedDetection, WcfConfig, categorize, fused_document, wcf_with_stats
from .geojson_io import export_geojson
from .suppression import nms
from .tiling import Patch, SlideGeometry, TilingConfig, generate_patches

__all__ = ["BackendConfig", "PipelineResult", "run_pipeline", "fuse_runs", "dump_json"]

MANIFEST_SCHEMA = "circlefuse-manifest/1"


@dataclass(slots=True)
class BackendConfig:
    """Where detections come from: files on disk or a remote model server."""

    kind: str = "files"  # files | remote
    detection_files: tuple = ()
    endpoint: str | None = None
    remote_model_ids: tuple = ("remote",)
    retries: int = 3
    timeout: float = 30.0

    def __post_init__(self):
        if self.kind not in ("files", "remote"):
            raise ValueError(f"backend kind must be 'files' or 'remote', got {self.kind!r}")
        if self.kind == "files" and not self.detection_files:
            raise ValueError("files backend requires at least one detection file")
        if self.kind == "remote" and not self.endpoint:
            raise ValueError("remote backend requires an endpoint")


@dataclass(slots=True)
class PipelineResult:
    fused: list[FusedDetection]
    geojson: dict
    manifest: dict
    patches: list[Patch] = field(default_factory=list)
    runs: list[ModelRun] = field(default_factory=list)


def dump_json(obj: dict | list) -> str:
    """Canonical serialization used for all pipeline outputs."""
    return json.dumps(obj, indent=2)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _nms_per_model(runs: list[ModelRun], nms_ciou: float, workers: int) -> list[ModelRun]:
    # Results are merged by model index, so worker count cannot change output.
    def dedup(run: ModelRun) -> ModelRun:
        return ModelRun(run.model_id, nms(run.detections, nms_ciou), run.source)

    if workers <= 1:
        return [dedup(r) for r in runs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(dedup, runs))


def fuse_runs(
    runs: list[ModelRun],
    wcf_cfg: WcfConfig = WcfConfig(),
    *,
    nms_ciou: float = 0.5,
    workers: int = 1,
) -> tuple[list[FusedDetection], dict]:
    """Per-model NMS followed by weighted circle fusion and categorization.

    Returns the categorized fused list and a stage-count/timing dict.
    """
    stages = []
    t0 = time.perf_counter()
    deduped = _nms_per_model(runs, nms_ciou, workers)
    stages.append(
        {
            "name": "nms",
            "detections_in": sum(len(r.detections) for r in runs),
            "detections_out": sum(len(r.detections) for r in deduped),
            "seconds": round(time.perf_counter() - t0, 6),
        }
    )
    t0 = time.perf_counter()
    fused, n_clusters = wcf_with_stats(deduped, wcf_cfg)
    categorize(fused)
    stages.append(
        {
            "name": "wcf",
            "detections_in": sum(len(r.detections) for r in deduped),
            "clusters_formed": n_clusters,
            "fused_retained": len(fused),
            "seconds": round(time.perf_counter() - t0, 6),
        }
    )
    return fused, {"stages": stages}


def run_pipeline(
    slide: SlideGeometry,
    tiling_cfg: TilingConfig,
    backend_cfg: BackendConfig,
    wcf_cfg: WcfConfig,
    *,
    nms_ciou: float = 0.5,
    workers: int = 1,
    patches: list[Patch] | None = None,
) -> PipelineResult:
    """Run the full flow and return fused detections, GeoJSON, and manifest.

    `patches` overrides grid generation when the detection files were
    produced against a pre-existing patch list (e.g. written by `tile`).
    """
    manifest: dict = {
        "schema": MANIFEST_SCHEMA,
        "slide": {"slide_id": slide.slide_id, "width": slide.width, "height": slide.height},
        "config": {
            "tiling": {
                "patch_size": tiling_cfg.patch_size,
                "overlap_fraction": tiling_cfg.overlap_fraction,
            },
            "backend": backend_cfg.kind,
            "nms_ciou": nms_ciou,
            "wcf": {
                "t_match": wcf_cfg.t_match,
                "t_count": wcf_cfg.t_count,
                "t_score": wcf_cfg.t_score,
                "retention_policy": wcf_cfg.retention_policy,
            },
            "workers": workers,
        },
        "inputs": {},
        "stages": [],
        "failed_patches": [],
    }
    stages = manifest["stages"]

    t0 = time.perf_counter()
    if patches is None:
        patches = generate_patches(slide, tiling_cfg)
    stages.append({"name": "tile", "patches": len(patches), "seconds": round(time.perf_counter() - t0, 6)})

    t0 = time.perf_counter()
    if backend_cfg.kind == "files":
        files: list[DetectionFile] = []
        for p in backend_cfg.detection_files:
            p = Path(p)
            files.append(load_detection_file(p))
            manifest["inputs"][p.name] = _sha256(p)
        n_in = sum(len(dets) for f in files for dets in f.patches.values())
        stages.append(
            {"name": "ingest", "detections_in": n_in, "seconds": round(time.perf_counter() - t0, 6)}
        )
        t0 = time.perf_counter()
        runs = assemble(files, patches)
    else:
        runs = []
        n_in = 0
        for model_id in backend_cfg.remote_model_ids:
            run, failures = remote_model_run(
                backend_cfg.endpoint,
                model_id,
                slide.slide_id,
                patches,
                workers=workers,
                retries=backend_cfg.retries,
                timeout=backend_cfg.timeout,
            )
            runs.append(run)
            n_in += len(run.detections)
            manifest["failed_patches"].extend(
                {"model_id": model_id, "patch_id": pid, "reason": reason}
                for pid, reason in failures
            )
        stages.append(
            {"name": "ingest", "detections_in": n_in, "seconds": round(time.perf_counter() - t0, 6)}
        )
        t0 = time.perf_counter()

    n_assembled = sum(len(r.detections) for r in runs)
    stages.append(
        {
            "name": "assemble",
            "models": len(runs),
            "detections_out": n_assembled,
            "seconds": round(time.perf_counter() - t0, 6),
        }
    )

    fused, fuse_stats = fuse_runs(runs, wcf_cfg, nms_ciou=nms_ciou, workers=workers)
    stages.extend(fuse_stats["stages"])

    t0 = time.perf_counter()
    geojson = export_geojson(fused, slide.slide_id)
    stages.append(
        {"name": "export", "features": len(geojson["features"]), "seconds": round(time.perf_counter() - t0, 6)}
    )

    manifest["counts"] = {
        "detections_in": n_in,
        "detections_after_assembly": n_assembled,
        "detections_after_nms": fuse_stats["stages"][0]["detections_out"],
        "clusters_formed": fuse_stats["stages"][1]["clusters_formed"],
        "fused_retained": len(fused),
    }
    return PipelineResult(fused=fused, geojson=geojson, manifest=manifest, patches=patches, runs=runs)
