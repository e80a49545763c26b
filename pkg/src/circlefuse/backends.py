"""Sources of per-patch detections and assembly into slide-level model runs.

The reference path is file ingestion: one JSON detection file per model,
detections keyed by patch_id in patch-local coordinates
(schema "circlefuse-detections/1"). An optional HTTP client can pull
detections from a remote inference server instead; either way, assembly
translates everything into slide coordinates and applies the canonical
detection order so downstream stages are schedule-independent.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import httpx

from .geometry import Circle
from .tiling import Patch, to_slide_coords

__all__ = [
    "Detection",
    "ModelRun",
    "DetectionFile",
    "DetectionFileError",
    "BackendError",
    "detection_sort_key",
    "load_detection_file",
    "assemble",
    "infer_remote",
    "remote_model_run",
]

DETECTION_SCHEMA = "circlefuse-detections/1"
DEFAULT_LABEL = "glomerulus"


class DetectionFileError(ValueError):
    """Malformed or invalid detection file content."""


class BackendError(RuntimeError):
    """Remote inference failure for a single patch."""

    def __init__(self, message: str, patch_id: str):
        super().__init__(message)
        self.patch_id = patch_id


@dataclass(frozen=True, slots=True)
class Detection:
    circle: Circle
    score: float
    model_id: str
    label: str = DEFAULT_LABEL

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score must be in [0,1], got {self.score}")


@dataclass(slots=True)
class ModelRun:
    """All of one model's detections for a slide, in slide coordinates."""

    model_id: str
    detections: list[Detection]
    source: str = "file"  # file | remote | synthetic


@dataclass(slots=True)
class DetectionFile:
    """Parsed detection file: patch-local detections keyed by patch_id."""

    model_id: str
    slide_id: str
    patches: dict[str, list[Detection]] = field(default_factory=dict)


def detection_sort_key(d: Detection):
    """Canonical total order: score desc, then cx, cy, r, model_id asc."""
    return (-d.score, d.circle.cx, d.circle.cy, d.circle.r, d.model_id)


def _parse_detection(obj, model_id: str, where: str) -> Detection:
    if not isinstance(obj, dict):
        raise DetectionFileError(f"{where}: expected an object, got {type(obj).__name__}")
    for key in ("cx", "cy", "r", "score"):
        if key not in obj:
            raise DetectionFileError(f"{where}.{key}: missing required field")
        if not isinstance(obj[key], (int, float)) or isinstance(obj[key], bool):
            raise DetectionFileError(f"{where}.{key}: expected a number, got {obj[key]!r}")
    score = float(obj["score"])
    if not (0.0 <= score <= 1.0):
        raise DetectionFileError(f"{where}.score: {score} outside [0,1]")
    r = float(obj["r"])
    if r <= 0:
        raise DetectionFileError(f"{where}.r: radius must be > 0, got {r}")
    try:
        circle = Circle(float(obj["cx"]), float(obj["cy"]), r)
    except ValueError as exc:
        raise DetectionFileError(f"{where}: {exc}") from exc
    label = obj.get("label", DEFAULT_LABEL)
    if not isinstance(label, str):
        raise DetectionFileError(f"{where}.label: expected a string, got {label!r}")
    return Detection(circle=circle, score=score, model_id=model_id, label=label)


def parse_detection_document(doc, source_name: str = "<document>") -> DetectionFile:
    """Validate an in-memory detection document. Unknown fields are ignored."""
    if not isinstance(doc, dict):
        raise DetectionFileError(f"{source_name}: top level must be an object")
    schema = doc.get("schema")
    if schema != DETECTION_SCHEMA:
        raise DetectionFileError(
            f"{source_name}.schema: expected {DETECTION_SCHEMA!r}, got {schema!r}"
        )
    for key in ("model_id", "slide_id"):
        if not isinstance(doc.get(key), str):
            raise DetectionFileError(f"{source_name}.{key}: missing or not a string")
    patches_raw = doc.get("patches")
    if not isinstance(patches_raw, list):
        raise DetectionFileError(f"{source_name}.patches: missing or not an array")

    model_id = doc["model_id"]
    out = DetectionFile(model_id=model_id, slide_id=doc["slide_id"])
    for i, entry in enumerate(patches_raw):
        where = f"patches[{i}]"
        if not isinstance(entry, dict) or not isinstance(entry.get("patch_id"), str):
            raise DetectionFileError(f"{source_name}.{where}.patch_id: missing or not a string")
        dets_raw = entry.get("detections")
        if not isinstance(dets_raw, list):
            raise DetectionFileError(f"{source_name}.{where}.detections: missing or not an array")
        dets = [
            _parse_detection(d, model_id, f"{source_name}.{where}.detections[{j}]")
            for j, d in enumerate(dets_raw)
        ]
        out.patches.setdefault(entry["patch_id"], []).extend(dets)
    return out


def load_detection_file(path: str | Path) -> DetectionFile:
    """Load and validate one model's detection file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DetectionFileError(
            f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    return parse_detection_document(doc, source_name=str(path))


def assemble(run_files: list[DetectionFile], patches: list[Patch]) -> list[ModelRun]:
    """Translate patch-local detections to slide coordinates, one run per model.

    Detections from overlapping patches are kept as-is (de-duplication is
    NMS's job). Each run is sorted canonically so the output is independent
    of file record order.
    """
    by_id = {p.patch_id: p for p in patches}
    runs: dict[str, list[Detection]] = {}
    order: list[str] = []
    for rf in run_files:
        if rf.model_id not in runs:
            runs[rf.model_id] = []
            order.append(rf.model_id)
        bucket = runs[rf.model_id]
        for patch_id, dets in rf.patches.items():
            patch = by_id.get(patch_id)
            if patch is None:
                raise DetectionFileError(
                    f"detection file for model {rf.model_id!r} references unknown "
                    f"patch_id {patch_id!r}"
                )
            for d in dets:
                bucket.append(
                    Detection(
                        circle=to_slide_coords(patch, d.circle),
                        score=d.score,
                        model_id=d.model_id,
                        label=d.label,
                    )
                )
    return [
        ModelRun(model_id=m, detections=sorted(runs[m], key=detection_sort_key), source="file")
        for m in order
    ]


def infer_remote(
    endpoint: str,
    slide_id: str,
    patch: Patch,
    model_id: str = "remote",
    *,
    retries: int = 3,
    backoff: float = 0.25,
    timeout: float = 30.0,
    client: httpx.Client | None = None,
) -> list[Detection]:
    """POST one patch to {endpoint}/infer and parse patch-local detections.

    Transient failures (connection errors, HTTP 5xx) are retried up to
    `retries` times with exponential backoff; persistent failure raises
    BackendError carrying the patch_id.
    """
    body = {"slide_id": slide_id, "patch": {"x": patch.x, "y": patch.y, "w": patch.w, "h": patch.h}}
    own_client = client is None
    cli = client or httpx.Client(timeout=timeout)
    try:
        last_error = None
        for attempt in range(retries + 1):
            if attempt > 0:
                time.sleep(backoff * (2 ** (attempt - 1)))
            try:
                resp = cli.post(f"{endpoint.rstrip('/')}/infer", json=body, timeout=timeout)
            except httpx.HTTPError as exc:
                last_error = f"transport error: {exc}"
                continue
            if resp.status_code >= 500:
                last_error = f"HTTP {resp.status_code}"
                continue
            if resp.status_code != 200:
                raise BackendError(
                    f"patch {patch.patch_id}: HTTP {resp.status_code} from {endpoint}",
                    patch_id=patch.patch_id,
                )
            try:
                payload = resp.json()
            except ValueError as exc:
                raise DetectionFileError(
                    f"patch {patch.patch_id}: response is not JSON: {exc}"
                ) from exc
            dets_raw = payload.get("detections") if isinstance(payload, dict) else None
            if not isinstance(dets_raw, list):
                raise DetectionFileError(
                    f"patch {patch.patch_id}: response missing 'detections' array"
                )
            return [
                _parse_detection(d, model_id, f"patch {patch.patch_id} detections[{j}]")
                for j, d in enumerate(dets_raw)
            ]
        raise BackendError(
            f"patch {patch.patch_id}: {last_error} after {retries + 1} attempts",
            patch_id=patch.patch_id,
        )
    finally:
        if own_client:
            cli.close()


def remote_model_run(
    endpoint: str,
    model_id: str,
    slide_id: str,
    patches: list[Patch],
    *,
    workers: int = 1,
    retries: int = 3,
    backoff: float = 0.25,
    timeout: float = 30.0,
    client: httpx.Client | None = None,
) -> tuple[ModelRun, list[tuple[str, str]]]:
    """Fetch a whole slide's detections from a remote model, patch by patch.

    Per-patch requests are independent and may run concurrently; failed
    patches are collected as (patch_id, reason) rather than aborting the
    run. Results are canonically sorted, so output does not depend on
    worker count or scheduling.
    """

    def fetch(patch: Patch):
        locals_ = infer_remote(
            endpoint, slide_id, patch, model_id,
            retries=retries, backoff=backoff, timeout=timeout, client=client,
        )
        return [
            Detection(to_slide_coords(patch, d.circle), d.score, d.model_id, d.label)
            for d in locals_
        ]

    detections: list[Detection] = []
    failures: list[tuple[str, str]] = []
    if workers <= 1:
        for patch in patches:
            try:
                detections.extend(fetch(patch))
            except BackendError as exc:
                failures.append((patch.patch_id, str(exc)))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(fetch, p) for p in patches]
            for patch, fut in zip(patches, futures):
                try:
                    detections.extend(fut.result())
                except BackendError as exc:
                    failures.append((patch.patch_id, str(exc)))
    detections.sort(key=detection_sort_key)
    failures.sort()
    return ModelRun(model_id=model_id, detections=detections, source="remote"), failures
