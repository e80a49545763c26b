"""Human-in-the-loop review service over a fused detection set.

State is event-sourced: an in-memory record table plus an append-only edit
log. Replaying the log over the initial fused set always reproduces the
live state, and a failed edit leaves both untouched. Every record carries a
revision counter; mutating ops must present the current revision, so a
stale client write is rejected instead of silently clobbering a newer edit.

The HTTP surface (FastAPI) serves slide metadata, filtered detections, an
optional downsampled background image, the edit endpoint, and GeoJSON
export of the current (post-edit) state.
"""

from __future__ import annotations

import json
import threading
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import FileResponse, JSONResponse

from .fusion import DEFAULT_COLOR_MAP, FusedDetection
from .geojson_io import export_geojson, write_geojson
from .geometry import Circle

__all__ = [
    "EditOp",
    "ReviewError",
    "ReviewRecord",
    "ReviewState",
    "create_app",
    "replay",
    "EDIT_LOG_SCHEMA",
]

EDIT_LOG_SCHEMA = "circlefuse-edits/1"

EDIT_OPS = ("accept", "reject", "move", "resize", "add", "relabel")

STATUS_PENDING = "pending"
STATUS_ACCEPTED = "accepted"
STATUS_REJECTED = "rejected"
STATUS_EDITED = "edited"
STATUS_HUMAN = "human_added"


class ReviewError(Exception):
    """Edit or query rejected; `code` carries the HTTP status."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


@dataclass(slots=True)
class EditOp:
    op: str
    target_id: str | None = None
    payload: dict = field(default_factory=dict)
    actor: str = ""
    timestamp: str = ""
    revision: int | None = None

    def to_dict(self) -> dict:
        out = {"op": self.op, "payload": self.payload, "actor": self.actor, "timestamp": self.timestamp}
        if self.target_id is not None:
            out["target_id"] = self.target_id
        if self.revision is not None:
            out["revision"] = self.revision
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "EditOp":
        if not isinstance(data, dict):
            raise ReviewError(400, "edit body must be a JSON object")
        op = data.get("op")
        if op not in EDIT_OPS:
            raise ReviewError(400, f"op: expected one of {EDIT_OPS}, got {op!r}")
        payload = data.get("payload", {})
        if not isinstance(payload, dict):
            raise ReviewError(400, "payload: must be an object")
        target_id = data.get("target_id")
        if target_id is not None and not isinstance(target_id, str):
            raise ReviewError(400, "target_id: must be a string")
        revision = data.get("revision")
        if revision is not None and not isinstance(revision, int):
            raise ReviewError(400, "revision: must be an integer")
        return cls(
            op=op,
            target_id=target_id,
            payload=payload,
            actor=str(data.get("actor", "")),
            timestamp=str(data.get("timestamp") or _utc_now()),
            revision=revision,
        )


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _require_number(payload: dict, key: str) -> float:
    value = payload.get(key)
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ReviewError(400, f"payload.{key}: expected a number, got {value!r}")
    return float(value)


@dataclass(slots=True)
class ReviewRecord:
    record_id: str
    fused: FusedDetection
    status: str = STATUS_PENDING
    revision: int = 0

    def to_dict(self) -> dict:
        f = self.fused
        return {
            "id": self.record_id,
            "cx": f.circle.cx,
            "cy": f.circle.cy,
            "r": f.circle.r,
            "score": f.score,
            "count": f.count,
            "category": f.category,
            "color": f.color,
            "status": self.status,
            "revision": self.revision,
        }


class ReviewState:
    """Live review session for one slide. Mutations are serialized."""

    def __init__(
        self,
        fused: list[FusedDetection],
        slide_id: str,
        width: int,
        height: int,
        *,
        image_path: str | Path | None = None,
        downsample: float = 1.0,
        export_path: str | Path | None = None,
    ):
        top = max(DEFAULT_COLOR_MAP)
        for f in fused:
            # Fill gaps without clobbering categories set upstream (e.g. a
            # re-imported "human" feature keeps its category).
            if not f.category:
                f.category = f"consensus_{f.count}"
            if f.color is None:
                f.color = DEFAULT_COLOR_MAP[min(max(f.count, 1), top)]
        self.slide_id = slide_id
        self.width = width
        self.height = height
        self.image_path = Path(image_path) if image_path else None
        self.downsample = float(downsample)
        self.export_path = Path(export_path) if export_path else None
        self._initial = [self._copy_fused(f) for f in fused]
        self.records: dict[str, ReviewRecord] = {}
        for i, f in enumerate(fused):
            rid = f"d{i:04d}"
            self.records[rid] = ReviewRecord(record_id=rid, fused=f)
        self.edit_log: list[EditOp] = []
        self._human_count = 0
        self._lock = threading.Lock()

    @staticmethod
    def _copy_fused(f: FusedDetection) -> FusedDetection:
        return FusedDetection(
            circle=f.circle,
            score=f.score,
            count=f.count,
            members=list(f.members),
            category=f.category,
            color=f.color,
        )

    # -- queries ------------------------------------------------------------

    def category_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for rec in self.records.values():
            if rec.status == STATUS_REJECTED:
                continue
            counts[rec.fused.category] = counts.get(rec.fused.category, 0) + 1
        return counts

    def slide_metadata(self) -> dict:
        return {
            "slide_id": self.slide_id,
            "width": self.width,
            "height": self.height,
            "counts": self.category_counts(),
            "image_available": self.image_path is not None,
            "downsample": self.downsample,
            "n_detections": len(self.records),
        }

    def list_detections(
        self,
        min_count: int | None = None,
        max_count: int | None = None,
        min_score: float | None = None,
    ) -> list[dict]:
        out = []
        for rec in self.records.values():
            f = rec.fused
            if min_count is not None and f.count < min_count:
                continue
            if max_count is not None and f.count > max_count:
                continue
            if min_score is not None and f.score < min_score:
                continue
            out.append(rec.to_dict())
        return out

    # -- mutations ----------------------------------------------------------

    def apply(self, op: EditOp) -> ReviewRecord:
        """Validate and apply one edit atomically; append it to the log."""
        with self._lock:
            if op.op == "add":
                record = self._apply_add(op)
            else:
                record = self._apply_on_target(op)
            self.edit_log.append(op)
            return record

    def _apply_add(self, op: EditOp) -> ReviewRecord:
        cx = _require_number(op.payload, "cx")
        cy = _require_number(op.payload, "cy")
        r = _require_number(op.payload, "r")
        if r <= 0:
            raise ReviewError(400, f"payload.r: radius must be > 0, got {r}")
        fused = FusedDetection(
            circle=Circle(cx, cy, r),
            score=1.0,
            count=1,
            members=[],
            category="human",
            color=DEFAULT_COLOR_MAP[1],
        )
        self._human_count += 1
        rid = f"h{self._human_count:04d}"
        record = ReviewRecord(record_id=rid, fused=fused, status=STATUS_HUMAN)
        self.records[rid] = record
        op.target_id = rid  # recorded so replay assigns the same id
        return record

    def _apply_on_target(self, op: EditOp) -> ReviewRecord:
        if not op.target_id:
            raise ReviewError(400, f"target_id: required for op {op.op!r}")
        record = self.records.get(op.target_id)
        if record is None:
            raise ReviewError(404, f"unknown target_id {op.target_id!r}")
        if op.revision is None:
            raise ReviewError(400, "revision: required for edits of existing detections")
        if op.revision != record.revision:
            raise ReviewError(
                409,
                f"stale revision {op.revision} for {op.target_id} "
                f"(current {record.revision})",
            )

        f = record.fused
        if op.op == "accept":
            record.status = STATUS_ACCEPTED
        elif op.op == "reject":
            record.status = STATUS_REJECTED
        elif op.op == "move":
            dx = _require_number(op.payload, "dx")
            dy = _require_number(op.payload, "dy")
            f.circle = f.circle.translated(dx, dy)
            record.status = STATUS_EDITED
        elif op.op == "resize":
            new_r = _require_number(op.payload, "new_r")
            if new_r <= 0:
                raise ReviewError(400, f"payload.new_r: radius must be > 0, got {new_r}")
            f.circle = Circle(f.circle.cx, f.circle.cy, new_r)
            record.status = STATUS_EDITED
        elif op.op == "relabel":
            label = op.payload.get("label")
            if not isinstance(label, str) or not label:
                raise ReviewError(400, "payload.label: expected a non-empty string")
            f.category = label
            record.status = STATUS_EDITED
        record.revision += 1
        return record

    # -- persistence ----------------------------------------------------------

    def active_fused(self, include_rejected: bool = False) -> list[FusedDetection]:
        return [
            rec.fused
            for rec in self.records.values()
            if include_rejected or rec.status != STATUS_REJECTED
        ]

    def edit_log_document(self) -> dict:
        return {"schema": EDIT_LOG_SCHEMA, "ops": [op.to_dict() for op in self.edit_log]}

    def export(self, path: str | Path | None = None, include_rejected: bool = False) -> dict:
        """Write current state as GeoJSON plus the edit log alongside it."""
        with self._lock:
            target = Path(path) if path else self.export_path
            if target is None:
                raise ReviewError(400, "no export path configured or provided")
            doc = export_geojson(self.active_fused(include_rejected), self.slide_id)
            write_geojson(doc, target)
            log_path = target.with_suffix(target.suffix + ".edits.json")
            log_path.write_text(
                json.dumps(self.edit_log_document(), indent=2), encoding="utf-8"
            )
            return {
                "path": str(target),
                "edit_log_path": str(log_path),
                "feature_count": len(doc["features"]),
            }

    def initial_fused(self) -> list[FusedDetection]:
        return [self._copy_fused(f) for f in self._initial]


def replay(initial: list[FusedDetection], ops: list[EditOp], state_kwargs: dict) -> ReviewState:
    """Rebuild a state by applying the edit log over the initial fused set."""
    state = ReviewState(initial, **state_kwargs)
    for op in ops:
        state.apply(
            EditOp(
                op=op.op,
                target_id=op.target_id if op.op != "add" else None,
                payload=op.payload,
                actor=op.actor,
                timestamp=op.timestamp,
                revision=op.revision,
            )
        )
    return state


# -- HTTP layer ---------------------------------------------------------------


def _parse_int(raw: str | None, name: str) -> int | None:
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ReviewError(400, f"{name}: expected an integer, got {raw!r}") from None


def _parse_float(raw: str | None, name: str) -> float | None:
    if raw is None:
        return None
    try:
        return float(raw)
    except ValueError:
        raise ReviewError(400, f"{name}: expected a number, got {raw!r}") from None


def create_app(state: ReviewState) -> FastAPI:
    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        yield
        # Edited state is not lost on a clean stop; exports also happen on
        # demand via POST /api/export.
        if state.edit_log and state.export_path is not None:
            try:
                state.export()
            except OSError:
                pass

    app = FastAPI(title="circlefuse review service", lifespan=lifespan)
    app.state.review = state

    @app.exception_handler(ReviewError)
    async def review_error_handler(_request: Request, exc: ReviewError):
        return JSONResponse(status_code=exc.code, content={"error": str(exc)})

    @app.get("/api/slide")
    def slide():
        return state.slide_metadata()

    @app.get("/api/detections")
    def detections(request: Request):
        params = request.query_params
        return state.list_detections(
            min_count=_parse_int(params.get("min_count"), "min_count"),
            max_count=_parse_int(params.get("max_count"), "max_count"),
            min_score=_parse_float(params.get("min_score"), "min_score"),
        )

    @app.post("/api/edits")
    async def edits(request: Request):
        try:
            body = await request.json()
        except Exception:
            raise ReviewError(400, "body must be valid JSON") from None
        record = state.apply(EditOp.from_dict(body))
        return record.to_dict()

    @app.post("/api/export")
    async def export(request: Request):
        raw = await request.body()
        body = {}
        if raw:
            try:
                body = json.loads(raw)
            except ValueError:
                raise ReviewError(400, "body must be valid JSON") from None
        if not isinstance(body, dict):
            raise ReviewError(400, "body must be a JSON object")
        include_rejected = bool(body.get("include_rejected", False))
        path = body.get("path")
        try:
            return state.export(path=path, include_rejected=include_rejected)
        except OSError as exc:
            raise ReviewError(500, f"export failed: {exc}") from exc

    @app.get("/api/image")
    def image():
        if state.image_path is None or not state.image_path.exists():
            raise ReviewError(404, "no background image configured")
        return FileResponse(state.image_path)

    return app
