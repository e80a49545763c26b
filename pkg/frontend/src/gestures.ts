/**
 * Pointer gestures over the canvas mapped to review-service edit ops.
 *
 * Dragging a selected circle's rim resizes it, dragging its interior moves
 * it, double-clicking empty canvas adds a circle at a default radius. All
 * gesture geometry is resolved in slide coordinates; the caller posts the
 * resulting op and only commits the overlay once the service accepts it.
 */

import { screenToSlide, viewScale, type Point, type Viewport } from "./transform.js";
import type { DetectionRecord, EditOp } from "./types.js";

export type DragKind = "move" | "resize" | "pan";

export const RIM_TOLERANCE_PX = 8;

/** What a pointer-down at a screen point means for the selected circle. */
export function classifyPress(
  vp: Viewport,
  selected: DetectionRecord | null,
  sx: number,
  sy: number
): DragKind {
  if (!selected) return "pan";
  const p = screenToSlide(vp, sx, sy);
  const dist = Math.hypot(p.x - selected.cx, p.y - selected.cy);
  const rimTolerance = RIM_TOLERANCE_PX / viewScale(vp);
  if (Math.abs(dist - selected.r) <= rimTolerance) return "resize";
  if (dist < selected.r) return "move";
  return "pan";
}

/** Topmost circle under a screen point, preferring the smallest hit. */
export function hitTest(
  vp: Viewport,
  records: DetectionRecord[],
  sx: number,
  sy: number
): DetectionRecord | null {
  const p = screenToSlide(vp, sx, sy);
  let best: DetectionRecord | null = null;
  for (const d of records) {
    if (d.status === "rejected") continue;
    if (Math.hypot(p.x - d.cx, p.y - d.cy) <= d.r && (!best || d.r < best.r)) {
      best = d;
    }
  }
  return best;
}

/** Completed move drag: start/end in slide space, translated payload. */
export function moveOp(target: DetectionRecord, start: Point, end: Point, actor = ""): EditOp {
  return {
    op: "move",
    target_id: target.id,
    revision: target.revision,
    payload: { dx: end.x - start.x, dy: end.y - start.y },
    actor,
  };
}

/** Completed rim drag: new radius is the distance from center to the end point. */
export function resizeOp(target: DetectionRecord, end: Point, actor = ""): EditOp {
  const newR = Math.max(1, Math.hypot(end.x - target.cx, end.y - target.cy));
  return {
    op: "resize",
    target_id: target.id,
    revision: target.revision,
    payload: { new_r: newR },
    actor,
  };
}

/** Double-click on empty canvas: add a circle at the default radius. */
export function addOp(vp: Viewport, sx: number, sy: number, defaultRadius: number, actor = ""): EditOp {
  const p = screenToSlide(vp, sx, sy);
  return { op: "add", payload: { cx: p.x, cy: p.y, r: defaultRadius }, actor };
}

export function acceptOp(target: DetectionRecord, actor = ""): EditOp {
  return { op: "accept", target_id: target.id, revision: target.revision, actor };
}

export function rejectOp(target: DetectionRecord, actor = ""): EditOp {
  return { op: "reject", target_id: target.id, revision: target.revision, actor };
}
