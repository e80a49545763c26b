/**
 * Review client entry point: wires the canvas, sidebar, review queue, and
 * keyboard shortcuts to the review service. All mutations round-trip
 * through the service before the overlay commits; a rejected edit reverts
 * the optimistic update and surfaces the reason in a toast.
 */

import { ApiError, getDetections, getSlide, imageUrl, postEdit, postExport } from "./api.js";
import {
  addOp,
  acceptOp,
  classifyPress,
  hitTest,
  moveOp,
  rejectOp,
  resizeOp,
  type DragKind,
} from "./gestures.js";
import { advance, buildReviewQueue, currentItem, isDone, refreshItem, type ReviewQueue } from "./queue.js";
import { drawScene } from "./render.js";
import {
  fitSlide,
  panBy,
  screenToSlide,
  slideToScreen,
  zoomAt,
  type Viewport,
} from "./transform.js";
import type { DetectionRecord, EditOp, SlideMeta } from "./types.js";

const ACTOR = "review-ui";
const DEFAULT_ADD_RADIUS = 150;

interface AppState {
  meta: SlideMeta;
  records: Map<string, DetectionRecord>;
  viewport: Viewport;
  selectedId: string | null;
  queue: ReviewQueue | null;
  image: HTMLImageElement | null;
  drag: {
    kind: DragKind;
    startScreen: { x: number; y: number };
    lastScreen: { x: number; y: number };
    original: DetectionRecord | null;
  } | null;
  dirty: boolean;
}

const canvas = document.getElementById("slide-canvas") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const banner = document.getElementById("error-banner")!;
const retryButton = document.getElementById("retry-button")!;
const toast = document.getElementById("toast")!;
const countsPanel = document.getElementById("counts")!;
const queuePanel = document.getElementById("queue-panel")!;
const queueStatus = document.getElementById("queue-status")!;
const statusBar = document.getElementById("status-bar")!;

let app: AppState | null = null;
let toastTimer: number | undefined;

function showToast(message: string) {
  toast.textContent = message;
  toast.classList.add("visible");
  window.clearTimeout(toastTimer);
  toastTimer = window.setTimeout(() => toast.classList.remove("visible"), 2600);
}

function showBanner(message: string) {
  banner.querySelector("span")!.textContent = message;
  banner.classList.add("visible");
}

function hideBanner() {
  banner.classList.remove("visible");
}

function resizeCanvas() {
  canvas.width = canvas.clientWidth * devicePixelRatio;
  canvas.height = canvas.clientHeight * devicePixelRatio;
  if (app) {
    app.dirty = true;
  }
}

function repaint() {
  if (!app || !app.dirty) return;
  app.dirty = false;
  const { width, height } = canvas;
  ctx.setTransform(devicePixelRatio, 0, 0, devicePixelRatio, 0, 0);
  const w = width / devicePixelRatio;
  const h = height / devicePixelRatio;
  ctx.clearRect(0, 0, w, h);

  if (app.image) {
    const origin = slideToScreen(app.viewport, 0, 0);
    const scale = app.viewport.zoom;
    ctx.drawImage(app.image, origin.x, origin.y, app.image.width * scale, app.image.height * scale);
  } else {
    const origin = slideToScreen(app.viewport, 0, 0);
    const corner = slideToScreen(app.viewport, app.meta.width, app.meta.height);
    ctx.strokeStyle = "#555";
    ctx.lineWidth = 1;
    ctx.strokeRect(origin.x, origin.y, corner.x - origin.x, corner.y - origin.y);
  }

  const stats = drawScene(
    ctx,
    [...app.records.values()],
    app.viewport,
    w,
    h,
    app.selectedId
  );
  statusBar.textContent =
    `${app.meta.slide_id} | ${app.records.size} detections, ${stats.visible} in view | ` +
    `zoom ${app.viewport.zoom.toFixed(2)}x`;
}

function scheduleRepaint() {
  if (app) app.dirty = true;
  requestAnimationFrame(repaint);
}

function renderCounts() {
  if (!app) return;
  const counts = new Map<string, number>();
  for (const d of app.records.values()) {
    if (d.status === "rejected") continue;
    counts.set(d.category, (counts.get(d.category) ?? 0) + 1);
  }
  countsPanel.innerHTML = "";
  for (const [category, n] of [...counts.entries()].sort()) {
    const row = document.createElement("div");
    row.className = "count-row";
    row.textContent = `${category}: ${n}`;
    countsPanel.appendChild(row);
  }
}

function renderQueue() {
  if (!app) return;
  const queue = app.queue;
  queuePanel.innerHTML = "";
  if (!queue) {
    queueStatus.textContent = "press Q to start a review pass (count <= 2)";
    return;
  }
  if (isDone(queue)) {
    queueStatus.textContent = "queue complete - press E to export";
    return;
  }
  queueStatus.textContent =
    `item ${queue.position + 1} of ${queue.items.length} - A accept, R reject`;
  queue.items.forEach((item, i) => {
    const row = document.createElement("div");
    row.className = "queue-row" + (i === queue.position ? " active" : "");
    row.textContent = `${item.id} count=${item.count} score=${item.score.toFixed(3)}`;
    queuePanel.appendChild(row);
  });
}

function focusQueueItem() {
  if (!app || !app.queue) return;
  const item = currentItem(app.queue);
  if (!item) {
    renderQueue();
    return;
  }
  app.selectedId = item.id;
  // Center the viewport on the item at a readable zoom.
  const targetScale = Math.min(4, 120 / item.r);
  app.viewport = {
    ...app.viewport,
    zoom: targetScale * app.viewport.downsample,
  };
  const screen = slideToScreen(app.viewport, item.cx, item.cy);
  app.viewport = panBy(
    app.viewport,
    canvas.clientWidth / 2 - screen.x,
    canvas.clientHeight / 2 - screen.y
  );
  renderQueue();
  scheduleRepaint();
}

async function applyEdit(op: EditOp, optimistic?: DetectionRecord) {
  if (!app) return;
  const previous = op.target_id ? app.records.get(op.target_id) : undefined;
  if (optimistic && op.target_id) {
    app.records.set(op.target_id, optimistic);
    scheduleRepaint();
  }
  try {
    const updated = await postEdit(op);
    app.records.set(updated.id, updated);
    if (app.queue) {
      app.queue = refreshItem(app.queue, updated);
    }
    renderCounts();
    renderQueue();
    scheduleRepaint();
    return updated;
  } catch (err) {
    if (previous && op.target_id) {
      app.records.set(op.target_id, previous);
    }
    if (err instanceof ApiError && err.status === 409 && op.target_id) {
      // Stale revision: refresh the record and re-present it.
      const fresh = await getDetections();
      for (const d of fresh) app.records.set(d.id, d);
      if (app.queue) {
        const updated = app.records.get(op.target_id);
        if (updated) app.queue = refreshItem(app.queue, updated);
      }
      showToast("edit conflicted with a newer change; item refreshed");
    } else {
      showToast(`edit rejected: ${err instanceof Error ? err.message : String(err)}`);
    }
    renderCounts();
    renderQueue();
    scheduleRepaint();
    return undefined;
  }
}

async function decideCurrent(decision: "accept" | "reject") {
  if (!app || !app.queue) return;
  const item = currentItem(app.queue);
  if (!item) return;
  const record = app.records.get(item.id);
  if (!record) return;
  const op = decision === "accept" ? acceptOp(record, ACTOR) : rejectOp(record, ACTOR);
  const updated = await applyEdit(op);
  if (updated) {
    app.queue = advance(app.queue);
    focusQueueItem();
  }
}

function attachCanvasHandlers() {
  canvas.addEventListener("wheel", (ev) => {
    if (!app) return;
    ev.preventDefault();
    const factor = ev.deltaY < 0 ? 1.15 : 1 / 1.15;
    app.viewport = zoomAt(app.viewport, factor, ev.offsetX, ev.offsetY);
    scheduleRepaint();
  });

  canvas.addEventListener("pointerdown", (ev) => {
    if (!app) return;
    canvas.setPointerCapture(ev.pointerId);
    const selected = app.selectedId ? app.records.get(app.selectedId) ?? null : null;
    const kind = classifyPress(app.viewport, selected, ev.offsetX, ev.offsetY);
    app.drag = {
      kind,
      startScreen: { x: ev.offsetX, y: ev.offsetY },
      lastScreen: { x: ev.offsetX, y: ev.offsetY },
      original: kind === "pan" ? null : selected,
    };
  });

  canvas.addEventListener("pointermove", (ev) => {
    if (!app || !app.drag) return;
    const drag = app.drag;
    const dx = ev.offsetX - drag.lastScreen.x;
    const dy = ev.offsetY - drag.lastScreen.y;
    drag.lastScreen = { x: ev.offsetX, y: ev.offsetY };

    if (drag.kind === "pan") {
      app.viewport = panBy(app.viewport, dx, dy);
      scheduleRepaint();
      return;
    }
    const target = drag.original;
    if (!target) return;
    const record = app.records.get(target.id);
    if (!record) return;
    // Live overlay preview; the service-confirmed record lands on release.
    if (drag.kind === "move") {
      const start = screenToSlide(app.viewport, drag.startScreen.x, drag.startScreen.y);
      const here = screenToSlide(app.viewport, ev.offsetX, ev.offsetY);
      app.records.set(target.id, {
        ...target,
        cx: target.cx + (here.x - start.x),
        cy: target.cy + (here.y - start.y),
      });
    } else {
      const here = screenToSlide(app.viewport, ev.offsetX, ev.offsetY);
      const r = Math.max(1, Math.hypot(here.x - target.cx, here.y - target.cy));
      app.records.set(target.id, { ...target, r });
    }
    scheduleRepaint();
  });

  canvas.addEventListener("pointerup", async (ev) => {
    if (!app || !app.drag) return;
    const drag = app.drag;
    app.drag = null;
    const moved =
      Math.hypot(ev.offsetX - drag.startScreen.x, ev.offsetY - drag.startScreen.y) > 3;

    if (drag.kind === "pan") {
      if (!moved) {
        const hit = hitTest(app.viewport, [...app.records.values()], ev.offsetX, ev.offsetY);
        app.selectedId = hit ? hit.id : null;
        scheduleRepaint();
      }
      return;
    }
    const target = drag.original;
    if (!target) return;
    if (!moved) {
      // A click on the selected circle is a no-op; restore the preview.
      app.records.set(target.id, target);
      scheduleRepaint();
      return;
    }
    const start = screenToSlide(app.viewport, drag.startScreen.x, drag.startScreen.y);
    const end = screenToSlide(app.viewport, ev.offsetX, ev.offsetY);
    const preview = app.records.get(target.id);
    app.records.set(target.id, target); // revert preview; applyEdit re-applies optimistically
    const op = drag.kind === "move" ? moveOp(target, start, end, ACTOR) : resizeOp(target, end, ACTOR);
    await applyEdit(op, preview ?? undefined);
  });

  canvas.addEventListener("dblclick", async (ev) => {
    if (!app) return;
    const hit = hitTest(app.viewport, [...app.records.values()], ev.offsetX, ev.offsetY);
    if (hit) return;
    const radius = DEFAULT_ADD_RADIUS;
    const op = addOp(app.viewport, ev.offsetX, ev.offsetY, radius, ACTOR);
    const created = await postEdit(op).catch((err) => {
      showToast(`add rejected: ${err instanceof Error ? err.message : String(err)}`);
      return undefined;
    });
    if (created && app) {
      app.records.set(created.id, created);
      app.selectedId = created.id;
      renderCounts();
      scheduleRepaint();
    }
  });
}

function attachKeyboardHandlers() {
  window.addEventListener("keydown", async (ev) => {
    if (!app) return;
    switch (ev.key.toLowerCase()) {
      case "q":
        app.queue = buildReviewQueue([...app.records.values()], 2);
        focusQueueItem();
        break;
      case "a":
        if (app.queue) await decideCurrent("accept");
        break;
      case "r":
        if (app.queue) await decideCurrent("reject");
        break;
      case "e": {
        try {
          const result = await postExport(false);
          showToast(`exported ${result.feature_count} features to ${result.path}`);
        } catch (err) {
          showToast(`export failed: ${err instanceof Error ? err.message : String(err)}`);
        }
        break;
      }
      case "escape":
        app.selectedId = null;
        scheduleRepaint();
        break;
      case "delete":
      case "backspace": {
        const selected = app.selectedId ? app.records.get(app.selectedId) : undefined;
        if (selected) await applyEdit(rejectOp(selected, ACTOR));
        break;
      }
      default:
        return;
    }
    ev.preventDefault();
  });
}

async function boot() {
  hideBanner();
  try {
    const meta = await getSlide();
    const detections = await getDetections();
    const records = new Map(detections.map((d) => [d.id, d]));

    let image: HTMLImageElement | null = null;
    if (meta.image_available) {
      image = await new Promise<HTMLImageElement | null>((resolve) => {
        const img = new Image();
        img.onload = () => resolve(img);
        img.onerror = () => resolve(null);
        img.src = imageUrl;
      });
    }

    resizeCanvas();
    app = {
      meta,
      records,
      viewport: fitSlide(
        meta.width,
        meta.height,
        canvas.clientWidth,
        canvas.clientHeight,
        meta.downsample
      ),
      selectedId: null,
      queue: null,
      image,
      drag: null,
      dirty: true,
    };
    renderCounts();
    renderQueue();
    repaint();
  } catch (err) {
    showBanner(
      `cannot reach the review service: ${err instanceof Error ? err.message : String(err)}`
    );
  }
}

retryButton.addEventListener("click", () => void boot());
window.addEventListener("resize", () => {
  resizeCanvas();
  scheduleRepaint();
});
attachCanvasHandlers();
attachKeyboardHandlers();
void boot();
