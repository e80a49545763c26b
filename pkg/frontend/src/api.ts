/** Typed fetch client for the review service; the UI's only data source. */

import type {
  DetectionFilters,
  DetectionRecord,
  EditOp,
  ExportResult,
  SlideMeta,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string
  ) {
    super(message);
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  let resp: Response;
  try {
    resp = await fetch(path, init);
  } catch (err) {
    throw new ApiError(0, `service unreachable: ${String(err)}`);
  }
  let body: unknown = null;
  const text = await resp.text();
  if (text) {
    try {
      body = JSON.parse(text);
    } catch {
      body = text;
    }
  }
  if (!resp.ok) {
    const detail =
      body && typeof body === "object" && "error" in body
        ? String((body as { error: unknown }).error)
        : resp.statusText;
    throw new ApiError(resp.status, detail);
  }
  return body as T;
}

export function getSlide(): Promise<SlideMeta> {
  return request<SlideMeta>("/api/slide");
}

export function getDetections(filters: DetectionFilters = {}): Promise<DetectionRecord[]> {
  const params = new URLSearchParams();
  for (const [key, value] of Object.entries(filters)) {
    if (value !== undefined) params.set(key, String(value));
  }
  const qs = params.toString();
  return request<DetectionRecord[]>(`/api/detections${qs ? `?${qs}` : ""}`);
}

export function postEdit(op: EditOp): Promise<DetectionRecord> {
  return request<DetectionRecord>("/api/edits", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(op),
  });
}

export function postExport(includeRejected = false): Promise<ExportResult> {
  return request<ExportResult>("/api/export", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ include_rejected: includeRejected }),
  });
}

export const imageUrl = "/api/image";
