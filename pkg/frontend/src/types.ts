/** Wire types for the review service HTTP API. */

export type ReviewStatus = "pending" | "accepted" | "rejected" | "edited" | "human_added";

export interface DetectionRecord {
  id: string;
  cx: number;
  cy: number;
  r: number;
  score: number;
  count: number;
  category: string;
  color: string | null;
  status: ReviewStatus;
  revision: number;
}

export interface SlideMeta {
  slide_id: string;
  width: number;
  height: number;
  counts: Record<string, number>;
  image_available: boolean;
  downsample: number;
  n_detections: number;
}

export type EditOpKind = "accept" | "reject" | "move" | "resize" | "add" | "relabel";

export interface EditOp {
  op: EditOpKind;
  target_id?: string;
  revision?: number;
  payload?: Record<string, number | string>;
  actor?: string;
}

export interface ExportResult {
  path: string;
  edit_log_path: string;
  feature_count: number;
}

export interface DetectionFilters {
  min_count?: number;
  max_count?: number;
  min_score?: number;
}
