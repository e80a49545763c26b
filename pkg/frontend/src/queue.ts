/**
 * Review queue: the ordered worklist of low-consensus detections.
 *
 * Items with few agreeing models are the likeliest mistakes, so they come
 * first (count ascending), weakest confidence first within a count.
 */

import type { DetectionRecord } from "./types.js";

export interface ReviewQueue {
  items: DetectionRecord[];
  position: number;
}

export function buildReviewQueue(
  records: DetectionRecord[],
  maxCount = 2
): ReviewQueue {
  const items = records
    .filter((d) => d.count <= maxCount && d.status === "pending")
    .sort((a, b) => a.count - b.count || a.score - b.score || (a.id < b.id ? -1 : 1));
  return { items, position: 0 };
}

export function currentItem(queue: ReviewQueue): DetectionRecord | null {
  return queue.position < queue.items.length ? queue.items[queue.position] : null;
}

export function advance(queue: ReviewQueue): ReviewQueue {
  return { ...queue, position: Math.min(queue.position + 1, queue.items.length) };
}

export function isDone(queue: ReviewQueue): boolean {
  return queue.position >= queue.items.length;
}

/** Swap in a refreshed record (after a 409 conflict) without losing order. */
export function refreshItem(queue: ReviewQueue, updated: DetectionRecord): ReviewQueue {
  return {
    ...queue,
    items: queue.items.map((d) => (d.id === updated.id ? updated : d)),
  };
}
