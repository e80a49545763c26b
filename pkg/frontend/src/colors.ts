/** Consensus-count color map; mirrors the server-side table. */

const COUNT_COLORS: Record<number, string> = {
  1: "#E6194B",
  2: "#F58231",
  3: "#FFE119",
  4: "#BFEF45",
  5: "#3CB44B", // 5 and above
};

const HUMAN_COLOR = "#42D4F4";

/** Prefer the server-provided color; fall back to the count map. */
export function colorFor(record: { count: number; color: string | null; category: string }): string {
  if (record.color) return record.color;
  if (record.category === "human") return HUMAN_COLOR;
  const key = Math.min(Math.max(record.count, 1), 5);
  return COUNT_COLORS[key];
}

export const STATUS_DIM: Record<string, number> = {
  pending: 1.0,
  accepted: 1.0,
  edited: 1.0,
  human_added: 1.0,
  rejected: 0.25,
};
