import { numericCell, Row } from "./csv.js";

/** One plotted point: runs grouped at a shared x value. */
export interface SeriesPoint {
  x: number;
  mean: number;
  min: number;
  max: number;
}

/**
 * Group rows by the x column and reduce the y column to mean/min/max per
 * group, sorted by x. Every referenced cell must be numeric.
 */
export function aggregateByX(rows: Row[], xColumn: string, yColumn: string): SeriesPoint[] {
  const groups = new Map<number, number[]>();
  for (const row of rows) {
    const x = numericCell(row, xColumn);
    const y = numericCell(row, yColumn);
    const bucket = groups.get(x);
    if (bucket) {
      bucket.push(y);
    } else {
      groups.set(x, [y]);
    }
  }
  return [...groups.entries()]
    .sort((a, b) => a[0] - b[0])
    .map(([x, ys]) => ({
      x,
      mean: ys.reduce((acc, y) => acc + y, 0) / ys.length,
      min: Math.min(...ys),
      max: Math.max(...ys),
    }));
}
