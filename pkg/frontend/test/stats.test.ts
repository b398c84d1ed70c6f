import { describe, expect, it } from "vitest";

import { aggregateByX } from "../dist/index.js";

describe("aggregateByX", () => {
  it("groups runs sharing an x value into mean/min/max", () => {
    const rows = [
      { size: 12, fork: 3 },
      { size: 0, fork: 2 },
      { size: 12, fork: 7 },
      { size: 0, fork: 2 },
      { size: 12, fork: 5 },
    ];
    expect(aggregateByX(rows, "size", "fork")).toEqual([
      { x: 0, mean: 2, min: 2, max: 2 },
      { x: 12, mean: 5, min: 3, max: 7 },
    ]);
  });

  it("sorts points by x regardless of row order", () => {
    const rows = [
      { size: 49, fork: 9 },
      { size: 25, fork: 4 },
      { size: 37, fork: 6 },
    ];
    expect(aggregateByX(rows, "size", "fork").map((p) => p.x)).toEqual([25, 37, 49]);
  });

  it("propagates schema errors for non-numeric cells", () => {
    expect(() => aggregateByX([{ size: 0, fork: "n/a" }], "size", "fork")).toThrow(
      /non-numeric/,
    );
  });
});
