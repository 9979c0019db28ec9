import { describe, expect, it } from "vitest";

import type { ExplainResponse } from "../src/api.js";
import { buildAttribution } from "../src/attribution.js";

function resp(values: number[], base = 5): ExplainResponse {
  return {
    uplift_pct: base + values.reduce((a, b) => a + b, 0),
    base_value: base,
    attributions: values.map((v, i) => ({ feature: `f${i}`, value: v })),
    bundle_version: "v1",
    imputed: [],
  };
}

describe("buildAttribution", () => {
  it("bars plus base reconstruct the prediction exactly", () => {
    const view = buildAttribution(resp([1.5, -0.75, 0.25, 2.0]));
    expect(view.total).toBeCloseTo(view.prediction, 9);
    expect(view.additive).toBe(true);
  });

  it("keeps additivity when the tail folds into a remainder bar", () => {
    const values = Array.from({ length: 24 }, (_, i) =>
      ((i % 2 === 0 ? 1 : -1) * (i + 1)) / 10);
    const view = buildAttribution(resp(values), 6);
    expect(view.bars).toHaveLength(7);
    expect(view.bars[6].feature).toContain("more");
    const sum = view.bars.reduce((a, b) => a + b.value, 0);
    expect(view.base + sum).toBeCloseTo(view.prediction, 9);
  });

  it("sorts bars by absolute contribution", () => {
    const view = buildAttribution(resp([0.1, -3, 2, -0.5]));
    const mags = view.bars.map((b) => Math.abs(b.value));
    for (let i = 1; i < mags.length; i++) {
      expect(mags[i]).toBeLessThanOrEqual(mags[i - 1]);
    }
  });

  it("scales widths to the largest bar", () => {
    const view = buildAttribution(resp([4, -2, 1]));
    expect(view.bars[0].widthPct).toBe(100);
    expect(view.bars[1].widthPct).toBeCloseTo(50, 9);
    expect(view.bars[2].widthPct).toBeCloseTo(25, 9);
  });

  it("marks bar signs", () => {
    const view = buildAttribution(resp([1, -1]));
    expect(view.bars[0].positive).toBe(true);
    expect(view.bars[1].positive).toBe(false);
  });

  it("survives an all-zero attribution list", () => {
    const view = buildAttribution(resp([0, 0, 0]));
    expect(view.additive).toBe(true);
    for (const bar of view.bars) expect(bar.widthPct).toBe(0);
  });

  it("display-rounded bars still sum to the rounded prediction", () => {
    // rounding each number to 2 decimals can only move the sum by
    // half a unit in the last place per bar
    const view = buildAttribution(resp([1.2345, -0.9876, 0.5432, 0.1111]));
    const round2 = (v: number) => Math.round(v * 100) / 100;
    const shown = view.base + view.bars.reduce((a, b) => a + round2(b.value), 0);
    expect(Math.abs(shown - view.prediction))
      .toBeLessThanOrEqual(0.005 * (view.bars.length + 1));
  });
});
