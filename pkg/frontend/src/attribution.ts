import type { ExplainResponse } from "./api.js";

/** Signed bar list for one explained prediction. Bars plus the base
 * value always reconstruct the displayed prediction: features beyond
 * topN fold into a single remainder bar instead of being dropped. */

export interface Bar {
  feature: string;
  value: number;
  /** 0..100, proportional to |value| against the largest bar. */
  widthPct: number;
  positive: boolean;
}

export interface AttributionView {
  bars: Bar[];
  base: number;
  prediction: number;
  /** base + sum of bars, which additivity keeps at the prediction. */
  total: number;
  additive: boolean;
}

export const ADDITIVITY_TOL = 1e-6;

export function buildAttribution(resp: ExplainResponse, topN = 12): AttributionView {
  const sorted = [...resp.attributions]
    .sort((a, b) => Math.abs(b.value) - Math.abs(a.value));
  const kept = sorted.slice(0, topN);
  const rest = sorted.slice(topN);
  const restSum = rest.reduce((acc, a) => acc + a.value, 0);
  const entries = rest.length > 0
    ? [...kept, { feature: `(${rest.length} more)`, value: restSum }]
    : kept;

  const largest = Math.max(...entries.map((e) => Math.abs(e.value)), 1e-12);
  const bars: Bar[] = entries.map((e) => ({
    feature: e.feature,
    value: e.value,
    widthPct: (100 * Math.abs(e.value)) / largest,
    positive: e.value >= 0,
  }));

  const total = resp.base_value + bars.reduce((acc, b) => acc + b.value, 0);
  return {
    bars,
    base: resp.base_value,
    prediction: resp.uplift_pct,
    total,
    additive: Math.abs(total - resp.uplift_pct) <= ADDITIVITY_TOL,
  };
}
