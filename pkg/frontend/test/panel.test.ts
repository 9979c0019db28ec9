import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { WhatIfPanel } from "../src/panel.js";
import { mockService, RADISH_WEIGHT, upliftFor } from "./mock.js";
import type { MockService } from "./mock.js";

/** Means in the mock put the starting point at 11 kV, 320 W, 300 s. */
const START_UPLIFT = upliftFor(11, 320, 300);

interface Rig {
  mock: MockService;
  panel: WhatIfPanel;
  /** uplift value at each render, null before the first response */
  preds: (number | null)[];
}

function rig(): Rig {
  const mock = mockService();
  const preds: (number | null)[] = [];
  const panel = new WhatIfPanel({
    client: new ApiClient(mock.transport),
    render: (view) => {
      preds.push(view.explain ? view.explain.uplift_pct : null);
    },
  });
  return { mock, panel, preds };
}

/** Let chained promise continuations run without advancing timers. */
async function drain(rounds = 10): Promise<void> {
  for (let i = 0; i < rounds; i++) await Promise.resolve();
}

describe("WhatIfPanel", () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });
  afterEach(() => {
    vi.useRealTimers();
  });

  it("seeds the form from model info and renders a first prediction", async () => {
    const { mock, panel } = rig();
    await panel.init();
    expect(panel.view.ready).toBe(true);
    expect(panel.view.species).toBe("Glycine max");
    expect(panel.view.gas).toBe("Ar");
    expect(panel.view.fields["voltage_kv"]).toBe("11");
    expect(panel.view.explain!.uplift_pct).toBeCloseTo(START_UPLIFT, 12);
    expect(mock.explainCalls).toBe(1);
    expect(mock.pdpCalls).toBe(1);
  });

  it("renders the initial heatmap with the safe window in place", async () => {
    const { panel } = rig();
    await panel.init();
    const heat = panel.view.pdp!;
    expect(heat.cells).toHaveLength(400);
    expect(heat.xLabel).toBe("voltage_kv");
    expect(heat.yLabel).toBe("plasma_time_s");
    const box = heat.overlay!;
    expect(box.x0).toBeCloseTo((7 - 2) / 26, 12);
    expect(box.w).toBeCloseTo((15 - 7) / 26, 12);
    expect(box.y0).toBeCloseTo(1 - (500 - 60) / 780, 12);
    expect(box.h).toBeCloseTo((500 - 200) / 780, 12);
  });

  it("collapses a slider burst into one request rendering the latest value", async () => {
    const { mock, panel, preds } = rig();
    await panel.init();
    const before = mock.explainCalls;

    for (let v = 12; v <= 20; v++) {
      panel.setNumeric("voltage_kv", String(v));
      vi.advanceTimersByTime(10);
    }
    vi.advanceTimersByTime(150);
    await panel.settle();

    expect(mock.explainCalls - before).toBe(1);
    const latest = upliftFor(20, 320, 300);
    expect(panel.view.explain!.uplift_pct).toBeCloseTo(latest, 12);
    // exactly one rendered prediction came out of the whole burst
    expect(preds.filter((p) => p === latest)).toHaveLength(1);
    for (let v = 12; v < 20; v++) {
      expect(preds).not.toContain(upliftFor(v, 320, 300));
    }
  });

  it("discards a slow early response after a newer one rendered", async () => {
    const { mock, panel, preds } = rig();
    await panel.init();
    mock.manual = true;

    panel.setNumeric("voltage_kv", "10");
    vi.advanceTimersByTime(150);
    panel.setNumeric("voltage_kv", "20");
    vi.advanceTimersByTime(150);
    expect(mock.pending).toHaveLength(2);

    // the newer request answers first
    mock.pending[1].release();
    await drain();
    const fresh = upliftFor(20, 320, 300);
    expect(panel.view.explain!.uplift_pct).toBeCloseTo(fresh, 12);

    // the stale response arrives late and must not render
    mock.pending[0].release();
    await panel.settle();
    expect(panel.view.explain!.uplift_pct).toBeCloseTo(fresh, 12);
    expect(preds).not.toContain(upliftFor(10, 320, 300));
  });

  it("blocks the request on a negative power entry", async () => {
    const { mock, panel } = rig();
    await panel.init();
    const before = mock.explainCalls;

    panel.setNumeric("power_w", "-5");
    vi.advanceTimersByTime(1000);
    await panel.settle();
    expect(mock.explainCalls).toBe(before);
    expect(panel.view.errors["power_w"]).toBe("must be non-negative");
    expect(panel.view.explain!.uplift_pct).toBeCloseTo(START_UPLIFT, 12);

    panel.setNumeric("power_w", "250");
    vi.advanceTimersByTime(150);
    await panel.settle();
    expect(mock.explainCalls).toBe(before + 1);
    expect(panel.view.errors["power_w"]).toBeUndefined();
    expect(panel.view.explain!.uplift_pct)
      .toBeCloseTo(upliftFor(11, 250, 300), 12);
  });

  it("treats a blank required field as an error, not a zero", async () => {
    const { mock, panel } = rig();
    await panel.init();
    const before = mock.explainCalls;
    panel.setNumeric("voltage_kv", "");
    vi.advanceTimersByTime(1000);
    await panel.settle();
    expect(mock.explainCalls).toBe(before);
    expect(panel.view.errors["voltage_kv"]).toBe("required");
  });

  it("leaves a blanked optional field to service-side imputation", async () => {
    const { mock, panel } = rig();
    await panel.init();
    panel.setNumeric("seed_weight_g", "");
    vi.advanceTimersByTime(150);
    await panel.settle();
    expect(panel.view.errors["seed_weight_g"]).toBeUndefined();
    expect(mock.lastExplainBody).not.toHaveProperty("seed_weight_g");
    expect(panel.view.imputed).toContain("seed_weight_g");
  });

  it("prefills trait fields from the species means, keeping discharge settings", async () => {
    const { mock, panel } = rig();
    await panel.init();
    panel.setNumeric("voltage_kv", "9");
    vi.advanceTimersByTime(150);
    await panel.settle();

    panel.setSpecies("Raphanus sativus");
    expect(panel.view.fields["seed_weight_g"]).toBe(String(RADISH_WEIGHT));
    expect(panel.view.fields["baseline_germination_pct"]).toBe("72");
    expect(panel.view.fields["voltage_kv"]).toBe("9");

    vi.advanceTimersByTime(150);
    await panel.settle();
    expect(mock.lastExplainBody!.species).toBe("Raphanus sativus");
  });

  it("keeps the last good prediction behind a stale banner when unreachable", async () => {
    const { mock, panel } = rig();
    await panel.init();

    mock.failNetwork = true;
    panel.setNumeric("voltage_kv", "14");
    vi.advanceTimersByTime(150);
    await panel.settle();
    expect(panel.view.stale).toBe(true);
    expect(panel.view.staleMessage).toContain("connection refused");
    expect(panel.view.explain!.uplift_pct).toBeCloseTo(START_UPLIFT, 12);

    mock.failNetwork = false;
    panel.setNumeric("voltage_kv", "15");
    vi.advanceTimersByTime(150);
    await panel.settle();
    expect(panel.view.stale).toBe(false);
    expect(panel.view.explain!.uplift_pct)
      .toBeCloseTo(upliftFor(15, 320, 300), 12);
  });

  it("pins a service-rejected value to its field instead of the outage banner", async () => {
    const { mock, panel } = rig();
    await panel.init();
    mock.rejectKey = "voltage_kv";
    panel.setNumeric("voltage_kv", "12");
    vi.advanceTimersByTime(150);
    await panel.settle();
    expect(panel.view.errors["voltage_kv"]).toContain("rejected");
    expect(panel.view.stale).toBe(false);
    expect(panel.view.explain!.uplift_pct).toBeCloseTo(START_UPLIFT, 12);
  });

  it("raises the refresh banner when the bundle version changes", async () => {
    const { mock, panel } = rig();
    await panel.init();
    expect(panel.view.versionNotice).toBeNull();
    mock.version = "v2";
    panel.setNumeric("voltage_kv", "12");
    vi.advanceTimersByTime(150);
    await panel.settle();
    expect(panel.view.versionNotice).toContain("v2");
    expect(panel.view.explain!.bundle_version).toBe("v2");
  });

  it("shows the grid placeholder on fetch failure and recovers on retry", async () => {
    const { mock, panel } = rig();
    mock.failPdp = true;
    await panel.init();
    expect(panel.view.pdpFailed).toBe(true);
    expect(panel.view.pdp).toBeNull();

    mock.failPdp = false;
    panel.retryPdp();
    await panel.settle();
    expect(panel.view.pdpFailed).toBe(false);
    expect(panel.view.pdp!.cells).toHaveLength(400);
  });

  it("refetches the grid when the axes change", async () => {
    const { mock, panel } = rig();
    await panel.init();
    panel.setAxes("power_w", "plasma_time_s");
    await panel.settle();
    expect(mock.pdpCalls).toBe(2);
    expect(panel.view.pdp!.xLabel).toBe("power_w");
    // the safe window is a voltage-time band, so no overlay here
    expect(panel.view.pdp!.overlay).toBeNull();
  });

  it("moves the crosshair with the inputs, into the window at 10 kV, 300 s", async () => {
    const { panel } = rig();
    await panel.init();
    panel.setNumeric("voltage_kv", "10");
    panel.setNumeric("plasma_time_s", "300");
    const heat = panel.view.pdp!;
    const cross = heat.crosshair!;
    const box = heat.overlay!;
    expect(cross.inside).toBe(true);
    expect(cross.fx).toBeGreaterThanOrEqual(box.x0);
    expect(cross.fx).toBeLessThanOrEqual(box.x0 + box.w);
    expect(cross.fy).toBeGreaterThanOrEqual(box.y0);
    expect(cross.fy).toBeLessThanOrEqual(box.y0 + box.h);
    vi.advanceTimersByTime(150);
    await panel.settle();
  });

  it("hides the overlay when toggled off without a refetch", async () => {
    const { mock, panel } = rig();
    await panel.init();
    panel.setOverlay(false);
    expect(panel.view.pdp!.overlay).toBeNull();
    panel.setOverlay(true);
    expect(panel.view.pdp!.overlay).not.toBeNull();
    expect(mock.pdpCalls).toBe(1);
  });

  it("reports a load error when model info is unreachable", async () => {
    const { mock, panel } = rig();
    mock.failNetwork = true;
    await panel.init();
    expect(panel.view.ready).toBe(false);
    expect(panel.view.loadError).toContain("connection refused");
  });

  it("flush fires the pending request without waiting out the debounce", async () => {
    const { mock, panel } = rig();
    await panel.init();
    const before = mock.explainCalls;
    panel.setNumeric("voltage_kv", "13");
    panel.flush();
    await panel.settle();
    expect(mock.explainCalls).toBe(before + 1);
    expect(panel.view.explain!.uplift_pct)
      .toBeCloseTo(upliftFor(13, 320, 300), 12);
  });
});
