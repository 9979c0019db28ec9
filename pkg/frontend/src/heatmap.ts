import type { PdpResponse } from "./api.js";

/** Geometry for the two-feature response heatmap: colored cells, the
 * recommended-window overlay rectangle, and a crosshair at the current
 * what-if point. All positions are fractions of the plot area so the
 * renderer can scale freely. */

export interface Cell {
  /** column index along the x feature */
  ix: number;
  /** row index along the y feature */
  iy: number;
  x0: number;
  y0: number;
  w: number;
  h: number;
  value: number;
  color: string;
}

export interface OverlayRect {
  x0: number;
  y0: number;
  w: number;
  h: number;
}

export interface Crosshair {
  fx: number;
  fy: number;
  inside: boolean;
}

export interface HeatmapView {
  cells: Cell[];
  resX: number;
  resY: number;
  xLabel: string;
  yLabel: string;
  ticksX: number[];
  ticksY: number[];
  vmin: number;
  vmax: number;
  overlay: OverlayRect | null;
  crosshair: Crosshair | null;
}

export interface Band {
  lo: number;
  hi: number;
}

export interface SafeWindow {
  /** feature name and band along the x axis, e.g. voltage_kv 7..15 */
  x: { feature: string; band: Band };
  y: { feature: string; band: Band };
}

export const SAFE_WINDOW: SafeWindow = {
  x: { feature: "voltage_kv", band: { lo: 7, hi: 15 } },
  y: { feature: "plasma_time_s", band: { lo: 200, hi: 500 } },
};

/** Map a feature value onto 0..1 across the tick range. */
function frac(value: number, ticks: number[]): number {
  const lo = ticks[0];
  const hi = ticks[ticks.length - 1];
  if (hi <= lo) return 0;
  return (value - lo) / (hi - lo);
}

const clamp01 = (v: number) => Math.min(1, Math.max(0, v));

/** Blue (low) through white to warm red (high), as a CSS rgb string. */
export function colorFor(value: number, vmin: number, vmax: number): string {
  const span = vmax - vmin;
  const t = span > 0 ? clamp01((value - vmin) / span) : 0.5;
  let r: number;
  let g: number;
  let b: number;
  if (t < 0.5) {
    const u = t / 0.5;
    r = Math.round(49 + (255 - 49) * u);
    g = Math.round(102 + (255 - 102) * u);
    b = Math.round(173 + (255 - 173) * u);
  } else {
    const u = (t - 0.5) / 0.5;
    r = 255;
    g = Math.round(255 - (255 - 80) * u);
    b = Math.round(255 - (255 - 60) * u);
  }
  return `rgb(${r}, ${g}, ${b})`;
}

export function buildHeatmap(
  grid: PdpResponse,
  window: SafeWindow | null = SAFE_WINDOW,
  current: { x: number; y: number } | null = null,
): HeatmapView {
  if (!grid.y || !grid.ticks_y) {
    throw new Error("heatmap requires a two-feature grid");
  }
  const ticksX = grid.ticks_x;
  const ticksY = grid.ticks_y;
  const resX = ticksX.length;
  const resY = ticksY.length;
  const values = grid.values as number[][];

  let vmin = Infinity;
  let vmax = -Infinity;
  for (let i = 0; i < resX; i++) {
    for (let j = 0; j < resY; j++) {
      const v = values[i][j];
      if (v < vmin) vmin = v;
      if (v > vmax) vmax = v;
    }
  }

  const cw = 1 / resX;
  const ch = 1 / resY;
  const cells: Cell[] = [];
  for (let i = 0; i < resX; i++) {
    for (let j = 0; j < resY; j++) {
      const v = values[i][j];
      cells.push({
        ix: i,
        iy: j,
        x0: i * cw,
        // row 0 sits at the bottom: larger y values draw higher up
        y0: 1 - (j + 1) * ch,
        w: cw,
        h: ch,
        value: v,
        color: colorFor(v, vmin, vmax),
      });
    }
  }

  let overlay: OverlayRect | null = null;
  if (window && window.x.feature === grid.x && window.y.feature === grid.y) {
    const fx0 = clamp01(frac(window.x.band.lo, ticksX));
    const fx1 = clamp01(frac(window.x.band.hi, ticksX));
    const fy0 = clamp01(frac(window.y.band.lo, ticksY));
    const fy1 = clamp01(frac(window.y.band.hi, ticksY));
    if (fx1 > fx0 && fy1 > fy0) {
      overlay = { x0: fx0, y0: 1 - fy1, w: fx1 - fx0, h: fy1 - fy0 };
    }
  }

  let crosshair: Crosshair | null = null;
  if (current) {
    const fx = frac(current.x, ticksX);
    const fy = frac(current.y, ticksY);
    crosshair = {
      fx: clamp01(fx),
      fy: 1 - clamp01(fy),
      inside: fx >= 0 && fx <= 1 && fy >= 0 && fy <= 1,
    };
  }

  return {
    cells,
    resX,
    resY,
    xLabel: grid.x,
    yLabel: grid.y,
    ticksX,
    ticksY,
    vmin,
    vmax,
    overlay,
    crosshair,
  };
}
