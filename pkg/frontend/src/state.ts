import type { ExplainResponse, ModelInfo } from "./api.js";
import type { HeatmapView } from "./heatmap.js";

/** Everything the renderer needs for one paint of the panel. The
 * controller mutates a single instance and hands it to render() after
 * each state change, so the view is always drawable as-is. */

export interface PdpAxes {
  x: string;
  y: string;
}

export interface PanelView {
  ready: boolean;
  loadError: string | null;
  info: ModelInfo | null;
  species: string;
  gas: string;
  /** raw input text per numeric feature; blank means "let the service impute" */
  fields: Record<string, string>;
  /** field name to message, present only while the entry is invalid */
  errors: Record<string, string>;
  /** feature names the service filled in on the last good prediction */
  imputed: string[];
  explain: ExplainResponse | null;
  /** true when the shown prediction no longer reflects the inputs */
  stale: boolean;
  staleMessage: string;
  versionNotice: string | null;
  pdp: HeatmapView | null;
  pdpAxes: PdpAxes;
  pdpFailed: boolean;
  overlayOn: boolean;
}

/** Discharge knobs the operator tunes directly; species presets leave
 * these alone and only refill the seed/trait columns. */
export const DISCHARGE_FIELDS: ReadonlySet<string> = new Set([
  "plasma_temp_c",
  "electrode_distance_cm",
  "voltage_kv",
  "frequency_khz",
  "power_w",
  "pressure_kpa",
  "gas_flow_lpm",
  "plasma_time_s",
]);

/** Controls shown at top level; the rest collapse under "advanced". */
export const PRIMARY_FIELDS: readonly string[] = [
  "voltage_kv",
  "power_w",
  "plasma_time_s",
  "baseline_germination_pct",
];

export const DEFAULT_AXES: PdpAxes = { x: "voltage_kv", y: "plasma_time_s" };

export function initialView(): PanelView {
  return {
    ready: false,
    loadError: null,
    info: null,
    species: "",
    gas: "",
    fields: {},
    errors: {},
    imputed: [],
    explain: null,
    stale: false,
    staleMessage: "",
    versionNotice: null,
    pdp: null,
    pdpAxes: { ...DEFAULT_AXES },
    pdpFailed: false,
    overlayOn: true,
  };
}
