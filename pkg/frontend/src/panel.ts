import { ApiClient, ApiError } from "./api.js";
import type { ModelInfo, PdpResponse, PredictRequest } from "./api.js";
import { debounce, Debounced, DEBOUNCE_MS } from "./debounce.js";
import { LatestWins } from "./sequencer.js";
import { checkGas, checkNumeric } from "./validate.js";
import { buildHeatmap, SAFE_WINDOW } from "./heatmap.js";
import {
  DISCHARGE_FIELDS,
  initialView,
  PanelView,
} from "./state.js";

/** Controller for the what-if panel. Owns all state transitions and
 * request traffic; rendering is delegated to the injected callback so
 * the class runs unchanged under a mock transport in tests.
 *
 * Every number on screen comes from a service response. Input changes
 * debounce into one explain request, responses are sequence-checked so
 * a slow early reply never overwrites a later one, and transport
 * failures keep the last good prediction on screen behind a stale
 * banner. */

export type Render = (view: PanelView) => void;

export interface PanelOptions {
  client: ApiClient;
  render: Render;
  debounceMs?: number;
  pdpRes?: number;
}

export class WhatIfPanel {
  readonly view: PanelView;

  private client: ApiClient;
  private render: Render;
  private pdpRes: number;
  private schedule: Debounced;
  private explainSeq = new LatestWins();
  private pdpSeq = new LatestWins();
  private bundleVersion: string | null = null;
  private grid: PdpResponse | null = null;
  private inflight = new Set<Promise<void>>();

  constructor(opts: PanelOptions) {
    this.client = opts.client;
    this.render = opts.render;
    this.pdpRes = opts.pdpRes ?? 20;
    this.view = initialView();
    this.schedule = debounce(() => {
      this.track(this.fireExplain());
    }, opts.debounceMs ?? DEBOUNCE_MS);
  }

  /** Fetch model metadata, seed the form from the global means, then
   * issue the first prediction and grid fetch. */
  async init(): Promise<void> {
    let me: ModelInfo;
    try {
      me = await this.client.info();
    } catch (err) {
      this.view.loadError = messageOf(err);
      this.render(this.view);
      return;
    }
    this.view.info = me;
    this.bundleVersion = me.bundle_version;
    this.view.species = me.species[0] ?? "";
    this.view.gas = me.gas_labels[0] ?? "";
    const means = me.species_means[this.view.species] ?? me.species_means[""];
    for (const name of me.numeric_features) {
      const v = means[name];
      this.view.fields[name] = v === undefined ? "" : formatValue(v);
    }
    this.view.ready = true;
    this.render(this.view);
    await Promise.all([
      this.track(this.fireExplain()),
      this.track(this.firePdp()),
    ]);
  }

  setSpecies(species: string): void {
    if (species === this.view.species) return;
    this.view.species = species;
    const info = this.view.info;
    if (info) {
      const means = info.species_means[species] ?? info.species_means[""];
      for (const name of info.numeric_features) {
        if (DISCHARGE_FIELDS.has(name)) continue;
        const v = means[name];
        if (v !== undefined) {
          this.view.fields[name] = formatValue(v);
          delete this.view.errors[name];
        }
      }
    }
    this.render(this.view);
    this.schedule();
  }

  setGas(gas: string): void {
    if (gas === this.view.gas) return;
    const labels = this.view.info ? this.view.info.gas_labels : [];
    const check = checkGas(gas, labels);
    if (!check.ok) {
      this.view.errors["gas_type"] = check.message;
      this.render(this.view);
      return;
    }
    delete this.view.errors["gas_type"];
    this.view.gas = gas;
    this.render(this.view);
    this.schedule();
  }

  /** Record a numeric entry. Invalid text pins a field error and issues
   * no request; a valid value clears the error and debounces one. */
  setNumeric(name: string, raw: string): void {
    this.view.fields[name] = raw;
    if (raw.trim() === "") {
      if (this.isRequired(name)) {
        this.view.errors[name] = "required";
        this.render(this.view);
        return;
      }
      // blank hands an optional field back to service-side imputation
      delete this.view.errors[name];
      this.refreshPdpView();
      this.render(this.view);
      this.schedule();
      return;
    }
    const check = checkNumeric(name, raw);
    if (!check.ok) {
      this.view.errors[name] = check.message;
      this.render(this.view);
      return;
    }
    delete this.view.errors[name];
    this.refreshPdpView();
    this.render(this.view);
    this.schedule();
  }

  setAxes(x: string, y: string): void {
    if (x === this.view.pdpAxes.x && y === this.view.pdpAxes.y) return;
    this.view.pdpAxes = { x, y };
    this.grid = null;
    this.view.pdp = null;
    this.render(this.view);
    this.track(this.firePdp());
  }

  setOverlay(on: boolean): void {
    this.view.overlayOn = on;
    this.refreshPdpView();
    this.render(this.view);
  }

  retryPdp(): void {
    this.track(this.firePdp());
  }

  /** Fire any pending debounced request immediately. */
  flush(): void {
    this.schedule.flush();
  }

  /** Resolve once every in-flight request has settled; test hook. */
  async settle(): Promise<void> {
    while (this.inflight.size > 0) {
      await Promise.all([...this.inflight]);
    }
  }

  private isRequired(name: string): boolean {
    return this.view.info !== null &&
      this.view.info.required_fields.includes(name);
  }

  private track(p: Promise<void>): Promise<void> {
    this.inflight.add(p);
    const drop = () => this.inflight.delete(p);
    p.then(drop, drop);
    return p;
  }

  private body(): PredictRequest {
    const req: PredictRequest = {
      species: this.view.species,
      gas_type: this.view.gas,
      voltage_kv: Number(this.view.fields["voltage_kv"]),
      power_w: Number(this.view.fields["power_w"]),
      plasma_time_s: Number(this.view.fields["plasma_time_s"]),
    };
    const names = this.view.info ? this.view.info.numeric_features : [];
    for (const name of names) {
      if (name in req) continue;
      const raw = this.view.fields[name];
      if (raw !== undefined && raw.trim() !== "") {
        req[name] = Number(raw);
      }
    }
    return req;
  }

  private async fireExplain(): Promise<void> {
    if (Object.keys(this.view.errors).length > 0) return;
    const seq = this.explainSeq.next();
    try {
      const resp = await this.client.explain(this.body());
      if (!this.explainSeq.accept(seq)) return;
      this.noteVersion(resp.bundle_version);
      this.view.explain = resp;
      this.view.imputed = resp.imputed;
      this.view.stale = false;
      this.view.staleMessage = "";
    } catch (err) {
      if (!this.explainSeq.accept(seq)) return;
      if (err instanceof ApiError && err.key) {
        // service rejected one field; surface it there, not as an outage
        this.view.errors[err.key] = err.message;
      } else {
        this.view.stale = true;
        this.view.staleMessage = messageOf(err);
      }
    }
    this.render(this.view);
  }

  private async firePdp(): Promise<void> {
    const seq = this.pdpSeq.next();
    const { x, y } = this.view.pdpAxes;
    try {
      const grid = await this.client.pdp(x, y, this.pdpRes);
      if (!this.pdpSeq.accept(seq)) return;
      this.noteVersion(grid.bundle_version);
      this.grid = grid;
      this.view.pdpFailed = false;
      this.refreshPdpView();
    } catch {
      if (!this.pdpSeq.accept(seq)) return;
      this.grid = null;
      this.view.pdp = null;
      this.view.pdpFailed = true;
    }
    this.render(this.view);
  }

  private noteVersion(seen: string): void {
    if (this.bundleVersion !== null && seen !== this.bundleVersion) {
      this.view.versionNotice =
        `model bundle changed (${this.bundleVersion} to ${seen}), ` +
        "refresh the page to load it";
    }
  }

  private refreshPdpView(): void {
    if (!this.grid) return;
    const rawX = this.view.fields[this.view.pdpAxes.x] ?? "";
    const rawY = this.view.fields[this.view.pdpAxes.y] ?? "";
    const cx = Number(rawX);
    const cy = Number(rawY);
    const current =
      rawX.trim() !== "" && rawY.trim() !== "" &&
      Number.isFinite(cx) && Number.isFinite(cy)
        ? { x: cx, y: cy } : null;
    this.view.pdp = buildHeatmap(
      this.grid,
      this.view.overlayOn ? SAFE_WINDOW : null,
      current,
    );
  }
}

function messageOf(err: unknown): string {
  if (err instanceof Error) return err.message;
  return String(err);
}

/** Compact decimal for pre-filling inputs from training means. */
export function formatValue(v: number): string {
  if (Number.isInteger(v)) return String(v);
  return String(Number(v.toFixed(3)));
}
