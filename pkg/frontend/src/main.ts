import { ApiClient } from "./api.js";
import { buildAttribution } from "./attribution.js";
import { WhatIfPanel } from "./panel.js";
import type { PanelView } from "./state.js";
import { PRIMARY_FIELDS } from "./state.js";

/** Browser entry point: builds the form once model info arrives, then
 * repaints the output regions on every state change. Inputs are created
 * a single time so typing never loses focus. */

interface SliderSpec {
  min: number;
  max: number;
  step: number;
  label: string;
}

const SLIDERS: Record<string, SliderSpec> = {
  voltage_kv: { min: 0, max: 30, step: 0.5, label: "Voltage (kV)" },
  power_w: { min: 0, max: 800, step: 5, label: "Power (W)" },
  plasma_time_s: { min: 0, max: 900, step: 5, label: "Exposure time (s)" },
  baseline_germination_pct:
    { min: 0, max: 100, step: 1, label: "Baseline germination (%)" },
};

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const pct = (f: number) => `${(100 * f).toFixed(3)}%`;
const fmt = (v: number, digits = 2) => v.toFixed(digits);

const client = new ApiClient();
const panel = new WhatIfPanel({ client, render });

let built = false;
const numericInputs = new Map<string, HTMLInputElement[]>();
const fieldBoxes = new Map<string, HTMLElement>();

function fieldBox(name: string, label: string, advanced: boolean): HTMLElement {
  const box = document.createElement("div");
  box.className = "field";
  const lab = document.createElement("label");
  lab.textContent = label;
  box.appendChild(lab);
  const pair = document.createElement("div");
  pair.className = "pair";
  box.appendChild(pair);

  const inputs: HTMLInputElement[] = [];
  const spec = SLIDERS[name];
  if (!advanced && spec) {
    const range = document.createElement("input");
    range.type = "range";
    range.min = String(spec.min);
    range.max = String(spec.max);
    range.step = String(spec.step);
    range.addEventListener("input", () => panel.setNumeric(name, range.value));
    range.addEventListener("change", () => panel.flush());
    pair.appendChild(range);
    inputs.push(range);
  }
  const num = document.createElement("input");
  num.type = "number";
  num.addEventListener("input", () => panel.setNumeric(name, num.value));
  num.addEventListener("change", () => panel.flush());
  pair.appendChild(num);
  inputs.push(num);

  const err = document.createElement("div");
  err.className = "err";
  box.appendChild(err);

  numericInputs.set(name, inputs);
  fieldBoxes.set(name, box);
  return box;
}

function fillSelect(sel: HTMLSelectElement, options: string[]): void {
  sel.innerHTML = "";
  for (const name of options) {
    const opt = document.createElement("option");
    opt.value = name;
    opt.textContent = name;
    sel.appendChild(opt);
  }
}

function buildControls(view: PanelView): void {
  const info = view.info;
  if (!info) return;

  const species = byId<HTMLSelectElement>("species-select");
  fillSelect(species, info.species);
  species.addEventListener("change", () => panel.setSpecies(species.value));

  const gas = byId<HTMLSelectElement>("gas-select");
  fillSelect(gas, info.gas_labels);
  gas.addEventListener("change", () => panel.setGas(gas.value));

  const sliders = byId<HTMLElement>("sliders");
  for (const name of PRIMARY_FIELDS) {
    const spec = SLIDERS[name];
    sliders.appendChild(fieldBox(name, spec ? spec.label : name, false));
  }
  const advanced = byId<HTMLElement>("advanced-fields");
  for (const name of info.numeric_features) {
    if (PRIMARY_FIELDS.includes(name)) continue;
    advanced.appendChild(fieldBox(name, name, true));
  }

  const axisX = byId<HTMLSelectElement>("axis-x");
  const axisY = byId<HTMLSelectElement>("axis-y");
  fillSelect(axisX, info.numeric_features);
  fillSelect(axisY, info.numeric_features);
  axisX.value = view.pdpAxes.x;
  axisY.value = view.pdpAxes.y;
  const onAxis = () => panel.setAxes(axisX.value, axisY.value);
  axisX.addEventListener("change", onAxis);
  axisY.addEventListener("change", onAxis);

  const overlay = byId<HTMLInputElement>("overlay-toggle");
  overlay.checked = view.overlayOn;
  overlay.addEventListener("change", () => panel.setOverlay(overlay.checked));

  byId<HTMLButtonElement>("retry-pdp")
    .addEventListener("click", () => panel.retryPdp());

  const metrics = info.train_metrics.test;
  const r2 = metrics && typeof metrics.r2 === "number"
    ? `, test r2 ${fmt(metrics.r2, 3)}` : "";
  byId<HTMLElement>("model-line").textContent =
    `${info.model_family} bundle ${info.bundle_version}${r2}`;
}

function syncInputs(view: PanelView): void {
  for (const [name, inputs] of numericInputs) {
    const raw = view.fields[name] ?? "";
    for (const input of inputs) {
      if (document.activeElement === input) continue;
      if (input.value !== raw) input.value = raw;
    }
    const box = fieldBoxes.get(name);
    if (box) {
      const message = view.errors[name];
      box.classList.toggle("invalid", message !== undefined);
      const err = box.querySelector<HTMLElement>(".err");
      if (err) err.textContent = message ?? "";
    }
  }
  const species = byId<HTMLSelectElement>("species-select");
  if (document.activeElement !== species) species.value = view.species;
  const gas = byId<HTMLSelectElement>("gas-select");
  if (document.activeElement !== gas) gas.value = view.gas;
  const gasErr = byId<HTMLElement>("err-gas_type");
  gasErr.textContent = view.errors["gas_type"] ?? "";
  gasErr.style.display = view.errors["gas_type"] ? "block" : "none";
}

function banner(id: string, message: string | null): void {
  const node = byId<HTMLElement>(id);
  node.classList.toggle("show", message !== null);
  node.textContent = message ?? "";
}

function renderPrediction(view: PanelView): void {
  const value = byId<HTMLElement>("pred-value");
  value.classList.toggle("stale", view.stale);
  if (!view.explain) return;

  const att = buildAttribution(view.explain, 10);
  value.textContent = `${fmt(att.prediction)}%`;
  byId<HTMLElement>("pred-sub").textContent =
    `base ${fmt(att.base)}% plus ${att.bars.length} contributions`;
  byId<HTMLElement>("pred-imputed").textContent =
    view.imputed.length > 0
      ? `imputed from training means: ${view.imputed.join(", ")}`
      : "";

  const bars = byId<HTMLElement>("bars");
  bars.innerHTML = "";
  for (const bar of att.bars) {
    const row = document.createElement("div");
    row.className = "bar-row";
    const name = document.createElement("span");
    name.className = "name";
    name.textContent = bar.feature;
    const track = document.createElement("div");
    track.className = "bar-track";
    const fill = document.createElement("div");
    fill.className = `bar-fill ${bar.positive ? "pos" : "neg"}`;
    // signed bars grow from the track midline
    fill.style.width = pct(bar.widthPct / 200);
    if (bar.positive) fill.style.left = "50%";
    else fill.style.right = "50%";
    track.appendChild(fill);
    const num = document.createElement("span");
    num.className = "num";
    num.textContent = fmt(bar.value);
    row.append(name, track, num);
    bars.appendChild(row);
  }
  byId<HTMLElement>("bars-total").textContent =
    `base ${fmt(att.base)} + contributions ${fmt(att.total - att.base)}` +
    ` = ${fmt(att.total)}`;
}

function renderHeatmap(view: PanelView): void {
  const fail = byId<HTMLElement>("pdp-fail");
  fail.classList.toggle("show", view.pdpFailed);
  const host = byId<HTMLElement>("heatmap");
  host.innerHTML = "";
  const heat = view.pdp;
  if (view.pdpFailed || !heat) return;

  const frag = document.createDocumentFragment();
  for (const cell of heat.cells) {
    const div = document.createElement("div");
    div.className = "hm-cell";
    div.style.left = pct(cell.x0);
    div.style.top = pct(cell.y0);
    div.style.width = pct(cell.w);
    div.style.height = pct(cell.h);
    div.style.background = cell.color;
    div.title = `${heat.xLabel}=${fmt(heat.ticksX[cell.ix])}, ` +
      `${heat.yLabel}=${fmt(heat.ticksY[cell.iy])} ` +
      `-> ${fmt(cell.value)}`;
    frag.appendChild(div);
  }
  if (heat.overlay) {
    const box = document.createElement("div");
    box.id = "hm-overlay";
    box.style.left = pct(heat.overlay.x0);
    box.style.top = pct(heat.overlay.y0);
    box.style.width = pct(heat.overlay.w);
    box.style.height = pct(heat.overlay.h);
    frag.appendChild(box);
  }
  if (heat.crosshair) {
    const dot = document.createElement("div");
    dot.id = "hm-cross";
    dot.style.left = pct(heat.crosshair.fx);
    dot.style.top = pct(heat.crosshair.fy);
    frag.appendChild(dot);
  }
  host.appendChild(frag);
  byId<HTMLElement>("hm-x-label").textContent = heat.xLabel;
  byId<HTMLElement>("hm-y-label").textContent = heat.yLabel;
}

function render(view: PanelView): void {
  if (view.loadError) {
    banner("banner-load", `could not reach the service: ${view.loadError}`);
    byId<HTMLElement>("loading").textContent = "service unavailable";
    return;
  }
  if (!view.ready) return;
  if (!built) {
    buildControls(view);
    built = true;
    byId<HTMLElement>("loading").classList.add("hidden");
    byId<HTMLElement>("layout").classList.remove("hidden");
  }
  syncInputs(view);
  banner("banner-stale", view.stale
    ? `showing the last good prediction, service unreachable: ${view.staleMessage}`
    : null);
  banner("banner-version", view.versionNotice);
  renderPrediction(view);
  renderHeatmap(view);
}

panel.init();
