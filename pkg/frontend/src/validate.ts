/** Field-level validation. An invalid entry blocks the request and is
 * reported next to the field; the service never sees it. */

const NON_NEGATIVE = new Set([
  "voltage_kv", "power_w", "plasma_time_s", "frequency_khz",
]);

const PERCENT = new Set([
  "baseline_germination_pct", "treated_germination_pct",
  "germination_potential_pct",
]);

export type FieldCheck =
  | { ok: true; value: number }
  | { ok: false; message: string };

export function checkNumeric(name: string, raw: string | number): FieldCheck {
  const value = typeof raw === "number" ? raw : Number(raw.trim());
  if (raw === "" || Number.isNaN(value) || !Number.isFinite(value)) {
    return { ok: false, message: "enter a number" };
  }
  if (NON_NEGATIVE.has(name) && value < 0) {
    return { ok: false, message: "must be non-negative" };
  }
  if (PERCENT.has(name) && (value < 0 || value > 100)) {
    return { ok: false, message: "must be in 0..100" };
  }
  return { ok: true, value };
}

export function checkGas(gas: string, labels: string[]): FieldCheck | { ok: true; value: number } {
  return labels.includes(gas)
    ? { ok: true, value: 0 }
    : { ok: false, message: `gas must be one of ${labels.join(", ")}` };
}
