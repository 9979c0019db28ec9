/** Typed client for the prediction service. Every number shown in the
 * panel originates from one of these calls; nothing is computed locally. */

export interface PredictRequest {
  species: string;
  gas_type: string;
  voltage_kv: number;
  power_w: number;
  plasma_time_s: number;
  [advanced: string]: string | number;
}

export interface Attribution {
  feature: string;
  value: number;
}

export interface ExplainResponse {
  uplift_pct: number;
  base_value: number;
  attributions: Attribution[];
  bundle_version: string;
  imputed: string[];
}

export interface ModelInfo {
  bundle_version: string;
  model_family: string;
  train_metrics: { train: Record<string, number>; test: Record<string, number> };
  feature_names: string[];
  numeric_features: string[];
  required_fields: string[];
  gas_labels: string[];
  species: string[];
  // "" keys the global fallback means
  species_means: Record<string, Record<string, number>>;
}

export interface PdpResponse {
  x: string;
  y: string | null;
  res: number;
  ticks_x: number[];
  ticks_y: number[] | null;
  values: number[] | number[][];
  bundle_version: string;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string, readonly key?: string) {
    super(message);
  }
}

/** Minimal transport seam so tests can substitute a mock service. */
export type Transport = (
  path: string,
  init?: { method?: string; body?: unknown },
) => Promise<{ status: number; json(): Promise<unknown> }>;

export const fetchTransport: Transport = async (path, init) => {
  const response = await fetch(path, {
    method: init?.method ?? "GET",
    headers: init?.body !== undefined ? { "Content-Type": "application/json" } : undefined,
    body: init?.body !== undefined ? JSON.stringify(init.body) : undefined,
  });
  return { status: response.status, json: () => response.json() };
};

async function unwrap<T>(r: { status: number; json(): Promise<unknown> }): Promise<T> {
  if (r.status >= 200 && r.status < 300) return (await r.json()) as T;
  let message = `request failed with status ${r.status}`;
  let key: string | undefined;
  try {
    const body = (await r.json()) as { detail?: { error?: string; key?: string } };
    if (body?.detail?.error) message = body.detail.error;
    key = body?.detail?.key;
  } catch {
    // non-JSON error body; keep the status message
  }
  throw new ApiError(r.status, message, key);
}

export class ApiClient {
  constructor(
    private readonly transport: Transport = fetchTransport,
    private readonly base = "",
  ) {}

  info(): Promise<ModelInfo> {
    return this.transport(`${this.base}/model/info`).then((r) => unwrap<ModelInfo>(r));
  }

  explain(body: PredictRequest): Promise<ExplainResponse> {
    return this.transport(`${this.base}/predict/explain`, { method: "POST", body })
      .then((r) => unwrap<ExplainResponse>(r));
  }

  pdp(x: string, y: string | null, res: number): Promise<PdpResponse> {
    const query = y === null ? `x=${encodeURIComponent(x)}&res=${res}`
      : `x=${encodeURIComponent(x)}&y=${encodeURIComponent(y)}&res=${res}`;
    return this.transport(`${this.base}/pdp?${query}`).then((r) => unwrap<PdpResponse>(r));
  }
}
