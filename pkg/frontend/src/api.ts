// Typed client for the recourse-lab HTTP service. Field names mirror the
// wire format byte for byte; nothing here recomputes a confidence.

export interface ValueDomain {
  kind: 'binary' | 'categorical' | 'continuous';
  levels?: number;
  low?: number;
  high?: number;
}

export interface DatasetDescriptor {
  name: string;
  description: string;
  target: string;
  covariates: string[];
  actionable: string[];
  causes: string[];
  edges: [string, string][];
  cost_weights: Record<string, number>;
  predictor: string;
  value_decimals: number;
  default_threshold: number;
  domains: Record<string, ValueDomain>;
}

export interface SessionInfo {
  id: string;
  dataset: string;
  factual: Record<string, number>;
  score: number;
  threshold: number;
  predictor: string;
}

export interface ConfidencePanel {
  action: Record<string, number>;
  cost: number;
  gamma_ind: number;
  gamma_sub: number;
  gamma_sub_is_observational: boolean;
  eta_under_h: number;
  eta_under_h_ind: number;
  acceptance_bound: number;
}

export interface Recommendation {
  method: string;
  target_confidence: number;
  action: Record<string, number>;
  cost: number;
  confidence: number;
  feasible: boolean;
  violation: number;
  gamma_ind: number | null;
  gamma_sub: number | null;
  gamma_sub_is_observational: boolean;
  eta_under_h: number | null;
  eta_under_h_ind: number | null;
  acceptance_bound: number | null;
  guarantee: string | null;
}

export interface SessionRequest {
  dataset: string;
  seed?: number;
  factual?: Record<string, number>;
}

/** Non-2xx answer from the service, with the parsed `detail` payload. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: unknown,
  ) {
    super(typeof detail === 'string' ? detail : JSON.stringify(detail));
    this.name = 'ApiError';
  }
}

/** The server never answered: connection refused, DNS, aborted socket. */
export class ServerUnreachableError extends Error {
  constructor(cause: unknown) {
    super('recourse service unreachable');
    this.name = 'ServerUnreachableError';
    (this as { cause?: unknown }).cause = cause;
  }
}

async function parseOrThrow<T>(response: Response): Promise<T> {
  if (response.ok) {
    return (await response.json()) as T;
  }
  let detail: unknown;
  try {
    detail = ((await response.json()) as { detail?: unknown }).detail;
  } catch {
    detail = response.statusText;
  }
  throw new ApiError(response.status, detail);
}

export class RecourseApi {
  constructor(private readonly base: string = '') {}

  private async request<T>(
    path: string,
    init?: RequestInit,
  ): Promise<T> {
    let response: Response;
    try {
      response = await fetch(this.base + path, init);
    } catch (err) {
      // an explicit abort is flow control, not an outage
      if (err instanceof DOMException && err.name === 'AbortError') {
        throw err;
      }
      throw new ServerUnreachableError(err);
    }
    return parseOrThrow<T>(response);
  }

  private post<T>(path: string, body: unknown, signal?: AbortSignal) {
    return this.request<T>(path, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
      signal,
    });
  }

  async health(): Promise<string> {
    let response: Response;
    try {
      response = await fetch(this.base + '/healthz');
    } catch (err) {
      throw new ServerUnreachableError(err);
    }
    return response.text();
  }

  datasets(): Promise<DatasetDescriptor[]> {
    return this.request<DatasetDescriptor[]>('/datasets');
  }

  createSession(req: SessionRequest): Promise<SessionInfo> {
    return this.post<SessionInfo>('/sessions', req);
  }

  evaluate(
    sessionId: string,
    action: Record<string, number>,
    signal?: AbortSignal,
  ): Promise<ConfidencePanel> {
    return this.post<ConfidencePanel>(
      `/sessions/${sessionId}/evaluate`,
      { action },
      signal,
    );
  }

  recommend(
    sessionId: string,
    method: string,
    confidence: number,
    optimizerPreset?: string,
  ): Promise<Recommendation> {
    const body: Record<string, unknown> = { method, confidence };
    if (optimizerPreset !== undefined) {
      body.optimizer_preset = optimizerPreset;
    }
    return this.post<Recommendation>(`/sessions/${sessionId}/recommend`, body);
  }
}
