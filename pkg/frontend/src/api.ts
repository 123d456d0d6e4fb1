// Typed client for the generation/evaluation service. The fetch
// implementation is injected so tests can mock the wire exactly.

export interface GenerateResponse {
  code: string;
  tokens: number;
  latency_ms: number;
}

export interface EvaluateResponse {
  id?: string;
  similarity: number;
  bleu: number;
  ngram: number;
  weighted_ngram: number;
  syntax: number;
  dataflow: number | null;
  codebleu: number;
}

export interface HealthResponse {
  status: string;
  model_loaded: boolean;
  checkpoint_id: string | null;
}

export interface ResponseLike {
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<ResponseLike>;

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
  }
}

async function errorDetail(response: ResponseLike): Promise<string> {
  try {
    const payload = (await response.json()) as { detail?: unknown };
    if (typeof payload.detail === "string") return payload.detail;
    return JSON.stringify(payload);
  } catch {
    return `service returned status ${response.status}`;
  }
}

export class ServiceClient {
  private baseUrl: string;

  constructor(
    baseUrl: string,
    private readonly fetchImpl: FetchLike,
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  setBaseUrl(url: string): void {
    this.baseUrl = url.replace(/\/+$/, "");
  }

  getBaseUrl(): string {
    return this.baseUrl;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) {
      throw new ServiceError(response.status, await errorDetail(response));
    }
    return (await response.json()) as T;
  }

  async health(): Promise<HealthResponse> {
    const response = await this.fetchImpl(this.baseUrl + "/api/health");
    if (!response.ok) {
      throw new ServiceError(response.status, await errorDetail(response));
    }
    return (await response.json()) as HealthResponse;
  }

  generate(pseudocode: string, maxLen?: number): Promise<GenerateResponse> {
    const body: Record<string, unknown> = { pseudocode };
    if (maxLen !== undefined) body.max_len = maxLen;
    return this.post<GenerateResponse>("/api/generate", body);
  }

  evaluate(candidate: string, reference: string): Promise<EvaluateResponse> {
    return this.post<EvaluateResponse>("/api/evaluate", { candidate, reference });
  }
}
