/**
 * Typed client for the promptga service routes.
 *
 * Thin and dependency-free: every method maps 1:1 onto one route and
 * resolves to the parsed JSON payload. Service-reported failures throw
 * ApiError carrying the stable error code.
 */

export interface IndividualPayload {
  index: number;
  chromosome: string;
  prompt: string;
  image_hash: string | null;
  image_url: string | null;
}

export interface ModelTelemetry {
  weights: Record<string, Record<string, number>>;
  continuous: Record<string, { mean: number; variance: number }>;
}

export interface PopulationPayload {
  generation_number: number;
  individuals: IndividualPayload[];
  votes: number[] | null;
  model: ModelTelemetry;
}

export interface CreateSessionResponse {
  session_id: string;
  population: PopulationPayload;
}

export interface GenerationSummary {
  generation_number: number;
  total_votes: number | null;
}

export interface SessionSummary {
  session_id: string;
  created_at: string;
  backend_id: string;
  master_seed: number;
  style_keyword: string;
  population_size: number;
  generation_count: number;
  current_generation: number;
  current_voted: boolean;
  generations: GenerationSummary[];
}

export interface SampleResponse {
  prompts: string[];
}

export interface CreateSessionRequest {
  backend: string;
  master_seed?: number;
  config?: Record<string, unknown>;
  schema?: Record<string, unknown>;
  params?: Record<string, unknown>;
}

export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private fetchImpl: FetchLike;

  constructor(
    readonly baseUrl: string = "",
    fetchImpl?: FetchLike,
  ) {
    // bind so a bare globalThis.fetch keeps its receiver
    const impl = fetchImpl ?? globalThis.fetch;
    this.fetchImpl = (input, init) => impl.call(globalThis, input, init);
  }

  async health(): Promise<{ status: string }> {
    return this.request("GET", "/api/health");
  }

  async createSession(body: CreateSessionRequest): Promise<CreateSessionResponse> {
    return this.request("POST", "/api/sessions", body);
  }

  async getSession(sessionId: string): Promise<SessionSummary> {
    return this.request("GET", `/api/sessions/${sessionId}`);
  }

  async getPopulation(sessionId: string, generation?: number): Promise<PopulationPayload> {
    const query = generation === undefined ? "" : `?generation=${generation}`;
    return this.request("GET", `/api/sessions/${sessionId}/population${query}`);
  }

  async postVotes(sessionId: string, votes: number[]): Promise<{ accepted: boolean }> {
    return this.request("POST", `/api/sessions/${sessionId}/votes`, { votes });
  }

  async evolve(sessionId: string): Promise<PopulationPayload> {
    return this.request("POST", `/api/sessions/${sessionId}/evolve`);
  }

  async getModel(sessionId: string): Promise<Record<string, unknown>> {
    return this.request("GET", `/api/sessions/${sessionId}/model`);
  }

  async sampleModel(sessionId: string, count: number, seed?: number): Promise<SampleResponse> {
    const body: Record<string, unknown> = { count };
    if (seed !== undefined) body.seed = seed;
    return this.request("POST", `/api/sessions/${sessionId}/model/sample`, body);
  }

  imageUrl(relative: string): string {
    return this.baseUrl + relative;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError("service_unreachable", String(err), 0);
    }
    if (!response.ok) {
      let code = "http_error";
      let message = `HTTP ${response.status}`;
      try {
        const doc = (await response.json()) as { error?: { code: string; message: string } };
        if (doc.error) {
          code = doc.error.code;
          message = doc.error.message;
        }
      } catch {
        /* non-JSON error body: keep defaults */
      }
      throw new ApiError(code, message, response.status);
    }
    return (await response.json()) as T;
  }
}
