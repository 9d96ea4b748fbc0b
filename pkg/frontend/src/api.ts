/** Typed client for the workbench /v1 JSON API. */

export type Direction = 'forward' | 'backward';

export interface NeighborSet {
  semantic: string[];
  kg: string[];
  citation: string[];
  caps: { semantic: number; citation: number };
}

export interface RetrieveRequest {
  seed: string;
  target_type: string;
  direction: Direction;
  background: string;
  doc_id?: string;
  k_semantic?: number;
  k_citation?: number;
}

export interface RetrieveResponse {
  neighbors: NeighborSet;
  model_input: string;
}

export interface InstanceSplits {
  train: string[];
  valid: string[];
  test: string[];
}

export interface SessionResponse {
  session_id: string;
  assignments: Record<string, string[]>;
  overlap: Record<string, string[]>;
}

/** One model output under a blind handle; the model name is never present. */
export interface BlindedOutput {
  handle: string;
  text: string;
}

export interface Rating {
  label: 'helpful' | 'unhelpful';
  criteria: Record<string, number>;
}

export interface AnnotationResponse {
  id: string;
}

export interface AgreementReport {
  pair_agreement: Record<string, number | null>;
  model_votes: Record<string, { helpful: number; unhelpful: number; votes: number }>;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class WorkbenchClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? undefined : { 'Content-Type': 'application/json' },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const parsed = await response.json();
        if (parsed && typeof parsed.detail === 'string') detail = parsed.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  instances(): Promise<InstanceSplits> {
    return this.request('GET', '/v1/instances');
  }

  retrieve(req: RetrieveRequest): Promise<RetrieveResponse> {
    return this.request('POST', '/v1/retrieve', req);
  }

  createSession(
    raters: string[],
    instanceIds: string[],
    seed = 0,
  ): Promise<SessionResponse> {
    return this.request('POST', '/v1/sessions', {
      raters,
      instance_ids: instanceIds,
      seed,
    });
  }

  generate(
    sessionId: string,
    instanceId: string,
    models: string[],
    query: RetrieveRequest,
  ): Promise<{ outputs: BlindedOutput[] }> {
    return this.request('POST', '/v1/generate', {
      session_id: sessionId,
      instance_id: instanceId,
      models,
      seed: query.seed,
      target_type: query.target_type,
      direction: query.direction,
      background: query.background,
    });
  }

  annotate(
    sessionId: string,
    raterId: string,
    instanceId: string,
    outputId: string,
    rating: Rating,
    clientToken?: string,
  ): Promise<AnnotationResponse> {
    return this.request('POST', '/v1/annotate', {
      session_id: sessionId,
      rater_id: raterId,
      instance_id: instanceId,
      output_id: outputId,
      label: rating.label,
      criteria: rating.criteria,
      client_token: clientToken,
    });
  }

  closeSession(sessionId: string): Promise<{ session_id: string; open: boolean }> {
    return this.request('POST', `/v1/sessions/${sessionId}/close`);
  }

  /** Only succeeds after the session is closed; 403 while blinded. */
  resolve(sessionId: string): Promise<{ handles: Record<string, string> }> {
    return this.request('GET', `/v1/sessions/${sessionId}/resolve`);
  }

  agreement(sessionId: string): Promise<AgreementReport> {
    return this.request('GET', `/v1/reports/agreement/${sessionId}`);
  }
}
