// Typed client for the vetting service HTTP+JSON endpoints.

export interface TermSpan {
  start: number;
  end: number;
  term: string;
  explanation: string;
}

export interface Candidate {
  link_id: string;
  source_id: string;
  target_id: string;
  score: number | null;
  source_text: string;
  target_text: string;
  source_annotations: TermSpan[];
  target_annotations: TermSpan[];
  rationale: string | null;
  decision: Decision | null;
}

export interface CandidatePage {
  total: number;
  offset: number;
  candidates: Candidate[];
}

export interface Stats {
  total: number;
  vetted: number;
  accepted: number;
  rejected: number;
  skipped: number;
  acceptance_rate: number;
  precision_so_far: number;
}

export type Decision = "accept" | "reject" | "skip";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // keep statusText
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class VetClient {
  constructor(
    private readonly baseUrl: string,
    private readonly sessionId: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  async fetchQueue(offset: number, limit: number): Promise<CandidatePage> {
    const url = `${this.baseUrl}/sessions/${this.sessionId}/candidates?offset=${offset}&limit=${limit}`;
    return asJson<CandidatePage>(await this.fetchFn(url));
  }

  async submitDecision(linkId: string, decision: Decision, analyst: string): Promise<Stats> {
    const url = `${this.baseUrl}/sessions/${this.sessionId}/decisions`;
    const response = await this.fetchFn(url, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ link_id: linkId, decision, analyst }),
    });
    return asJson<Stats>(response);
  }

  async fetchStats(): Promise<Stats> {
    return asJson<Stats>(await this.fetchFn(`${this.baseUrl}/sessions/${this.sessionId}/stats`));
  }
}
