// In-memory fixture implementing the vetting-service protocol semantics:
// an ordered candidate queue, per-link decision history with last-write-
// wins, and stats computed exactly as the service computes them.

import type { Candidate, Decision, Stats } from "./api.js";

export interface FixtureOptions {
  nCandidates?: number;
  withSpans?: boolean;
}

export function makeCandidate(i: number, withSpans: boolean): Candidate {
  const sourceText = `system handles token${i} events`;
  return {
    link_id: `auto:s${i}:t${i}`,
    source_id: `s${i}`,
    target_id: `t${i}`,
    score: 1 - i * 0.05,
    source_text: sourceText,
    target_text: `the token${i} event consumer`,
    source_annotations: withSpans
      ? [
          {
            start: sourceText.indexOf(`token${i}`),
            end: sourceText.indexOf(`token${i}`) + `token${i}`.length,
            term: `token${i}`,
            explanation: `planted token ${i}`,
          },
        ]
      : [],
    target_annotations: [],
    rationale: i === 0 ? "Both artifacts involve system handling events" : null,
    decision: null,
  };
}

export class FixtureService {
  queue: Candidate[];
  decisions = new Map<string, { decision: Decision; analyst: string }[]>();
  staleLinks = new Set<string>();
  failNetwork = false;
  requestLog: string[] = [];

  constructor(options: FixtureOptions = {}) {
    const n = options.nCandidates ?? 6;
    this.queue = Array.from({ length: n }, (_, i) =>
      makeCandidate(i, options.withSpans ?? true),
    );
  }

  stats(): Stats {
    let accepted = 0;
    let rejected = 0;
    let skipped = 0;
    for (const history of this.decisions.values()) {
      const last = history[history.length - 1];
      if (!last) continue;
      if (last.decision === "accept") accepted += 1;
      else if (last.decision === "reject") rejected += 1;
      else skipped += 1;
    }
    const vetted = accepted + rejected + skipped;
    const judged = accepted + rejected;
    return {
      total: this.queue.length,
      vetted,
      accepted,
      rejected,
      skipped,
      acceptance_rate: vetted ? accepted / vetted : 0,
      precision_so_far: judged ? accepted / judged : 0,
    };
  }

  latestDecision(linkId: string): Decision | null {
    const history = this.decisions.get(linkId);
    return history?.length ? history[history.length - 1].decision : null;
  }

  fetch: typeof fetch = async (input, init) => {
    const url = typeof input === "string" ? input : input.toString();
    this.requestLog.push(`${init?.method ?? "GET"} ${url}`);
    if (this.failNetwork) {
      throw new TypeError("network connection lost");
    }
    if (url.includes("/candidates")) {
      const parsed = new URL(url);
      const offset = Number(parsed.searchParams.get("offset") ?? "0");
      const limit = Number(parsed.searchParams.get("limit") ?? "50");
      const live = this.queue.filter((c) => !this.staleLinks.has(c.link_id));
      const page = live.slice(offset, offset + limit).map((c) => ({
        ...c,
        decision: this.latestDecision(c.link_id),
      }));
      return jsonResponse(200, { total: live.length, offset, candidates: page });
    }
    if (url.endsWith("/decisions")) {
      const body = JSON.parse(String(init?.body)) as {
        link_id: string;
        decision: Decision;
        analyst: string;
      };
      const known = this.queue.some((c) => c.link_id === body.link_id);
      if (!known || this.staleLinks.has(body.link_id)) {
        return jsonResponse(404, { detail: `unknown link '${body.link_id}'` });
      }
      const history = this.decisions.get(body.link_id) ?? [];
      history.push({ decision: body.decision, analyst: body.analyst });
      this.decisions.set(body.link_id, history);
      return jsonResponse(200, this.stats());
    }
    if (url.endsWith("/stats")) {
      return jsonResponse(200, this.stats());
    }
    return jsonResponse(404, { detail: `no route for ${url}` });
  };
}

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}
