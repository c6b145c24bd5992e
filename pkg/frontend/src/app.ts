// Vetting client controller: shows the candidate queue one card at a time,
// submits accept/reject/skip decisions (buttons or a/r/s keys), tracks
// progress from server stats, and surfaces request failures in a banner.
// The server is the source of truth: no decision is stored client-side.

import { ApiError, VetClient } from "./api.js";
import type { Candidate, Decision, Stats } from "./api.js";
import { renderCandidate, renderEmptyQueue } from "./render.js";

const PAGE_SIZE = 50;

export interface AppOptions {
  analyst: string;
  pageSize?: number;
}

export class VetApp {
  private candidates: Candidate[] = [];
  private cursor = 0;
  private inFlight = false;
  private stats: Stats | null = null;
  private readonly pageSize: number;
  private readonly keyHandler = (event: KeyboardEvent) => this.onKey(event);

  constructor(
    private readonly root: HTMLElement,
    private readonly client: VetClient,
    private readonly options: AppOptions,
  ) {
    this.pageSize = options.pageSize ?? PAGE_SIZE;
  }

  async start(): Promise<void> {
    this.buildSkeleton();
    document.addEventListener("keydown", this.keyHandler);
    await this.refreshQueue();
    await this.refreshStats();
  }

  stop(): void {
    document.removeEventListener("keydown", this.keyHandler);
  }

  get currentCandidate(): Candidate | null {
    return this.candidates[this.cursor] ?? null;
  }

  private buildSkeleton(): void {
    this.root.innerHTML = "";
    const banner = document.createElement("div");
    banner.id = "error-banner";
    banner.className = "error-banner hidden";
    banner.setAttribute("role", "alert");

    const progress = document.createElement("div");
    progress.id = "progress";
    progress.className = "progress";

    const cardHost = document.createElement("div");
    cardHost.id = "card-host";

    const controls = document.createElement("div");
    controls.id = "controls";
    for (const [decision, label, key] of [
      ["accept", "Accept", "a"],
      ["reject", "Reject", "r"],
      ["skip", "Skip", "s"],
    ] as const) {
      const button = document.createElement("button");
      button.id = `btn-${decision}`;
      button.textContent = `${label} (${key})`;
      button.addEventListener("click", () => void this.decide(decision));
      controls.appendChild(button);
    }
    this.root.append(banner, progress, cardHost, controls);
  }

  private onKey(event: KeyboardEvent): void {
    const decision = ({ a: "accept", r: "reject", s: "skip" } as Record<string, Decision>)[
      event.key
    ];
    if (decision) {
      void this.decide(decision);
    }
  }

  private setButtonsDisabled(disabled: boolean): void {
    for (const id of ["btn-accept", "btn-reject", "btn-skip"]) {
      const button = this.root.querySelector<HTMLButtonElement>(`#${id}`);
      if (button) button.disabled = disabled;
    }
  }

  private showBanner(message: string): void {
    const banner = this.root.querySelector<HTMLElement>("#error-banner");
    if (!banner) return;
    banner.textContent = message;
    banner.classList.remove("hidden");
  }

  private clearBanner(): void {
    const banner = this.root.querySelector<HTMLElement>("#error-banner");
    if (!banner) return;
    banner.textContent = "";
    banner.classList.add("hidden");
  }

  private renderCard(): void {
    const host = this.root.querySelector<HTMLElement>("#card-host");
    if (!host) return;
    host.innerHTML = "";
    const candidate = this.currentCandidate;
    host.appendChild(candidate ? renderCandidate(candidate) : renderEmptyQueue());
  }

  private renderProgress(): void {
    const progress = this.root.querySelector<HTMLElement>("#progress");
    if (!progress) return;
    if (!this.stats) {
      progress.textContent = "";
      return;
    }
    const rate = (this.stats.acceptance_rate * 100).toFixed(0);
    progress.textContent =
      `${this.stats.vetted}/${this.stats.total} vetted, ` +
      `acceptance rate ${rate}%, ` +
      `precision so far ${(this.stats.precision_so_far * 100).toFixed(0)}%`;
  }

  async refreshQueue(): Promise<void> {
    try {
      const page = await this.client.fetchQueue(0, this.pageSize);
      this.candidates = page.candidates;
      this.cursor = this.candidates.findIndex((c) => c.decision === null);
      if (this.cursor < 0) this.cursor = this.candidates.length;
      this.renderCard();
    } catch (error) {
      this.showBanner(`failed to load queue: ${describe(error)}`);
    }
  }

  async refreshStats(): Promise<void> {
    try {
      this.stats = await this.client.fetchStats();
      this.renderProgress();
    } catch (error) {
      this.showBanner(`failed to load stats: ${describe(error)}`);
    }
  }

  async decide(decision: Decision): Promise<void> {
    const candidate = this.currentCandidate;
    if (!candidate || this.inFlight) return;
    this.inFlight = true;
    this.setButtonsDisabled(true);
    this.clearBanner();

    // optimistic: advance to the next card immediately
    const previousCursor = this.cursor;
    const previousDecision = candidate.decision;
    candidate.decision = decision;
    this.cursor += 1;
    this.renderCard();

    try {
      this.stats = await this.client.submitDecision(
        candidate.link_id,
        decision,
        this.options.analyst,
      );
      this.renderProgress();
    } catch (error) {
      // roll back the optimistic update; the server did not record it
      candidate.decision = previousDecision;
      this.cursor = previousCursor;
      if (error instanceof ApiError && error.status === 404) {
        this.showBanner(`candidate is stale (${error.message}); refreshing queue`);
        await this.refreshQueue();
        await this.refreshStats();
      } else {
        this.showBanner(`decision not recorded: ${describe(error)}`);
        this.renderCard();
      }
    } finally {
      this.inFlight = false;
      this.setButtonsDisabled(false);
    }
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return `${error.status} ${error.message}`;
  if (error instanceof Error) return error.message;
  return String(error);
}
