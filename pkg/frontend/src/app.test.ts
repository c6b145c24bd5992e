// @vitest-environment jsdom
import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { VetClient } from "./api.js";
import { VetApp } from "./app.js";
import { FixtureService } from "./testutil.js";

function pressKey(key: string): void {
  document.dispatchEvent(new KeyboardEvent("keydown", { key }));
}

async function flush(): Promise<void> {
  // drain the microtask queue a few times so chained awaits settle
  for (let i = 0; i < 10; i += 1) {
    await Promise.resolve();
  }
}

describe("VetApp", () => {
  let service: FixtureService;
  let root: HTMLElement;
  let app: VetApp;

  beforeEach(async () => {
    document.body.innerHTML = '<div id="app"></div>';
    root = document.getElementById("app") as HTMLElement;
    service = new FixtureService({ nCandidates: 6 });
    const client = new VetClient("http://fixture", "sess1", service.fetch);
    app = new VetApp(root, client, { analyst: "ana" });
    await app.start();
    await flush();
  });

  afterEach(() => {
    app.stop();
  });

  it("renders the first candidate with highlighted terms and rationale", () => {
    const card = root.querySelector(".candidate-card") as HTMLElement;
    expect(card).not.toBeNull();
    expect(card.dataset.linkId).toBe("auto:s0:t0");
    const mark = card.querySelector("mark.term") as HTMLElement;
    expect(mark.textContent).toBe("token0");
    expect(mark.title).toBe("planted token 0");
    expect(card.querySelector(".rationale")?.textContent).toContain("Both artifacts involve");
  });

  it("accept keystroke produces a server-visible decision and advances", async () => {
    pressKey("a");
    await flush();
    expect(service.latestDecision("auto:s0:t0")).toBe("accept");
    expect(service.requestLog.some((r) => r.startsWith("POST"))).toBe(true);
    const card = root.querySelector(".candidate-card") as HTMLElement;
    expect(card.dataset.linkId).toBe("auto:s1:t1");
  });

  it("reject and skip keys map to their decisions", async () => {
    pressKey("r");
    await flush();
    pressKey("s");
    await flush();
    expect(service.latestDecision("auto:s0:t0")).toBe("reject");
    expect(service.latestDecision("auto:s1:t1")).toBe("skip");
  });

  it("after 4 decisions the progress display matches GET /stats", async () => {
    pressKey("a");
    await flush();
    pressKey("a");
    await flush();
    pressKey("r");
    await flush();
    pressKey("s");
    await flush();

    const stats = service.stats();
    expect(stats.vetted).toBe(4);
    const progress = root.querySelector("#progress") as HTMLElement;
    expect(progress.textContent).toContain(`${stats.vetted}/${stats.total} vetted`);
    expect(progress.textContent).toContain(
      `acceptance rate ${(stats.acceptance_rate * 100).toFixed(0)}%`,
    );
  });

  it("stale-link 404 shows the error banner and refreshes the queue", async () => {
    service.staleLinks.add("auto:s0:t0");
    pressKey("a");
    await flush();

    const banner = root.querySelector("#error-banner") as HTMLElement;
    expect(banner.classList.contains("hidden")).toBe(false);
    expect(banner.textContent).toContain("stale");
    // queue was refreshed without the stale link; nothing was recorded
    expect(service.latestDecision("auto:s0:t0")).toBeNull();
    const card = root.querySelector(".candidate-card") as HTMLElement;
    expect(card.dataset.linkId).toBe("auto:s1:t1");
    const refreshes = service.requestLog.filter((r) => r.includes("/candidates"));
    expect(refreshes.length).toBeGreaterThanOrEqual(2);
  });

  it("network failure rolls back the optimistic update", async () => {
    service.failNetwork = true;
    pressKey("a");
    await flush();

    const banner = root.querySelector("#error-banner") as HTMLElement;
    expect(banner.classList.contains("hidden")).toBe(false);
    expect(banner.textContent).toContain("decision not recorded");
    expect(service.decisions.size).toBe(0);
    // still on the first card
    const card = root.querySelector(".candidate-card") as HTMLElement;
    expect(card.dataset.linkId).toBe("auto:s0:t0");

    // recovery: once the network is back the same card can be decided
    service.failNetwork = false;
    pressKey("a");
    await flush();
    expect(service.latestDecision("auto:s0:t0")).toBe("accept");
  });

  it("buttons are disabled while a request is in flight", async () => {
    app.stop(); // detach the beforeEach app before mounting a fresh one
    let release: (value: Response) => void = () => {};
    const gate = new Promise<Response>((resolve) => {
      release = resolve;
    });
    const realFetch = service.fetch;
    let intercepted = false;
    service.fetch = async (input, init) => {
      const url = typeof input === "string" ? input : input.toString();
      if (url.endsWith("/decisions") && !intercepted) {
        intercepted = true;
        return gate;
      }
      return realFetch(input, init);
    };
    const client = new VetClient("http://fixture", "sess1", (i, n) => service.fetch(i, n));
    app = new VetApp(root, client, { analyst: "ana" });
    await app.start();
    await flush();

    pressKey("a");
    await flush();
    const accept = root.querySelector("#btn-accept") as HTMLButtonElement;
    expect(accept.disabled).toBe(true);
    // a second keystroke while in flight must not double-submit
    pressKey("a");
    await flush();

    release(
      new Response(JSON.stringify(service.stats()), {
        status: 200,
        headers: { "Content-Type": "application/json" },
      }),
    );
    await flush();
    expect(accept.disabled).toBe(false);
    const posts = service.requestLog.filter((r) => r.startsWith("POST"));
    expect(posts.length).toBe(0); // the gated POST never reached the fixture log
  });

  it("shows the empty-queue message after every candidate is decided", async () => {
    for (let i = 0; i < 6; i += 1) {
      pressKey("a");
      await flush();
    }
    expect(root.querySelector(".queue-empty")).not.toBeNull();
    // further keystrokes are no-ops
    pressKey("a");
    await flush();
    expect(service.stats().vetted).toBe(6);
  });
});
