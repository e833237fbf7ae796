// Gauge contract: renders served LiveCpr numbers verbatim, promptly, and only
// while the compression task is live. No CPR arithmetic happens client-side.

import { describe, expect, it } from "vitest";

import { ServiceClient } from "../src/api.js";
import { CprGauge } from "../src/gauge.js";
import { applyFeedback, initialState } from "../src/state.js";
import type { FeedbackDoc, SessionInfo } from "../src/types.js";
import { StubEventSource, jsonResponse, makeStubFetch } from "./stubs.js";

const INFO: SessionInfo = {
  session_id: "s1",
  mode: "training",
  active: true,
  current: "EnsureSafety",
  completed: [],
  tasks: [
    { id: "EnsureSafety", max_points: 2, text: "", keyphrase_hints: [] },
    { id: "PerformCompressions", max_points: 4, text: "", keyphrase_hints: [] },
  ],
};

function liveCpr(rate: number | null, depth: number, count: number): FeedbackDoc {
  return { ts: 1000 + count, kind: "LiveCpr", payload: { rate, depth, count } };
}

describe("CprGauge", () => {
  it("renders pushed LiveCpr values within 200 ms of receipt", () => {
    const gauge = new CprGauge(document);
    document.body.appendChild(gauge.root);
    let state = initialState(INFO);

    const source = new StubEventSource();
    const client = new ServiceClient(
      "http://stub",
      makeStubFetch().fetchImpl,
      () => source,
    );
    client.subscribeFeedback("s1", (fb) => {
      state = applyFeedback(state, fb);
      gauge.update(state.gauge);
    });

    const started = performance.now();
    source.emit(liveCpr(107.3, 5.43, 17));
    const elapsed = performance.now() - started;

    expect(elapsed).toBeLessThan(200);
    expect(gauge.root.hidden).toBe(false);
    expect(gauge.root.querySelector('[data-testid="gauge-rate"]')!.textContent).toBe("107.3");
    expect(gauge.root.querySelector('[data-testid="gauge-depth"]')!.textContent).toBe("5.43");
    expect(gauge.root.querySelector('[data-testid="gauge-count"]')!.textContent).toBe("17");
  });

  it("shows the no-display marker before the second push", () => {
    const gauge = new CprGauge(document);
    let state = initialState(INFO);
    state = applyFeedback(state, liveCpr(null, 5.5, 1));
    gauge.update(state.gauge);
    expect(gauge.root.querySelector('[data-testid="gauge-rate"]')!.textContent).toBe("--");
    expect(gauge.root.querySelector('[data-testid="gauge-count"]')!.textContent).toBe("1");
  });

  it("is hidden before compressions and after the task completes", () => {
    const gauge = new CprGauge(document);
    let state = initialState(INFO);
    gauge.update(state.gauge);
    expect(gauge.root.hidden).toBe(true);

    state = applyFeedback(state, liveCpr(104.9, 5.5, 29));
    gauge.update(state.gauge);
    expect(gauge.root.hidden).toBe(false);

    state = applyFeedback(state, {
      ts: 2000,
      kind: "TaskCompleted",
      payload: { task: "PerformCompressions" },
    });
    gauge.update(state.gauge);
    expect(gauge.root.hidden).toBe(true);
  });

  it("places the zero level and target band marks on the depth bar", () => {
    const gauge = new CprGauge(document);
    const band = gauge.root.querySelector<HTMLElement>('[data-testid="target-band"]')!;
    const zero = gauge.root.querySelector<HTMLElement>('[data-testid="zero-mark"]')!;
    expect(zero).toBeTruthy();
    expect(band.style.top).not.toBe("");
    expect(band.style.height).not.toBe("");
  });

  it("passes through whatever the service sends, untouched", () => {
    // a deliberately implausible pair: a client recomputing anything would not show these
    const gauge = new CprGauge(document);
    let state = initialState(INFO);
    state = applyFeedback(state, liveCpr(999.9, 0.01, 12345));
    gauge.update(state.gauge);
    expect(gauge.root.querySelector('[data-testid="gauge-rate"]')!.textContent).toBe("999.9");
    expect(gauge.root.querySelector('[data-testid="gauge-depth"]')!.textContent).toBe("0.01");
    expect(gauge.root.querySelector('[data-testid="gauge-count"]')!.textContent).toBe("12345");
  });

  it("keeps the stub service round trip under the latency budget end to end", async () => {
    // post an event against a stubbed service and render the feedback it returns
    const feedback = [liveCpr(106.0, 5.5, 4)];
    const { fetchImpl } = makeStubFetch(() => jsonResponse({ feedback }));
    const source = new StubEventSource();
    const client = new ServiceClient("http://stub", fetchImpl, () => source);
    const gauge = new CprGauge(document);
    let state = initialState(INFO);

    const started = performance.now();
    const result = await client.postEvent("s1", "CompressionPush", { depth: 5.5 });
    for (const fb of result.feedback) {
      state = applyFeedback(state, fb);
    }
    gauge.update(state.gauge);
    const elapsed = performance.now() - started;

    expect(elapsed).toBeLessThan(200);
    expect(gauge.root.querySelector('[data-testid="gauge-rate"]')!.textContent).toBe("106");
  });
});
