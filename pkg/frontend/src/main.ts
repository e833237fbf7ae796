/** Application wiring: create a session, stream feedback, render. */

import { ServiceClient } from "./api.js";
import { ProgressPanel } from "./checklist.js";
import { DebriefView } from "./debrief.js";
import { CprGauge } from "./gauge.js";
import { ActionPalette } from "./palette.js";
import { applyFeedback, initialState, type ViewState } from "./state.js";
import type { FeedbackDoc } from "./types.js";

export interface App {
  root: HTMLElement;
  state: () => ViewState;
  stop: () => void;
}

/** Without fresh pushes the rate readout goes stale and shows the no-display marker. */
export const RATE_STALE_MS = 3000;

export async function startApp(
  doc: Document,
  container: HTMLElement,
  client: ServiceClient,
  mode: string,
  trainee: string,
): Promise<App> {
  const { session_id: sessionId } = await client.createSession(mode, trainee);
  const info = await client.sessionInfo(sessionId);
  let state = initialState(info);
  let finished = false;

  const progress = new ProgressPanel(doc);
  const gauge = new CprGauge(doc);
  const debrief = new DebriefView(doc);
  const banner = doc.createElement("p");
  banner.className = "banner";
  banner.hidden = true;

  const palette = new ActionPalette(doc, (kind, payload) => {
    client.postEvent(sessionId, kind, payload).catch(() => {
      banner.textContent = "connection lost — input frozen";
      banner.hidden = false;
      palette.freeze();
    });
  });

  const pad = doc.createElement("div");
  pad.className = "compression-pad";
  pad.innerHTML = `
    <button data-testid="compress" class="pad-button">Compress</button>
    <label>depth <input type="range" min="3" max="6.5" step="0.1" value="5.5" data-testid="press-depth"></label>`;
  pad.querySelector<HTMLButtonElement>('[data-testid="compress"]')!.addEventListener("click", () => {
    const depth = Number(pad.querySelector<HTMLInputElement>('[data-testid="press-depth"]')!.value);
    client.compress(sessionId, depth).catch(() => undefined);
  });

  const finishButton = doc.createElement("button");
  finishButton.textContent = "Finish session";
  finishButton.setAttribute("data-testid", "finish");
  finishButton.addEventListener("click", async () => {
    finished = true;
    palette.freeze();
    const report = await client.finish(sessionId);
    debrief.render(report);
  });

  const renderAll = () => {
    progress.update(state);
    gauge.update(state.gauge);
    palette.setKeyphrases(state.keyphrases);
    palette.setCompleted(state.completed, finished);
  };

  let lastLiveCprAt = 0;
  const subscription = client.subscribeFeedback(sessionId, (fb: FeedbackDoc) => {
    if (fb.kind === "LiveCpr") {
      lastLiveCprAt = Date.now();
    }
    state = applyFeedback(state, fb);
    renderAll();
  });

  // when the presses stop, the count freezes and the rate decays to "--"
  const staleTimer = setInterval(() => {
    if (state.gauge.visible && state.gauge.rate !== null && Date.now() - lastLiveCprAt > RATE_STALE_MS) {
      gauge.update({ ...state.gauge, rate: null });
    }
  }, 500);

  container.append(banner, progress.root, gauge.root, palette.root, pad, finishButton, debrief.root);
  renderAll();
  return {
    root: container,
    state: () => state,
    stop: () => {
      clearInterval(staleTimer);
      subscription.close();
    },
  };
}

declare global {
  interface Window {
    BLS_SERVICE_URL?: string;
  }
}

export function bootstrapFromDom(): void {
  const doc = document;
  const container = doc.getElementById("app");
  if (!container) {
    return;
  }
  const base = window.BLS_SERVICE_URL ?? `http://${location.hostname}:9751`;
  const client = new ServiceClient(base);
  const form = doc.getElementById("start-form") as HTMLFormElement | null;
  form?.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const mode = (doc.getElementById("mode-select") as HTMLSelectElement).value;
    const trainee = (doc.getElementById("trainee-input") as HTMLInputElement).value || "anon";
    form.hidden = true;
    void startApp(doc, container, client, mode, trainee);
  });
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  bootstrapFromDom();
}
