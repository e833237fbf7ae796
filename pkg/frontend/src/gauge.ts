/** Live CPR gauge: rate readout, compression count, depth bar.
 *
 * Numbers render exactly as delivered by the service (one decimal for rate
 * and two for depth are the server's own rounding). The depth bar shows the
 * zero level at the top and the target band; only pixel scaling happens here.
 */

import type { GaugeState } from "./state.js";

const BAR_MAX_CM = 6.5;

export class CprGauge {
  readonly root: HTMLElement;
  private rateEl: HTMLElement;
  private countEl: HTMLElement;
  private depthEl: HTMLElement;
  private fillEl: HTMLElement;

  constructor(doc: Document, private depthBand: [number, number] = [5.0, 6.0]) {
    this.root = doc.createElement("section");
    this.root.className = "cpr-gauge";
    this.root.hidden = true;
    this.root.innerHTML = `
      <div class="gauge-rate">
        <span class="gauge-label">rate /min</span>
        <span class="gauge-value" data-testid="gauge-rate">--</span>
      </div>
      <div class="gauge-count">
        <span class="gauge-label">compressions</span>
        <span class="gauge-value" data-testid="gauge-count">0</span>
      </div>
      <div class="gauge-depth">
        <span class="gauge-label">depth cm</span>
        <span class="gauge-value" data-testid="gauge-depth">--</span>
        <div class="depth-bar" data-testid="depth-bar">
          <div class="zero-mark" data-testid="zero-mark" title="zero level"></div>
          <div class="target-band" data-testid="target-band"></div>
          <div class="depth-fill" data-testid="depth-fill"></div>
        </div>
      </div>`;
    this.rateEl = this.root.querySelector('[data-testid="gauge-rate"]') as HTMLElement;
    this.countEl = this.root.querySelector('[data-testid="gauge-count"]') as HTMLElement;
    this.depthEl = this.root.querySelector('[data-testid="gauge-depth"]') as HTMLElement;
    this.fillEl = this.root.querySelector('[data-testid="depth-fill"]') as HTMLElement;

    const band = this.root.querySelector('[data-testid="target-band"]') as HTMLElement;
    band.style.top = `${(this.depthBand[0] / BAR_MAX_CM) * 100}%`;
    band.style.height = `${((this.depthBand[1] - this.depthBand[0]) / BAR_MAX_CM) * 100}%`;
  }

  update(state: GaugeState): void {
    this.root.hidden = !state.visible;
    this.rateEl.textContent = state.rate === null ? "--" : String(state.rate);
    this.countEl.textContent = String(state.count);
    this.depthEl.textContent = state.depth === null ? "--" : String(state.depth);
    const depth = state.depth ?? 0;
    this.fillEl.style.height = `${Math.min(100, (depth / BAR_MAX_CM) * 100)}%`;
  }
}
