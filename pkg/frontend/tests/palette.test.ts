// Palette contract: each control posts exactly one typed event; controls
// disable once their task completes; chips mirror the served hints.

import { describe, expect, it } from "vitest";

import { ActionPalette } from "../src/palette.js";

function makePalette(nowValues: number[] = []) {
  const posted: Array<{ kind: string; payload: Record<string, unknown> }> = [];
  const clock = [...nowValues];
  const palette = new ActionPalette(
    document,
    (kind, payload) => posted.push({ kind, payload }),
    () => clock.shift() ?? Date.now(),
  );
  document.body.appendChild(palette.root);
  return { palette, posted };
}

function click(palette: ActionPalette, testid: string): void {
  palette.root.querySelector<HTMLButtonElement>(`[data-testid="${testid}"]`)!.click();
}

describe("ActionPalette", () => {
  it("posts the glass event from the bin control", () => {
    const { palette, posted } = makePalette();
    click(palette, "dispose-glass");
    expect(posted).toEqual([{ kind: "GlassDisposed", payload: {} }]);
  });

  it("dials a number and posts PhoneDialed", () => {
    const { palette, posted } = makePalette();
    const display = palette.root.querySelector<HTMLInputElement>('[data-testid="dial-display"]')!;
    display.value = "112";
    click(palette, "dial-call");
    expect(posted).toEqual([{ kind: "PhoneDialed", payload: { number: "112" } }]);
  });

  it("posts the tilt angle from the slider", () => {
    const { palette, posted } = makePalette();
    palette.root.querySelector<HTMLInputElement>('[data-testid="tilt-angle"]')!.value = "30";
    click(palette, "tilt-head");
    expect(posted).toEqual([{ kind: "HeadTiltReached", payload: { angle: 30 } }]);
  });

  it("measures the head-above-mouth hold duration", () => {
    const { palette, posted } = makePalette([1000, 4200]);
    const hold = palette.root.querySelector<HTMLButtonElement>('[data-testid="hold-breath-check"]')!;
    hold.dispatchEvent(new Event("pointerdown"));
    hold.dispatchEvent(new Event("pointerup"));
    expect(posted).toEqual([{ kind: "HeadAboveMouth", payload: { hold_ms: 3200 } }]);
  });

  it("keyphrase chips post the phrase and follow the hints", () => {
    const { palette, posted } = makePalette();
    palette.setKeyphrases(["stand-back"]);
    palette.root.querySelector<HTMLButtonElement>('[data-phrase="stand-back"]')!.click();
    expect(posted).toEqual([{ kind: "Keyphrase", payload: { phrase: "stand-back" } }]);
    palette.setKeyphrases([]);
    expect(palette.root.querySelector('[data-phrase="stand-back"]')).toBeNull();
  });

  it("disables controls whose task is complete", () => {
    const { palette } = makePalette();
    palette.setCompleted(["EnsureSafety"], false);
    const glass = palette.root.querySelector<HTMLButtonElement>('[data-testid="dispose-glass"]')!;
    const shake = palette.root.querySelector<HTMLButtonElement>('[data-testid="shake-shoulders"]')!;
    expect(glass.disabled).toBe(true);
    expect(shake.disabled).toBe(false);
  });

  it("freeze disables everything (connection loss)", () => {
    const { palette } = makePalette();
    palette.freeze();
    const buttons = Array.from(palette.root.querySelectorAll<HTMLButtonElement>("button"));
    expect(buttons.length).toBeGreaterThan(5);
    expect(buttons.every((b) => b.disabled)).toBe(true);
  });

  it("posts both AED pads separately", () => {
    const { palette, posted } = makePalette();
    click(palette, "pad-left");
    click(palette, "pad-right");
    expect(posted).toEqual([
      { kind: "AedPadPlaced", payload: { side: "left" } },
      { kind: "AedPadPlaced", payload: { side: "right" } },
    ]);
  });
});
