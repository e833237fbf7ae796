/** Action palette: one control per trainee action, posting typed events.
 *
 * Controls disable once their task completes; keyphrase chips appear from
 * KeyphraseHint feedback. The head-above-mouth button reports how long it
 * was held; the tilt slider reports the chosen angle.
 */

export type PostEvent = (kind: string, payload: Record<string, unknown>) => void;

interface ControlSpec {
  id: string;
  label: string;
  task: string;
  onClick: (post: PostEvent, root: HTMLElement) => void;
}

const CONTROLS: ControlSpec[] = [
  {
    id: "dispose-glass",
    label: "Drop glass in bin",
    task: "EnsureSafety",
    onClick: (post) => post("GlassDisposed", {}),
  },
  {
    id: "shake-shoulders",
    label: "Shake shoulders",
    task: "CheckResponse",
    onClick: (post) => post("HandsOnShoulders", {}),
  },
  {
    id: "hands-on-head",
    label: "Hands on head",
    task: "OpenAirways",
    onClick: (post) => post("PositionTriggerEntered", { zone: "victim-head" }),
  },
  {
    id: "tilt-head",
    label: "Tilt head",
    task: "OpenAirways",
    onClick: (post, root) => {
      const slider = root.querySelector<HTMLInputElement>('[data-testid="tilt-angle"]')!;
      post("HeadTiltReached", { angle: Number(slider.value) });
    },
  },
  {
    id: "ventilate",
    label: "Ventilate",
    task: "Ventilate",
    onClick: (post) => post("VentilationDelivered", {}),
  },
  {
    id: "pad-left",
    label: "Place left pad",
    task: "PlaceAedPads",
    onClick: (post) => post("AedPadPlaced", { side: "left" }),
  },
  {
    id: "pad-right",
    label: "Place right pad",
    task: "PlaceAedPads",
    onClick: (post) => post("AedPadPlaced", { side: "right" }),
  },
  {
    id: "shock",
    label: "Press shock button",
    task: "TriggerShock",
    onClick: (post) => post("AedShockPressed", {}),
  },
];

export class ActionPalette {
  readonly root: HTMLElement;
  private holdStart = 0;

  constructor(
    private doc: Document,
    private post: PostEvent,
    private now: () => number = () => Date.now(),
  ) {
    this.root = doc.createElement("section");
    this.root.className = "palette";
    const buttons = CONTROLS.map(
      (c) =>
        `<button data-testid="${c.id}" data-task="${c.task}" class="action">${c.label}</button>`,
    ).join("");
    this.root.innerHTML = `
      ${buttons}
      <label class="tilt">angle
        <input type="range" min="0" max="45" value="25" data-testid="tilt-angle">
      </label>
      <button data-testid="hold-breath-check" data-task="CheckBreathing" class="action hold">
        Hold head above mouth</button>
      <div class="dialer">
        <input data-testid="dial-display" placeholder="dial number">
        <button data-testid="dial-call" data-task="CallAmbulance" class="action">Call</button>
      </div>
      <div class="chips" data-testid="keyphrase-chips"></div>`;

    for (const spec of CONTROLS) {
      const el = this.root.querySelector<HTMLButtonElement>(`[data-testid="${spec.id}"]`)!;
      el.addEventListener("click", () => spec.onClick(this.post, this.root));
    }
    const hold = this.root.querySelector<HTMLButtonElement>('[data-testid="hold-breath-check"]')!;
    hold.addEventListener("pointerdown", () => {
      this.holdStart = this.now();
    });
    hold.addEventListener("pointerup", () => {
      this.post("HeadAboveMouth", { hold_ms: this.now() - this.holdStart });
    });
    const call = this.root.querySelector<HTMLButtonElement>('[data-testid="dial-call"]')!;
    call.addEventListener("click", () => {
      const display = this.root.querySelector<HTMLInputElement>('[data-testid="dial-display"]')!;
      this.post("PhoneDialed", { number: display.value });
    });
  }

  /** Chips mirror the hint feedback; clicking posts the keyphrase. */
  setKeyphrases(phrases: string[]): void {
    const chips = this.root.querySelector<HTMLElement>('[data-testid="keyphrase-chips"]')!;
    chips.innerHTML = "";
    for (const phrase of phrases) {
      const chip = this.doc.createElement("button");
      chip.className = "chip";
      chip.textContent = phrase;
      chip.setAttribute("data-phrase", phrase);
      chip.addEventListener("click", () => this.post("Keyphrase", { phrase }));
      chips.appendChild(chip);
    }
  }

  setCompleted(completed: string[], finished: boolean): void {
    const done = new Set(completed);
    for (const button of Array.from(this.root.querySelectorAll<HTMLButtonElement>("[data-task]"))) {
      button.disabled = finished || done.has(button.getAttribute("data-task") ?? "");
    }
  }

  freeze(): void {
    for (const button of Array.from(this.root.querySelectorAll("button"))) {
      (button as HTMLButtonElement).disabled = true;
    }
  }
}
