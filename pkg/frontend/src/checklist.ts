/** Instruction panel, task checklist and breadcrumb strip. */

import { breadcrumbs, type ViewState } from "./state.js";

export class ProgressPanel {
  readonly root: HTMLElement;

  constructor(private doc: Document) {
    this.root = doc.createElement("section");
    this.root.className = "progress";
    this.root.innerHTML = `
      <p class="instruction" data-testid="instruction"></p>
      <ol class="checklist" data-testid="checklist"></ol>
      <p class="breadcrumbs" data-testid="breadcrumbs"></p>
      <p class="warnings" data-testid="warnings"></p>`;
  }

  update(state: ViewState): void {
    const instruction = this.root.querySelector<HTMLElement>('[data-testid="instruction"]')!;
    instruction.textContent = state.instruction ? state.instruction.text : "";

    const list = this.root.querySelector<HTMLElement>('[data-testid="checklist"]')!;
    list.innerHTML = "";
    const done = new Set(state.completed);
    for (const task of state.tasks) {
      const item = this.doc.createElement("li");
      item.textContent = task;
      item.className = done.has(task) ? "done" : task === state.current ? "current" : "pending";
      list.appendChild(item);
    }

    const crumbs = breadcrumbs(state);
    this.root.querySelector<HTMLElement>('[data-testid="breadcrumbs"]')!.textContent = [
      crumbs.prev ?? "·",
      crumbs.current ?? "done",
      crumbs.next ?? "·",
    ].join("  →  ");

    const warnings = this.root.querySelector<HTMLElement>('[data-testid="warnings"]')!;
    warnings.textContent = state.budgetWarnings.length
      ? `too slow: ${state.budgetWarnings.join(", ")}`
      : "";
  }
}
