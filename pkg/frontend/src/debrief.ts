/** Debrief explorer: overview grid of task tiles, per-task detail drill-down,
 * CPR charts with threshold lines. All figures come from the report document.
 */

import { renderSeriesChart } from "./chart.js";
import type { ReportDoc, TaskResultDoc } from "./types.js";

function seconds(ms: number | null): string {
  return ms === null ? "--" : `${(ms / 1000).toFixed(1)} s`;
}

export class DebriefView {
  readonly root: HTMLElement;
  private report: ReportDoc | null = null;

  constructor(private doc: Document) {
    this.root = doc.createElement("section");
    this.root.className = "debrief";
    this.root.hidden = true;
  }

  render(report: ReportDoc): void {
    this.report = report;
    this.root.hidden = false;
    this.showOverview();
  }

  showOverview(): void {
    const report = this.report;
    if (!report) {
      return;
    }
    const doc = this.doc;
    this.root.innerHTML = "";

    const summary = doc.createElement("header");
    summary.className = "debrief-summary";
    const max = report.task_results.reduce((acc, r) => acc + r.points_max, 0);
    const delta = report.previous_comparison
      ? ` (last time: ${report.previous_comparison.final_score.toFixed(2)})`
      : "";
    summary.innerHTML = `
      <h2>Debriefing</h2>
      <p data-testid="final-score">Score ${report.final_score.toFixed(2)} / ${max}${delta}</p>
      <p data-testid="order-line">Order ${(report.order_fraction * 100).toFixed(0)}% correct,
        duration ${seconds(report.total_duration_ms)}</p>`;
    this.root.appendChild(summary);

    const grid = doc.createElement("div");
    grid.className = "tile-grid";
    for (const result of report.task_results) {
      grid.appendChild(this.tile(result));
    }
    this.root.appendChild(grid);
    this.root.appendChild(this.cprPanel());

    if (report.hints.length > 0) {
      const hints = doc.createElement("ul");
      hints.className = "hints";
      hints.setAttribute("data-testid", "hints");
      for (const hint of report.hints) {
        const item = doc.createElement("li");
        item.textContent = hint;
        hints.appendChild(item);
      }
      this.root.appendChild(hints);
    }
  }

  private tile(result: TaskResultDoc): HTMLElement {
    const tile = this.doc.createElement("button");
    tile.className = `tile ${result.completed ? "done" : "missed"}`;
    tile.setAttribute("data-task", result.task);
    tile.innerHTML = `
      <span class="tile-name">${result.task}</span>
      <span class="tile-percent" data-testid="percent-${result.task}">
        ${(result.subtask_completion * 100).toFixed(0)}%</span>
      <span class="tile-points">${result.points_earned}/${result.points_max}</span>
      <span class="tile-duration">${seconds(result.duration_ms)}</span>`;
    tile.addEventListener("click", () => this.showDetail(result.task));
    return tile;
  }

  private cprPanel(): HTMLElement {
    const report = this.report!;
    const panel = this.doc.createElement("div");
    panel.className = "cpr-panel";
    panel.setAttribute("data-testid", "cpr-panel");
    if (report.cpr.push_count === 0) {
      panel.textContent = "no compressions";
      return panel;
    }
    const rate = report.cpr.avg_rate === null ? "--" : report.cpr.avg_rate.toFixed(1);
    const depth = report.cpr.avg_depth === null ? "--" : report.cpr.avg_depth.toFixed(2);
    const header = this.doc.createElement("p");
    header.setAttribute("data-testid", "cpr-averages");
    header.textContent =
      `${report.cpr.push_count} compressions, avg ${rate}/min, ${depth} cm, ` +
      `release ${report.cpr.full_release_always ? "ok" : "incomplete"}`;
    panel.appendChild(header);

    const rateChart = renderSeriesChart(this.doc, "rate", report.cpr.rate_series, report.cpr.rate_band);
    const depthChart = renderSeriesChart(this.doc, "depth", report.cpr.depth_series, report.cpr.depth_band);
    for (const chart of [rateChart, depthChart]) {
      chart.addEventListener("click", () => chart.classList.toggle("enlarged"));
      panel.appendChild(chart);
    }
    return panel;
  }

  showDetail(task: string): void {
    const report = this.report;
    if (!report) {
      return;
    }
    const result = report.task_results.find((r) => r.task === task);
    if (!result) {
      return;
    }
    this.root.innerHTML = "";
    const detail = this.doc.createElement("article");
    detail.className = "task-detail";
    detail.setAttribute("data-testid", "task-detail");
    detail.innerHTML = `
      <h3>${result.task}</h3>
      <dl>
        <dt>Completed</dt><dd>${result.completed ? "yes" : "no"}</dd>
        <dt>Subtasks</dt><dd>${(result.subtask_completion * 100).toFixed(0)}%</dd>
        <dt>Points</dt><dd>${result.points_earned} of ${result.points_max}</dd>
        <dt>Duration</dt><dd>${seconds(result.duration_ms)}</dd>
        <dt>In order</dt><dd>${result.in_order ? "yes" : "no"}</dd>
      </dl>`;
    const back = this.doc.createElement("button");
    back.textContent = "back to overview";
    back.setAttribute("data-testid", "back");
    back.addEventListener("click", () => this.showOverview());
    detail.appendChild(back);
    if (task === "PerformCompressions") {
      detail.appendChild(this.cprPanel());
    }
    this.root.appendChild(detail);
  }
}
