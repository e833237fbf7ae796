// Debrief contract: the charts reproduce the report's series point for point
// and every figure shown is the service's own number.

import { readFileSync } from "node:fs";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { DEFAULT_SPEC, axisRange, chartPoints, mapX, mapY } from "../src/chart.js";
import { DebriefView } from "../src/debrief.js";
import type { ReportDoc } from "../src/types.js";

const GOLDEN: ReportDoc = JSON.parse(
  readFileSync(join(__dirname, "fixtures", "golden_report.json"), "utf-8"),
);

function renderGolden(): DebriefView {
  const view = new DebriefView(document);
  document.body.appendChild(view.root);
  view.render(GOLDEN);
  return view;
}

describe("DebriefView", () => {
  it("reproduces the golden report's rate series point for point", () => {
    const view = renderGolden();
    const charts = view.root.querySelectorAll("svg.series-chart");
    expect(charts.length).toBe(2);

    const rateChart = view.root.querySelector('svg[data-title="rate"]')!;
    const trace = rateChart.querySelector('[data-testid="trace"]')!;
    const series = GOLDEN.cpr.rate_series;
    const [yMin, yMax] = axisRange(series, GOLDEN.cpr.rate_band);
    expect(trace.getAttribute("points")).toBe(chartPoints(series, yMin, yMax));

    // one polyline point per series sample, each recomputed independently
    const points = trace.getAttribute("points")!.split(" ");
    expect(points.length).toBe(series.length);
    const tsValues = series.map(([ts]) => ts);
    const tsMin = Math.min(...tsValues);
    const tsMax = Math.max(...tsValues);
    series.forEach(([ts, value], index) => {
      const expected = `${mapX(ts, tsMin, tsMax, DEFAULT_SPEC)},${mapY(value, yMin, yMax, DEFAULT_SPEC)}`;
      expect(points[index]).toBe(expected);
    });
  });

  it("reproduces the depth series and draws both green thresholds", () => {
    const view = renderGolden();
    const depthChart = view.root.querySelector('svg[data-title="depth"]')!;
    const series = GOLDEN.cpr.depth_series;
    const [yMin, yMax] = axisRange(series, GOLDEN.cpr.depth_band);
    expect(depthChart.querySelector('[data-testid="trace"]')!.getAttribute("points")).toBe(
      chartPoints(series, yMin, yMax),
    );
    const thresholds = depthChart.querySelectorAll(".threshold-line");
    expect(thresholds.length).toBe(2);
    const [low, high] = GOLDEN.cpr.depth_band;
    expect(thresholds[0].getAttribute("y1")).toBe(String(mapY(low, yMin, yMax, DEFAULT_SPEC)));
    expect(thresholds[1].getAttribute("y1")).toBe(String(mapY(high, yMin, yMax, DEFAULT_SPEC)));
  });

  it("shows the final score and previous-session delta from the report", () => {
    const withPrevious: ReportDoc = {
      ...GOLDEN,
      previous_comparison: { session_id: "old", final_score: 15.75, total_duration_ms: 40_000 },
    };
    const view = new DebriefView(document);
    view.render(withPrevious);
    const line = view.root.querySelector('[data-testid="final-score"]')!.textContent!;
    expect(line).toContain("18.00");
    expect(line).toContain("15.75");
  });

  it("navigates overview to detail and back", () => {
    const view = renderGolden();
    const tile = view.root.querySelector<HTMLButtonElement>('[data-task="CheckResponse"]')!;
    tile.click();
    const detail = view.root.querySelector('[data-testid="task-detail"]')!;
    expect(detail.textContent).toContain("CheckResponse");
    (view.root.querySelector('[data-testid="back"]') as HTMLButtonElement).click();
    expect(view.root.querySelector(".tile-grid")).toBeTruthy();
  });

  it("shows per-task percentages as served", () => {
    const view = renderGolden();
    for (const result of GOLDEN.task_results) {
      const percent = view.root.querySelector(`[data-testid="percent-${result.task}"]`)!;
      expect(percent.textContent).toContain(`${(result.subtask_completion * 100).toFixed(0)}%`);
    }
  });

  it("renders a no-compressions tile when the session had none", () => {
    const empty: ReportDoc = {
      ...GOLDEN,
      cpr: {
        ...GOLDEN.cpr,
        push_count: 0,
        avg_rate: null,
        avg_depth: null,
        rate_series: [],
        depth_series: [],
      },
    };
    const view = new DebriefView(document);
    view.render(empty);
    expect(view.root.querySelector('[data-testid="cpr-panel"]')!.textContent).toBe("no compressions");
  });

  it("enlarges a chart when selected", () => {
    const view = renderGolden();
    const chart = view.root.querySelector<SVGSVGElement>('svg[data-title="rate"]')!;
    chart.dispatchEvent(new MouseEvent("click"));
    expect(chart.classList.contains("enlarged")).toBe(true);
  });
});
