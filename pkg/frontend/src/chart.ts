/** SVG series charts for the debrief: red trace between green threshold lines.
 *
 * `chartPoints` is the pure mapping from a (ts, value) series to polyline
 * coordinates; tests reproduce it point for point against a golden report.
 */

import type { SeriesPoint } from "./types.js";

export interface ChartSpec {
  width: number;
  height: number;
  pad: number;
}

export const DEFAULT_SPEC: ChartSpec = { width: 360, height: 140, pad: 10 };

function roundCoord(value: number): number {
  return Math.round(value * 100) / 100;
}

export function mapX(ts: number, tsMin: number, tsMax: number, spec: ChartSpec): number {
  const span = tsMax - tsMin;
  const fraction = span === 0 ? 0.5 : (ts - tsMin) / span;
  return roundCoord(spec.pad + fraction * (spec.width - 2 * spec.pad));
}

export function mapY(value: number, yMin: number, yMax: number, spec: ChartSpec): number {
  const span = yMax - yMin;
  const fraction = span === 0 ? 0.5 : (value - yMin) / span;
  return roundCoord(spec.height - spec.pad - fraction * (spec.height - 2 * spec.pad));
}

/** "x,y x,y ..." for an SVG polyline; one point per series sample. */
export function chartPoints(
  series: SeriesPoint[],
  yMin: number,
  yMax: number,
  spec: ChartSpec = DEFAULT_SPEC,
): string {
  if (series.length === 0) {
    return "";
  }
  const tsValues = series.map(([ts]) => ts);
  const tsMin = Math.min(...tsValues);
  const tsMax = Math.max(...tsValues);
  return series
    .map(([ts, value]) => `${mapX(ts, tsMin, tsMax, spec)},${mapY(value, yMin, yMax, spec)}`)
    .join(" ");
}

/** Axis range: the band padded so both trace and thresholds stay visible. */
export function axisRange(series: SeriesPoint[], band: [number, number]): [number, number] {
  const values = series.map(([, v]) => v);
  const low = Math.min(band[0], ...values);
  const high = Math.max(band[1], ...values);
  const margin = (high - low || 1) * 0.15;
  return [low - margin, high + margin];
}

const SVG_NS = "http://www.w3.org/2000/svg";

export function renderSeriesChart(
  doc: Document,
  title: string,
  series: SeriesPoint[],
  band: [number, number],
  spec: ChartSpec = DEFAULT_SPEC,
): SVGSVGElement {
  const [yMin, yMax] = axisRange(series, band);
  const svg = doc.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${spec.width} ${spec.height}`);
  svg.setAttribute("class", "series-chart");
  svg.setAttribute("data-title", title);

  for (const [index, level] of band.entries()) {
    const line = doc.createElementNS(SVG_NS, "line");
    const y = mapY(level, yMin, yMax, spec);
    line.setAttribute("x1", String(spec.pad));
    line.setAttribute("x2", String(spec.width - spec.pad));
    line.setAttribute("y1", String(y));
    line.setAttribute("y2", String(y));
    line.setAttribute("class", "threshold-line");
    line.setAttribute("data-testid", `threshold-${index}`);
    line.setAttribute("stroke", "green");
    svg.appendChild(line);
  }

  const trace = doc.createElementNS(SVG_NS, "polyline");
  trace.setAttribute("points", chartPoints(series, yMin, yMax, spec));
  trace.setAttribute("class", "trace-line");
  trace.setAttribute("data-testid", "trace");
  trace.setAttribute("fill", "none");
  trace.setAttribute("stroke", "red");
  svg.appendChild(trace);
  return svg;
}
