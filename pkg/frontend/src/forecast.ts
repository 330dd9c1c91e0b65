/**
 * Forecast explorer chart: observed history, the forecast issued at or
 * before the chosen instant (with an uncertainty band from the decision
 * run), and optionally the preceding issue for version comparison.
 */

import { fmt, fmtTime } from './format.js';
import type { ForecastBody, PointRow, RunResult } from './types.js';

const SVG_NS = 'http://www.w3.org/2000/svg';

export interface ForecastChartData {
  seriesId: string;
  seriesKey: string;
  observed: PointRow[];
  forecast: ForecastBody;
  previous: ForecastBody | null;
  run: RunResult | null; // posterior band source for this series
}

interface Scaled {
  t0: number;
  t1: number;
  lo: number;
  hi: number;
}

function epoch(ts: string): number {
  return Date.parse(ts) / 1000;
}

function bounds(data: ForecastChartData): Scaled {
  let t0 = Infinity;
  let t1 = -Infinity;
  let lo = Infinity;
  let hi = -Infinity;
  const see = (ts: string, v: number) => {
    const t = epoch(ts);
    if (t < t0) t0 = t;
    if (t > t1) t1 = t;
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  };
  for (const p of data.observed) see(p.timestamp, p.value);
  for (const p of data.forecast.points) see(p.timestamp, p.value);
  if (data.previous) for (const p of data.previous.points) see(p.timestamp, p.value);
  const trace = data.run?.series[data.seriesId];
  if (trace && data.run) {
    data.run.step_times.forEach((ts, i) => {
      see(ts, trace.mean[i] - 2 * trace.sd[i]);
      see(ts, trace.mean[i] + 2 * trace.sd[i]);
    });
  }
  if (!Number.isFinite(t0)) return { t0: 0, t1: 1, lo: 0, hi: 1 };
  const pad = (hi - lo || 1) * 0.08;
  return { t0, t1: Math.max(t1, t0 + 1), lo: lo - pad, hi: hi + pad };
}

export function polylinePoints(
  points: { t: number; v: number }[],
  s: Scaled,
  width: number,
  height: number,
): string {
  return points
    .map((p) => {
      const x = ((p.t - s.t0) / (s.t1 - s.t0)) * width;
      const y = height - ((p.v - s.lo) / (s.hi - s.lo)) * height;
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(' ');
}

function el(tag: string, attrs: Record<string, string>): SVGElement {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  return node;
}

function addPolyline(
  svg: SVGElement,
  rows: PointRow[],
  s: Scaled,
  w: number,
  h: number,
  cls: string,
): void {
  if (!rows.length) return;
  svg.appendChild(
    el('polyline', {
      points: polylinePoints(
        rows.map((p) => ({ t: epoch(p.timestamp), v: p.value })),
        s,
        w,
        h,
      ),
      class: cls,
    }),
  );
}

export function renderForecastChart(
  container: HTMLElement,
  data: ForecastChartData,
  width = 640,
  height = 260,
): void {
  container.textContent = '';

  const head = document.createElement('div');
  head.className = 'chart-head';
  const prevLabel = data.previous
    ? ` · previous issue ${fmtTime(data.previous.issue_time)}`
    : '';
  head.textContent =
    `${data.seriesKey} — ${data.forecast.model_version}` +
    ` · issued ${fmtTime(data.forecast.issue_time)}${prevLabel}`;
  container.appendChild(head);

  const s = bounds(data);
  const svg = el('svg', {
    viewBox: `0 0 ${width} ${height}`,
    class: 'forecast-svg',
  });

  // posterior +/-2 sd band, when the decision run covers this series
  const trace = data.run?.series[data.seriesId];
  if (trace && data.run) {
    const upper = data.run.step_times.map((ts, i) => ({
      t: epoch(ts),
      v: trace.mean[i] + 2 * trace.sd[i],
    }));
    const lower = data.run.step_times
      .map((ts, i) => ({ t: epoch(ts), v: trace.mean[i] - 2 * trace.sd[i] }))
      .reverse();
    svg.appendChild(
      el('polygon', {
        points: polylinePoints([...upper, ...lower], s, width, height),
        class: 'posterior-band',
      }),
    );
  }

  addPolyline(svg, data.observed, s, width, height, 'trace observed');
  if (data.previous) {
    addPolyline(svg, data.previous.points, s, width, height, 'trace previous');
  }
  addPolyline(svg, data.forecast.points, s, width, height, 'trace forecast');

  const axis = el('text', { x: '4', y: '14', class: 'axis-label' });
  axis.textContent = `${fmt(s.hi)} .. ${fmt(s.lo)}`;
  svg.appendChild(axis);

  container.appendChild(svg);
}
