/**
 * Page wiring: load installation metadata, run the baseline analysis at the
 * latest forecast issue, and keep the three panels in sync.
 *
 * The console is read-only toward the service except for what-if calls, and
 * holds no server state: a refresh rebuilds this exact view from the API.
 */

import { ApiClient, ApiError, SupersededError } from './api.js';
import { fmt, fmtEnergy, fmtP, fmtTime } from './format.js';
import { renderForecastChart } from './forecast.js';
import { renderGridView } from './gridview.js';
import { layoutTopology } from './layout.js';
import { ViewState, violationBadges } from './state.js';
import { renderWhatIfPanel } from './whatif.js';
import type { RunResult, SeriesRow, Topology } from './types.js';

const GRID_W = 560;
const GRID_H = 460;
const HOUR_MS = 3_600_000;

function byId(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function shiftIssue(issue: string, hours: number): string {
  const t = new Date(Date.parse(issue) + hours * HOUR_MS);
  return t.toISOString().replace(/\.\d{3}Z$/, 'Z');
}

async function boot(): Promise<void> {
  const api = new ApiClient();
  const [info, topo, catalogue] = await Promise.all([
    api.installation(),
    api.topology(),
    api.seriesCatalogue(),
  ]);
  const state = new ViewState(info);
  const positions = layoutTopology(topo, GRID_W, GRID_H);
  const keyOf = new Map(
    Object.entries(info.series).map(([key, sid]) => [sid, key]),
  );

  byId('installation-name').textContent = info.name;
  byId('installation-counts').textContent =
    `${info.counts.series} series · ${info.counts.entities} entities · ` +
    `${info.model_configs} models · p* ${info.p_threshold}`;

  // latest issue: newest forecast for any grid load series
  const anyGridSeries =
    topo.nodes.map((n) => n.series['load']).find((s) => s) ??
    Object.values(info.series)[0];
  const probe = await api.forecast(anyGridSeries);
  state.issueTime = probe.issue_time;
  state.baseline = await api.domsRun(state.issueTime);
  state.current = state.baseline;

  const issueLabel = byId('issue-time');

  function renderStatus(): void {
    const r = state.current!;
    issueLabel.textContent = fmtTime(r.issue_time);
    const mode = byId('result-mode');
    mode.textContent = r.what_if
      ? `what-if (${r.adjustments.length} adjustments)`
      : 'baseline';
    mode.className = r.what_if ? 'mode whatif' : 'mode baseline';
    const warn = byId('warnings');
    warn.textContent = r.warnings.join(' | ');
  }

  function renderGrid(): void {
    renderGridView(byId('grid-view'), {
      topo,
      positions,
      badges: violationBadges(state.current!, topo),
      selected: state.selectedEntity,
      width: GRID_W,
      height: GRID_H,
      onSelect: selectEntity,
    });
  }

  function renderViolations(): void {
    const host = byId('violations');
    host.textContent = '';
    const r = state.current!;
    if (!r.violations.length) {
      host.textContent = 'no predicted violations';
      return;
    }
    const table = document.createElement('table');
    table.className = 'violations-table';
    table.innerHTML =
      '<thead><tr><th>series</th><th>when</th><th>bound</th>' +
      '<th>mean</th><th>limit</th><th>p</th></tr></thead>';
    const body = document.createElement('tbody');
    for (const v of r.violations.slice(0, 40)) {
      const tr = document.createElement('tr');
      const key = keyOf.get(v.series) ?? v.series;
      tr.innerHTML =
        `<td>${key}</td><td>${fmtTime(v.timestamp)}</td>` +
        `<td>${v.bound}</td><td>${fmt(v.predicted_mean)}</td>` +
        `<td>${fmt(v.limit)}</td><td>${fmtP(v.exceedance_probability)}</td>`;
      body.appendChild(tr);
    }
    table.appendChild(body);
    host.appendChild(table);
    const windows = document.createElement('div');
    windows.className = 'windows-line';
    windows.textContent = r.flex_windows
      .map(
        (w) =>
          `${keyOf.get(w.series) ?? w.series} ` +
          `[${w.start_step}..${w.end_step}] ${fmtEnergy(w.energy_kwh)}`,
      )
      .join(' · ');
    host.appendChild(windows);
  }

  function renderPanel(): void {
    renderWhatIfPanel(byId('whatif-panel'), {
      state,
      topo,
      onChange: runWhatIf,
      onReset: () => {
        state.current = state.baseline;
        renderAll();
      },
    });
  }

  function renderAll(): void {
    renderStatus();
    renderGrid();
    renderViolations();
    renderPanel();
    if (state.selectedSeries) void showSeries(state.selectedSeries);
  }

  async function runWhatIf(): Promise<void> {
    if (!state.issueTime) return;
    try {
      state.current = state.hasAdjustments()
        ? await api.domsWhatIf(state.issueTime, state.toPayload())
        : state.baseline;
      renderAll();
    } catch (err) {
      if (err instanceof SupersededError) return;
      reportError(err);
    }
  }

  function selectEntity(entity: string): void {
    state.selectedEntity = entity;
    const rows = catalogue.series.filter((s) => s.entity === entity);
    const host = byId('series-list');
    host.textContent = '';
    for (const row of rows) {
      const btn = document.createElement('button');
      btn.className = 'series-chip';
      btn.textContent = `${row.signal} (${row.unit})`;
      btn.dataset.series = row.id;
      btn.addEventListener('click', () => void showSeries(row.id, row));
      host.appendChild(btn);
    }
    renderGrid();
  }

  async function showSeries(sid: string, row?: SeriesRow): Promise<void> {
    state.selectedSeries = sid;
    const issue = state.issueTime!;
    try {
      const forecast = await api.forecast(sid, issue);
      let previous = null;
      try {
        const earlier = await api.forecast(sid, shiftIssue(issue, -1));
        if (earlier.issue_time !== forecast.issue_time) previous = earlier;
      } catch {
        // no earlier issue; chart the current one alone
      }
      const observed = await api.readings(
        sid,
        shiftIssue(issue, -24),
        shiftIssue(issue, 1),
      );
      renderForecastChart(byId('forecast-chart'), {
        seriesId: sid,
        seriesKey: keyOf.get(sid) ?? row?.id ?? sid,
        observed: observed.points,
        forecast,
        previous,
        run: state.current,
      });
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        byId('forecast-chart').textContent =
          `no forecast stored for ${keyOf.get(sid) ?? sid}`;
        return;
      }
      reportError(err);
    }
  }

  byId('issue-back').addEventListener('click', () => void moveIssue(-1));
  byId('issue-forward').addEventListener('click', () => void moveIssue(1));

  async function moveIssue(hours: number): Promise<void> {
    if (!state.issueTime) return;
    const target = shiftIssue(state.issueTime, hours);
    try {
      state.baseline = await api.domsRun(target);
      state.issueTime = target;
      state.clearAdjustments();
      state.current = state.baseline;
      renderAll();
    } catch (err) {
      reportError(err);
    }
  }

  renderAll();
  const firstSub = topo.nodes.find((n) => n.kind === 'substation');
  if (firstSub) selectEntity(firstSub.name);
}

function reportError(err: unknown): void {
  const host = document.getElementById('warnings');
  const text =
    err instanceof ApiError
      ? `${err.code}: ${err.message}`
      : String(err);
  if (host) host.textContent = text;
  console.error(err);
}

boot().catch(reportError);
