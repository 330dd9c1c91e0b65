/**
 * What-if panel: per-series flexibility sliders (controllables only),
 * a margin selector, and apply-suggested / reset actions.
 */

import { fmt } from './format.js';
import type { ViewState } from './state.js';
import type { Topology } from './types.js';

export interface WhatIfOptions {
  state: ViewState;
  topo: Topology;
  onChange: () => void; // fire a what-if with state.toPayload()
  onReset: () => void;
}

const SLIDER_MIN = -30;
const SLIDER_MAX = 30;

/** Load-signal series of feeders first, then of substations; one row each. */
function sliderRows(topo: Topology): { entity: string; series: string }[] {
  const rows: { entity: string; series: string }[] = [];
  const order = ['feeder', 'substation'];
  for (const kind of order) {
    for (const node of topo.nodes) {
      if (node.kind !== kind) continue;
      const sid = node.series['load'];
      if (sid) rows.push({ entity: node.name, series: sid });
    }
  }
  return rows;
}

export function renderWhatIfPanel(
  container: HTMLElement,
  opts: WhatIfOptions,
): void {
  const { state } = opts;
  container.textContent = '';

  const controls = document.createElement('div');
  controls.className = 'whatif-controls';

  const marginLabel = document.createElement('label');
  marginLabel.textContent = 'ask ';
  const margin = document.createElement('select');
  margin.className = 'margin-select';
  for (const m of [1.0, 1.1, 1.25]) {
    const opt = document.createElement('option');
    opt.value = String(m);
    opt.textContent = `${Math.round(m * 100)}% of suggested`;
    if (Math.abs(m - state.margin) < 1e-9) opt.selected = true;
    margin.appendChild(opt);
  }
  margin.addEventListener('change', () => {
    state.margin = Number(margin.value);
  });
  marginLabel.appendChild(margin);
  controls.appendChild(marginLabel);

  const apply = document.createElement('button');
  apply.className = 'apply-suggested';
  apply.textContent = 'Apply suggested';
  apply.disabled = !state.baseline || state.baseline.flex_requests.length === 0;
  apply.addEventListener('click', () => {
    if (!state.baseline) return;
    state.applySuggested(state.baseline);
    opts.onChange();
  });
  controls.appendChild(apply);

  const reset = document.createElement('button');
  reset.className = 'reset-adjustments';
  reset.textContent = 'Reset';
  reset.addEventListener('click', () => {
    state.clearAdjustments();
    opts.onReset();
  });
  controls.appendChild(reset);

  container.appendChild(controls);

  const list = document.createElement('div');
  list.className = 'slider-list';
  for (const row of sliderRows(opts.topo)) {
    const controllable = state.isControllable(row.series);
    const item = document.createElement('div');
    item.className = 'slider-row' + (controllable ? '' : ' locked');

    const name = document.createElement('span');
    name.className = 'slider-name';
    name.textContent = row.entity;
    item.appendChild(name);

    const slider = document.createElement('input');
    slider.type = 'range';
    slider.min = String(SLIDER_MIN);
    slider.max = String(SLIDER_MAX);
    slider.step = '0.5';
    slider.value = String(state.uniformDelta(row.series));
    slider.disabled = !controllable;
    slider.dataset.series = row.series;
    slider.title = controllable
      ? `uniform shift for ${row.entity}`
      : `${row.entity} is not controllable`;

    const value = document.createElement('span');
    value.className = 'slider-value';
    value.textContent = fmt(Number(slider.value), 1);

    slider.addEventListener('change', () => {
      state.setUniform(row.series, Number(slider.value));
      value.textContent = fmt(Number(slider.value), 1);
      opts.onChange();
    });
    item.appendChild(slider);
    item.appendChild(value);
    list.appendChild(item);
  }
  container.appendChild(list);
}
