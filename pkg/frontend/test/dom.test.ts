// @vitest-environment jsdom

import { describe, expect, it } from 'vitest';

import { renderForecastChart } from '../src/forecast.js';
import { renderGridView } from '../src/gridview.js';
import { layoutTopology } from '../src/layout.js';
import { ViewState, violationBadges } from '../src/state.js';
import { renderWhatIfPanel } from '../src/whatif.js';
import type {
  ForecastBody,
  InstallationInfo,
  ReadingsRange,
  RunResult,
  Topology,
} from '../src/types.js';
import { fixture } from './fixtures.js';

const info = fixture<InstallationInfo>('installation');
const topo = fixture<Topology>('topology');
const baseline = fixture<RunResult>('run-baseline');
const cleared = fixture<RunResult>('whatif-suggested-110');
const forecast = fixture<ForecastBody>('forecast-sub01');
const previous = fixture<ForecastBody>('forecast-sub01-prev');
const readings = fixture<ReadingsRange>('readings-sub01');

const W = 560;
const H = 460;
const positions = layoutTopology(topo, W, H);

function gridHost(run: RunResult, onSelect = (_: string) => {}): HTMLElement {
  const host = document.createElement('div');
  renderGridView(host, {
    topo,
    positions,
    badges: violationBadges(run, topo),
    selected: 'sub01',
    width: W,
    height: H,
    onSelect,
  });
  return host;
}

describe('grid view', () => {
  it('draws one group per node and marks the selection', () => {
    const host = gridHost(baseline);
    const nodes = host.querySelectorAll('g.grid-node');
    expect(nodes).toHaveLength(topo.nodes.length);
    const selected = host.querySelectorAll('g.grid-node.selected');
    expect(selected).toHaveLength(1);
    expect(selected[0].getAttribute('data-entity')).toBe('sub01');
  });

  it('shows violation badges on the stressed substations', () => {
    const host = gridHost(baseline);
    const badges = host.querySelectorAll('circle.violation-badge.bound-high');
    expect(badges).toHaveLength(2);
    const text = host.querySelector('text[data-badge-for="sub01"]');
    expect(text?.textContent).toBe('p >0.999');
  });

  it('clears the badges on the margin what-if result', () => {
    const host = gridHost(cleared);
    expect(host.querySelectorAll('circle.violation-badge')).toHaveLength(0);
    expect(host.querySelectorAll('g.grid-node')).toHaveLength(
      topo.nodes.length,
    );
  });

  it('reports clicks by entity name', () => {
    const picked: string[] = [];
    const host = gridHost(baseline, (name) => picked.push(name));
    const f01 = host.querySelector('g.grid-node[data-entity="f01"]');
    f01?.dispatchEvent(new MouseEvent('click'));
    expect(picked).toEqual(['f01']);
  });
});

describe('what-if panel', () => {
  function panel(state: ViewState, onChange = () => {}): HTMLElement {
    const host = document.createElement('div');
    renderWhatIfPanel(host, {
      state,
      topo,
      onChange,
      onReset: () => {},
    });
    return host;
  }

  it('renders sliders for load series, locking non-controllables', () => {
    const state = new ViewState(info);
    state.baseline = baseline;
    const host = panel(state);
    const sliders = host.querySelectorAll<HTMLInputElement>(
      'input[type="range"]',
    );
    expect(sliders).toHaveLength(6); // four feeders + two substations
    const enabled = [...sliders].filter((s) => !s.disabled);
    expect(enabled.map((s) => s.dataset.series).sort()).toEqual(
      [...info.controllables].sort(),
    );
    expect(host.querySelectorAll('.slider-row.locked')).toHaveLength(2);
  });

  it('defaults the ask margin to 110%', () => {
    const state = new ViewState(info);
    state.baseline = baseline;
    const host = panel(state);
    const select = host.querySelector<HTMLSelectElement>('.margin-select');
    expect(select?.value).toBe('1.1');
    expect(select?.selectedOptions[0]?.textContent).toBe('110% of suggested');
  });

  it('applies suggested amounts and fires a re-run', () => {
    const state = new ViewState(info);
    state.baseline = baseline;
    let changes = 0;
    const host = panel(state, () => {
      changes += 1;
    });
    const apply = host.querySelector<HTMLButtonElement>('.apply-suggested');
    expect(apply?.disabled).toBe(false);
    apply?.dispatchEvent(new MouseEvent('click'));
    expect(changes).toBe(1);
    expect(state.hasAdjustments()).toBe(true);
    expect(Object.keys(state.toPayload()).sort()).toEqual(
      [...info.controllables].sort(),
    );
  });

  it('propagates slider moves as uniform adjustments', () => {
    const state = new ViewState(info);
    state.baseline = baseline;
    let changes = 0;
    const host = panel(state, () => {
      changes += 1;
    });
    const slider = host.querySelector<HTMLInputElement>(
      'input[data-series="ts-0003"]',
    );
    slider!.value = '-4.5';
    slider!.dispatchEvent(new Event('change'));
    expect(changes).toBe(1);
    expect(state.toPayload(2)).toEqual({
      'ts-0003': [
        [0, -4.5],
        [1, -4.5],
      ],
    });
  });
});

describe('forecast chart', () => {
  it('draws observed, forecast, previous-issue traces and the band', () => {
    const host = document.createElement('div');
    renderForecastChart(host, {
      seriesId: 'ts-0001',
      seriesKey: 'load@sub01',
      observed: readings.points,
      forecast,
      previous,
      run: baseline,
    });
    expect(host.querySelector('.chart-head')?.textContent).toContain(
      forecast.model_version,
    );
    expect(host.querySelectorAll('polyline.trace.observed')).toHaveLength(1);
    expect(host.querySelectorAll('polyline.trace.forecast')).toHaveLength(1);
    expect(host.querySelectorAll('polyline.trace.previous')).toHaveLength(1);
    expect(host.querySelectorAll('polygon.posterior-band')).toHaveLength(1);
  });

  it('omits the previous trace when only one issue exists', () => {
    const host = document.createElement('div');
    renderForecastChart(host, {
      seriesId: 'ts-0001',
      seriesKey: 'load@sub01',
      observed: readings.points,
      forecast,
      previous: null,
      run: null,
    });
    expect(host.querySelectorAll('polyline.trace.previous')).toHaveLength(0);
    expect(host.querySelectorAll('polygon.posterior-band')).toHaveLength(0);
    expect(host.querySelectorAll('polyline.trace.forecast')).toHaveLength(1);
  });
});
