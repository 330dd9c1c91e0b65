import { describe, expect, it } from 'vitest';

import {
  ViewState,
  renderedNumbers,
  suggestedAdjustments,
  violationBadges,
} from '../src/state.js';
import type {
  Adjustments,
  InstallationInfo,
  RunResult,
  Topology,
} from '../src/types.js';
import { fixture } from './fixtures.js';

const info = fixture<InstallationInfo>('installation');
const topo = fixture<Topology>('topology');
const baseline = fixture<RunResult>('run-baseline');
const zeroView = fixture<RunResult>('whatif-zero');
const atSuggested = fixture<RunResult>('whatif-suggested-100');
const withMargin = fixture<RunResult>('whatif-suggested-110');
const payload100 = fixture<Adjustments>('payload-suggested-100');
const payload110 = fixture<Adjustments>('payload-suggested-110');

function expectPayloadClose(
  got: Adjustments,
  want: Adjustments,
  tol = 1e-12,
): void {
  expect(Object.keys(got).sort()).toEqual(Object.keys(want).sort());
  for (const series of Object.keys(want)) {
    const g = got[series];
    const w = want[series];
    expect(g.map((p) => p[0])).toEqual(w.map((p) => p[0]));
    for (let i = 0; i < w.length; i++) {
      expect(Math.abs(g[i][1] - w[i][1])).toBeLessThanOrEqual(tol);
    }
  }
}

describe('violation badges', () => {
  it('marks exactly the stressed substations on the baseline run', () => {
    const badges = violationBadges(baseline, topo);
    expect([...badges.keys()].sort()).toEqual(['sub01', 'sub02']);
    for (const badge of badges.values()) {
      expect(badge.kind).toBe('substation');
      expect(badge.bound).toBe('high');
      expect(badge.steps).toBe(12);
      expect(badge.worstP).toBeGreaterThan(0.999);
    }
  });

  it('clears every badge when suggested amounts are applied with margin', () => {
    // the what-if recorded with the default 110% ask
    expect(withMargin.what_if).toBe(true);
    expect(withMargin.violations).toHaveLength(0);
    expect(violationBadges(withMargin, topo).size).toBe(0);
  });

  it('keeps reduced badges at exactly 100% of suggested', () => {
    // joint conditioning targets the limit itself; on softly coupled series
    // the exact ask settles a hair short, so some badges survive at lower p
    const badges = violationBadges(atSuggested, topo);
    expect(badges.size).toBeGreaterThan(0);
    expect(atSuggested.violations.length).toBeLessThan(
      baseline.violations.length,
    );
    const worstBefore = Math.max(
      ...baseline.violations.map((v) => v.exceedance_probability),
    );
    for (const badge of badges.values()) {
      expect(badge.worstP).toBeLessThan(worstBefore);
    }
  });
});

describe('zero-adjustment identity', () => {
  it('renders the zero-adjustment view pixel-identical to baseline', () => {
    const a = renderedNumbers(baseline);
    const b = renderedNumbers(zeroView);
    expect(b).toEqual(a);
    // the comparison covers every number the panels draw
    const nSeries = Object.keys(baseline.series).length;
    const nSteps = baseline.step_times.length;
    expect(a.length).toBe(
      nSeries * nSteps * 2 +
        baseline.violations.length * 3 +
        baseline.flex_windows.length,
    );
  });
});

describe('suggested adjustments', () => {
  it('folds flexibility requests into the recorded 100% payload', () => {
    expectPayloadClose(suggestedAdjustments(baseline, 1.0), payload100);
  });

  it('scales to the recorded 110% payload through ViewState', () => {
    const state = new ViewState(info);
    expect(state.margin).toBe(1.1);
    state.baseline = baseline;
    state.applySuggested(baseline);
    expect(state.hasAdjustments()).toBe(true);
    expectPayloadClose(state.toPayload(), payload110);
  });

  it('covers only controllable series', () => {
    for (const series of Object.keys(payload110)) {
      expect(info.controllables).toContain(series);
    }
  });
});

describe('ViewState adjustments', () => {
  it('expands a uniform delta across the horizon', () => {
    const state = new ViewState(info);
    state.setUniform('ts-0003', -5);
    const payload = state.toPayload(96);
    expect(Object.keys(payload)).toEqual(['ts-0003']);
    expect(payload['ts-0003']).toHaveLength(96);
    expect(payload['ts-0003'][0]).toEqual([0, -5]);
    expect(payload['ts-0003'][95]).toEqual([95, -5]);
  });

  it('drops a slider returned to zero', () => {
    const state = new ViewState(info);
    state.setUniform('ts-0003', -5);
    state.setUniform('ts-0003', 0);
    expect(state.hasAdjustments()).toBe(false);
    expect(state.toPayload()).toEqual({});
  });

  it('rejects adjustments on non-controllable series', () => {
    const state = new ViewState(info);
    expect(() => state.setUniform('ts-0001', -5)).toThrow(/not controllable/);
  });
});
