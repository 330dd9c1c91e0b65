/**
 * View state and the pure derivations the panels render from.
 *
 * Everything here is computed from API responses; nothing re-runs inference.
 */

import { fmt } from './format.js';
import type {
  Adjustments,
  InstallationInfo,
  RunResult,
  Topology,
  TopologyNode,
} from './types.js';

export interface Badge {
  entity: string;
  kind: string;
  worstP: number;
  bound: 'high' | 'low';
  steps: number; // violated step count across the entity's series
  series: string; // series carrying the worst violation
}

/** Maps every series id in the topology to its owning node. */
export function seriesOwners(topo: Topology): Map<string, TopologyNode> {
  const owners = new Map<string, TopologyNode>();
  for (const node of topo.nodes) {
    for (const sid of Object.values(node.series)) owners.set(sid, node);
  }
  return owners;
}

/** One badge per entity that has at least one active violation. */
export function violationBadges(
  result: RunResult,
  topo: Topology,
): Map<string, Badge> {
  const owners = seriesOwners(topo);
  const badges = new Map<string, Badge>();
  for (const v of result.violations) {
    const node = owners.get(v.series);
    if (!node) continue;
    const prev = badges.get(node.name);
    if (!prev) {
      badges.set(node.name, {
        entity: node.name,
        kind: node.kind,
        worstP: v.exceedance_probability,
        bound: v.bound,
        steps: 1,
        series: v.series,
      });
    } else {
      prev.steps += 1;
      if (v.exceedance_probability > prev.worstP) {
        prev.worstP = v.exceedance_probability;
        prev.bound = v.bound;
        prev.series = v.series;
      }
    }
  }
  return badges;
}

/**
 * Fold the run's flexibility requests into a what-if payload.
 *
 * Amounts for the same (series, step) accumulate, then scale by `margin`
 * (1.0 = exactly as suggested). A margin slightly above 1 buys a buffer:
 * on softly-coupled grids the exact amounts settle the violated series a
 * hair short of its limit, so operators typically over-ask.
 */
export function suggestedAdjustments(
  result: RunResult,
  margin = 1.0,
): Adjustments {
  const perSeries = new Map<string, Map<number, number>>();
  for (const q of result.flex_requests) {
    let steps = perSeries.get(q.series);
    if (!steps) {
      steps = new Map();
      perSeries.set(q.series, steps);
    }
    steps.set(q.step, (steps.get(q.step) ?? 0) + q.amount);
  }
  const out: Adjustments = {};
  for (const [series, steps] of perSeries) {
    const pairs: [number, number][] = [];
    for (const [step, amount] of steps) pairs.push([step, amount * margin]);
    pairs.sort((a, b) => a[0] - b[0]);
    if (pairs.length) out[series] = pairs;
  }
  return out;
}

/**
 * Every number the result panels render, as formatted strings in a fixed
 * order. Two results that render identically produce equal arrays; the
 * zero-adjustment identity check compares these.
 */
export function renderedNumbers(result: RunResult): string[] {
  const out: string[] = [];
  for (const sid of Object.keys(result.series).sort()) {
    const trace = result.series[sid];
    for (const m of trace.mean) out.push(fmt(m));
    for (const s of trace.sd) out.push(fmt(s));
  }
  for (const v of result.violations) {
    out.push(fmt(v.predicted_mean), fmt(v.predicted_sd), fmt(v.limit));
  }
  for (const w of result.flex_windows) out.push(fmt(w.energy_kwh, 1));
  return out;
}

type AdjustmentSource =
  | { kind: 'uniform'; delta: number }
  | { kind: 'explicit'; steps: Map<number, number> };

/** Pending operator adjustments plus the latest baseline/what-if results. */
export class ViewState {
  selectedEntity: string | null = null;
  selectedSeries: string | null = null;
  issueTime: string | null = null;
  margin = 1.1;
  baseline: RunResult | null = null;
  current: RunResult | null = null;
  private sources = new Map<string, AdjustmentSource>();

  constructor(readonly info: InstallationInfo) {}

  isControllable(series: string): boolean {
    return this.info.controllables.includes(series);
  }

  /** Uniform delta across the horizon; 0 clears the series' adjustment. */
  setUniform(series: string, delta: number): void {
    if (!this.isControllable(series)) {
      throw new Error(`series ${series} is not controllable`);
    }
    if (delta === 0) this.sources.delete(series);
    else this.sources.set(series, { kind: 'uniform', delta });
  }

  /** Replace pending adjustments with the run's suggested amounts. */
  applySuggested(result: RunResult): void {
    this.sources.clear();
    const payload = suggestedAdjustments(result, this.margin);
    for (const [series, pairs] of Object.entries(payload)) {
      this.sources.set(series, {
        kind: 'explicit',
        steps: new Map(pairs.map(([s, a]) => [s, a])),
      });
    }
  }

  clearAdjustments(): void {
    this.sources.clear();
  }

  hasAdjustments(): boolean {
    return this.sources.size > 0;
  }

  uniformDelta(series: string): number {
    const src = this.sources.get(series);
    return src?.kind === 'uniform' ? src.delta : 0;
  }

  toPayload(nSteps = 96): Adjustments {
    const out: Adjustments = {};
    for (const [series, src] of this.sources) {
      if (src.kind === 'uniform') {
        const pairs: [number, number][] = [];
        for (let s = 0; s < nSteps; s++) pairs.push([s, src.delta]);
        out[series] = pairs;
      } else {
        const pairs: [number, number][] = [...src.steps.entries()]
          .sort((a, b) => a[0] - b[0])
          .map(([s, a]) => [s, a] as [number, number]);
        if (pairs.length) out[series] = pairs;
      }
    }
    return out;
  }
}
