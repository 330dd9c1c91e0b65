/**
 * Wire types for the decision-support HTTP API.
 *
 * Every field here mirrors a JSON body produced by the service; the console
 * renders these values as-is and never recomputes inference results locally.
 */

export interface InstallationInfo {
  schema: string;
  name: string;
  counts: { signals: number; entities: number; series: number };
  model_configs: number;
  series: Record<string, string>; // "signal@entity" -> series id
  controllables: string[];
  p_threshold: number;
}

export type NodeKind = 'substation' | 'feeder' | 'voltage_point';

export interface TopologyNode {
  name: string;
  kind: NodeKind;
  parent: string | null;
  series: Record<string, string>; // signal name -> series id
}

export interface Topology {
  schema: string;
  nodes: TopologyNode[];
  counts: Record<string, number>;
}

export interface SeriesRow {
  id: string;
  signal: string;
  unit: string;
  entity: string;
  entity_kind: string;
  resolution_s: number;
}

export interface PointRow {
  timestamp: string;
  value: number;
}

export interface ForecastBody {
  schema: string;
  series: string;
  model_version: string;
  issue_time: string;
  points: PointRow[];
}

export interface ReadingsRange {
  schema: string;
  series: string;
  points: PointRow[];
}

export interface Violation {
  series: string;
  step: number;
  timestamp: string;
  bound: 'high' | 'low';
  limit: number;
  predicted_mean: number;
  predicted_sd: number;
  exceedance_probability: number;
}

export interface FlexRequest {
  series: string;
  step: number;
  timestamp: string | null;
  amount: number;
  covering: string[];
}

export interface FlexWindow {
  series: string;
  start_step: number;
  end_step: number;
  start_time: string | null;
  end_time: string | null;
  amounts: number[];
  energy_kwh: number;
  n_steps: number;
}

export interface SeriesTrace {
  mean: number[];
  sd: number[];
}

export interface RunResult {
  schema: string;
  issue_time: string;
  p_threshold: number;
  what_if: boolean;
  adjustments: { series: string; step: number; delta: number }[];
  step_times: string[];
  series: Record<string, SeriesTrace>;
  violations: Violation[];
  flex_requests: FlexRequest[];
  flex_windows: FlexWindow[];
  warnings: string[];
  elapsed_s: number;
}

/** Adjustment payload for the what-if endpoint: series -> [step, delta]. */
export type Adjustments = Record<string, [number, number][]>;

export interface ApiErrorBody {
  error: string;
  message: string;
  [key: string]: unknown;
}
