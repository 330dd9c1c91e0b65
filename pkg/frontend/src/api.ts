/**
 * Typed client for the decision-support HTTP API.
 *
 * One instance per page. What-if calls cancel any in-flight what-if so a
 * slider flurry settles on the latest request only.
 */

import type {
  Adjustments,
  ForecastBody,
  InstallationInfo,
  ReadingsRange,
  RunResult,
  SeriesRow,
  Topology,
} from './types.js';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

/** Thrown when a newer what-if superseded this one; callers drop it. */
export class SupersededError extends Error {
  constructor() {
    super('request superseded by a newer one');
    this.name = 'SupersededError';
  }
}

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiClient {
  private whatIfInFlight: AbortController | null = null;

  constructor(
    private readonly base = '',
    private readonly fetchFn: FetchLike = (u, i) => fetch(u, i),
  ) {}

  private async get<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(this.base + path);
    return this.decode<T>(resp);
  }

  private async post<T>(
    path: string,
    body: unknown,
    signal?: AbortSignal,
  ): Promise<T> {
    const resp = await this.fetchFn(this.base + path, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
      signal,
    });
    return this.decode<T>(resp);
  }

  private async decode<T>(resp: Response): Promise<T> {
    const body = await resp.json();
    if (!resp.ok) {
      throw new ApiError(
        resp.status,
        String(body?.error ?? 'unknown'),
        String(body?.message ?? `HTTP ${resp.status}`),
      );
    }
    return body as T;
  }

  installation(): Promise<InstallationInfo> {
    return this.get('/api/installation');
  }

  topology(): Promise<Topology> {
    return this.get('/api/grid/topology');
  }

  seriesCatalogue(): Promise<{ series: SeriesRow[] }> {
    return this.get('/api/registry/series');
  }

  forecast(series: string, asOf?: string): Promise<ForecastBody> {
    const q = asOf ? `?as_of=${encodeURIComponent(asOf)}` : '';
    return this.get(`/api/forecasts/${encodeURIComponent(series)}${q}`);
  }

  readings(series: string, start: string, end: string): Promise<ReadingsRange> {
    const q = `?start=${encodeURIComponent(start)}&end=${encodeURIComponent(end)}`;
    return this.get(`/api/readings/${encodeURIComponent(series)}${q}`);
  }

  domsRun(issueTime: string): Promise<RunResult> {
    return this.post('/api/doms/run', { issue_time: issueTime });
  }

  /** Re-evaluate with adjustments; aborts any earlier unfinished what-if. */
  async domsWhatIf(
    issueTime: string,
    adjustments: Adjustments,
  ): Promise<RunResult> {
    this.whatIfInFlight?.abort();
    const controller = new AbortController();
    this.whatIfInFlight = controller;
    try {
      return await this.post<RunResult>(
        '/api/doms/whatif',
        { issue_time: issueTime, adjustments },
        controller.signal,
      );
    } catch (err) {
      if (err instanceof DOMException && err.name === 'AbortError') {
        throw new SupersededError();
      }
      throw err;
    } finally {
      if (this.whatIfInFlight === controller) this.whatIfInFlight = null;
    }
  }
}
