import type {
  AlertsResponse,
  ExplanationResponse,
  FeedbackReceipt,
  FeedbackRequest,
  ModelStatus,
  RiskHistoryResponse,
  TierName,
  WhatIfRequest,
  WhatIfSummary,
} from './types.js';

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Non-2xx response, carrying the service's detail message. */
export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, detail: string) {
    super(detail);
    this.name = 'ApiError';
    this.status = status;
  }
}

export interface AlertFilters {
  tier?: TierName;
  department?: string;
}

/**
 * Typed client for the alert service. The fetch implementation is
 * injectable so tests can run against a scripted service. Concurrent GETs
 * of the same URL share one in-flight request.
 */
export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchFn: FetchLike;
  private readonly inflight = new Map<string, Promise<unknown>>();

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, '');
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  getAlerts(runDate: string, filters: AlertFilters = {}): Promise<AlertsResponse> {
    const params = new URLSearchParams();
    if (filters.tier) params.set('tier', filters.tier);
    if (filters.department) params.set('department', filters.department);
    const query = params.toString();
    const path = `/runs/${encodeURIComponent(runDate)}/alerts${query ? `?${query}` : ''}`;
    return this.get(path);
  }

  getRiskHistory(patientId: string): Promise<RiskHistoryResponse> {
    return this.get(`/patients/${encodeURIComponent(patientId)}/risk-history`);
  }

  getExplanation(patientDay: string, k = 10): Promise<ExplanationResponse> {
    return this.get(`/alerts/${encodeURIComponent(patientDay)}/explanation?k=${k}`);
  }

  getModelStatus(): Promise<ModelStatus> {
    return this.get('/model/status');
  }

  postFeedback(body: FeedbackRequest): Promise<FeedbackReceipt> {
    return this.post('/feedback', body);
  }

  postWhatIf(body: WhatIfRequest): Promise<WhatIfSummary> {
    return this.post('/thresholds/whatif', body);
  }

  private get<T>(path: string): Promise<T> {
    const url = this.baseUrl + path;
    const pending = this.inflight.get(url);
    if (pending) {
      return pending as Promise<T>;
    }
    const request = this.send<T>(url, { method: 'GET' }).finally(() => {
      this.inflight.delete(url);
    });
    this.inflight.set(url, request);
    return request;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.send<T>(this.baseUrl + path, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
    });
  }

  private async send<T>(url: string, init: RequestInit): Promise<T> {
    const response = await this.fetchFn(url, init);
    if (!response.ok) {
      throw new ApiError(response.status, await readDetail(response));
    }
    return (await response.json()) as T;
  }
}

async function readDetail(response: Response): Promise<string> {
  try {
    const doc: unknown = await response.json();
    if (doc && typeof doc === 'object' && 'detail' in doc) {
      const detail = (doc as { detail: unknown }).detail;
      return typeof detail === 'string' ? detail : JSON.stringify(detail);
    }
  } catch {
    // non-JSON error body; fall through to the status line
  }
  return `request failed with status ${response.status}`;
}
