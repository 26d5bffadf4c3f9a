import type { FetchLike } from '../src/api.js';
import type { ServiceAlert, TierName } from '../src/types.js';

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'content-type': 'application/json' },
  });
}

export interface RecordedRequest {
  url: string;
  method: string;
  body: unknown;
}

export interface Route {
  method: string;
  path: string | RegExp;
  reply: (req: RecordedRequest) => Response | Promise<Response>;
}

/** Scripted service: first route matching method and URL substring wins. */
export function scriptedFetch(routes: Route[], log: RecordedRequest[] = []): FetchLike {
  return async (url, init) => {
    const method = init?.method ?? 'GET';
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    const req: RecordedRequest = { url, method, body };
    log.push(req);
    for (const route of routes) {
      const matches =
        typeof route.path === 'string' ? url.includes(route.path) : route.path.test(url);
      if (route.method === method && matches) {
        return route.reply(req);
      }
    }
    return jsonResponse({ detail: `no route for ${method} ${url}` }, 404);
  };
}

export function alert(
  patientDay: string,
  tier: TierName,
  risk: number,
  overrides: Partial<ServiceAlert> = {},
): ServiceAlert {
  return {
    patient_day: patientDay,
    risk,
    risk_prev1: null,
    risk_prev2: null,
    tier,
    scored_at: '2024-01-17T08:00',
    location: {
      department: 'Medicine',
      room: '101',
      bed: 'A',
      service: 'General Medicine',
    },
    stale_model: false,
    ...overrides,
  };
}

export const DEFAULT_THRESHOLD_DOC = {
  red_level: 0.12,
  red_delta: 0.06,
  yellow_level: 0.03,
  yellow_delta: 0.015,
};

/** Order of data-patient-day attributes in a rendered table. */
export function rowOrder(html: string): string[] {
  return [...html.matchAll(/data-patient-day="([^"]+)"/g)].map((m) => m[1]!);
}
