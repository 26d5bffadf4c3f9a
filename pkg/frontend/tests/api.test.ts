import { describe, expect, it } from 'vitest';

import { ApiClient, ApiError } from '../src/api.js';
import { jsonResponse, scriptedFetch, type RecordedRequest } from './mock.js';

const BASE = 'http://svc';

describe('request construction', () => {
  it('builds the alerts url with optional filters', async () => {
    const log: RecordedRequest[] = [];
    const client = new ApiClient(BASE, scriptedFetch(
      [{ method: 'GET', path: '/runs/', reply: () => jsonResponse({ run_date: 'x', thresholds: {}, alerts: [] }) }],
      log,
    ));
    await client.getAlerts('2024-01-16');
    await client.getAlerts('2024-01-16', { tier: 'Red', department: 'Medicine' });
    expect(log[0]!.url).toBe(`${BASE}/runs/2024-01-16/alerts`);
    expect(log[1]!.url).toBe(`${BASE}/runs/2024-01-16/alerts?tier=Red&department=Medicine`);
  });

  it('encodes the patient-day key and passes k', async () => {
    const log: RecordedRequest[] = [];
    const client = new ApiClient(BASE, scriptedFetch(
      [{ method: 'GET', path: '/alerts/', reply: () => jsonResponse({ patient_day: 'p:d', base_value: 0, prediction_margin: 0, drivers: [] }) }],
      log,
    ));
    await client.getExplanation('p00007:2024-01-16', 5);
    expect(log[0]!.url).toBe(`${BASE}/alerts/p00007%3A2024-01-16/explanation?k=5`);
  });

  it('strips trailing slashes off the base url', async () => {
    const log: RecordedRequest[] = [];
    const client = new ApiClient(`${BASE}/`, scriptedFetch(
      [{ method: 'GET', path: '/model/status', reply: () => jsonResponse({}) }],
      log,
    ));
    await client.getModelStatus();
    expect(log[0]!.url).toBe(`${BASE}/model/status`);
  });

  it('posts feedback as json', async () => {
    const log: RecordedRequest[] = [];
    const client = new ApiClient(BASE, scriptedFetch(
      [{ method: 'POST', path: '/feedback', reply: () => jsonResponse({ stored: true, patient_day: 'p:d' }) }],
      log,
    ));
    const receipt = await client.postFeedback({
      patient_day: 'p00007:2024-01-16',
      verdict: 'FalsePositive',
      note: 'known chronic pattern',
      author: 'rn_chen',
    });
    expect(receipt.stored).toBe(true);
    expect(log[0]!.body).toEqual({
      patient_day: 'p00007:2024-01-16',
      verdict: 'FalsePositive',
      note: 'known chronic pattern',
      author: 'rn_chen',
    });
  });
});

describe('error mapping', () => {
  it('raises ApiError with the service detail and status', async () => {
    const client = new ApiClient(BASE, scriptedFetch([
      { method: 'GET', path: '/runs/', reply: () => jsonResponse({ detail: 'no run for 2024-01-01' }, 404) },
    ]));
    const err = await client.getAlerts('2024-01-01').catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(404);
    expect((err as ApiError).message).toBe('no run for 2024-01-01');
  });

  it('falls back to the status code when the body is not json', async () => {
    const client = new ApiClient(BASE, async () => new Response('boom', { status: 500 }));
    const err = await client.getModelStatus().catch((e: unknown) => e);
    expect((err as ApiError).message).toBe('request failed with status 500');
  });

  it('stringifies structured validation details', async () => {
    const client = new ApiClient(BASE, scriptedFetch([
      { method: 'POST', path: '/feedback', reply: () => jsonResponse({ detail: [{ loc: ['body', 'author'] }] }, 422) },
    ]));
    const err = await client
      .postFeedback({ patient_day: 'p:d', verdict: 'CornerCase', note: '', author: '' })
      .catch((e: unknown) => e);
    expect((err as ApiError).message).toContain('author');
  });

  it('propagates network failures to the caller', async () => {
    const client = new ApiClient(BASE, async () => {
      throw new TypeError('fetch failed');
    });
    await expect(client.getModelStatus()).rejects.toThrow('fetch failed');
  });
});

describe('in-flight de-duplication', () => {
  it('shares one request among concurrent equal GETs', async () => {
    let calls = 0;
    const client = new ApiClient(BASE, async () => {
      calls += 1;
      await new Promise((resolve) => setTimeout(resolve, 5));
      return jsonResponse({ kind: 'gradient_boosted' });
    });
    const [a, b] = await Promise.all([client.getModelStatus(), client.getModelStatus()]);
    expect(calls).toBe(1);
    expect(a).toEqual(b);
    await client.getModelStatus();
    expect(calls).toBe(2);
  });

  it('does not share requests across different urls', async () => {
    let calls = 0;
    const client = new ApiClient(BASE, async () => {
      calls += 1;
      return jsonResponse({ run_date: 'x', thresholds: {}, alerts: [] });
    });
    await Promise.all([client.getAlerts('2024-01-16'), client.getAlerts('2024-01-17')]);
    expect(calls).toBe(2);
  });

  it('retries after a failed GET instead of caching the rejection', async () => {
    let calls = 0;
    const client = new ApiClient(BASE, async () => {
      calls += 1;
      if (calls === 1) {
        return jsonResponse({ detail: 'transient' }, 503);
      }
      return jsonResponse({ kind: 'gradient_boosted' });
    });
    await expect(client.getModelStatus()).rejects.toThrow('transient');
    const status = await client.getModelStatus();
    expect(status.kind).toBe('gradient_boosted');
    expect(calls).toBe(2);
  });
});
