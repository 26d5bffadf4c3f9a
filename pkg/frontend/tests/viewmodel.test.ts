import { describe, expect, it } from 'vitest';

import {
  buildTriageRows,
  driverBars,
  formatDeltaPct,
  formatFeatureValue,
  formatRiskPct,
  statusBadge,
  TIER_COLORS,
  toPatientRow,
  triageSort,
  whatifView,
} from '../src/viewmodel.js';
import { escapeHtml, renderDriverPanel, renderTriageTable } from '../src/dom.js';
import type { ExplanationResponse, ModelStatus, WhatIfSummary } from '../src/types.js';
import { alert, rowOrder } from './mock.js';

describe('formatting', () => {
  it('renders risk as a one-decimal percentage', () => {
    expect(formatRiskPct(0.0482)).toBe('4.8%');
    expect(formatRiskPct(0)).toBe('0.0%');
    expect(formatRiskPct(0.1)).toBe('10.0%');
    expect(formatRiskPct(1)).toBe('100.0%');
  });

  it('renders deltas in signed percent points from echoed previous risks', () => {
    expect(formatDeltaPct(0.05, 0.03)).toBe('+2.0');
    expect(formatDeltaPct(0.03, 0.05)).toBe('-2.0');
    expect(formatDeltaPct(0.05, 0.05)).toBe('+0.0');
    expect(formatDeltaPct(0.05, null)).toBe('n/a');
  });

  it('formats feature values without losing integers', () => {
    expect(formatFeatureValue(34)).toBe('34');
    expect(formatFeatureValue(88.5)).toBe('88.50');
    expect(formatFeatureValue(0.1234567)).toBe('0.1235');
  });
});

describe('patient rows', () => {
  it('splits the patient-day key at the last colon', () => {
    const row = toPatientRow(alert('p00007:2024-01-16', 'Yellow', 0.05));
    expect(row.patientId).toBe('p00007');
    expect(row.day).toBe('2024-01-16');
  });

  it('carries the location fields and stale flag through', () => {
    const row = toPatientRow(
      alert('a:2024-01-16', 'White', 0.01, {
        stale_model: true,
        location: { department: 'Surgery', room: '9', bed: 'B', service: 'Ortho' },
      }),
    );
    expect(row.department).toBe('Surgery');
    expect(row.room).toBe('9');
    expect(row.bed).toBe('B');
    expect(row.service).toBe('Ortho');
    expect(row.staleModel).toBe(true);
  });

  it('takes the display color from the tier name alone', () => {
    const deltaTriggered = toPatientRow(alert('a:2024-01-16', 'Red', 0.05));
    expect(deltaTriggered.color).toBe(TIER_COLORS.Red);
    const lowTierHighRisk = toPatientRow(alert('b:2024-01-16', 'Yellow', 0.99));
    expect(lowTierHighRisk.color).toBe(TIER_COLORS.Yellow);
  });

  it('sorts Red, Yellow, White, then risk descending, then patient id', () => {
    const rows = buildTriageRows([
      alert('w1:2024-01-16', 'White', 0.02),
      alert('y1:2024-01-16', 'Yellow', 0.05),
      alert('r1:2024-01-16', 'Red', 0.05),
      alert('y2:2024-01-16', 'Yellow', 0.1),
      alert('r2:2024-01-16', 'Red', 0.2),
      alert('tie_b:2024-01-16', 'White', 0.02),
    ]);
    expect(rows.map((r) => r.patientId)).toEqual([
      'r2',
      'r1',
      'y2',
      'y1',
      'tie_b',
      'w1',
    ]);
  });

  it('sort does not mutate its input', () => {
    const rows = [
      toPatientRow(alert('a:2024-01-16', 'White', 0.01)),
      toPatientRow(alert('b:2024-01-16', 'Red', 0.2)),
    ];
    const sorted = triageSort(rows);
    expect(rows[0]!.patientId).toBe('a');
    expect(sorted[0]!.patientId).toBe('b');
  });

  it('attaches feedback state by patient-day key', () => {
    const rows = buildTriageRows(
      [alert('a:2024-01-16', 'Red', 0.2), alert('b:2024-01-16', 'Red', 0.1)],
      { 'a:2024-01-16': { status: 'saved', verdict: 'FalsePositive' } },
    );
    expect(rows[0]!.feedback).toEqual({ status: 'saved', verdict: 'FalsePositive' });
    expect(rows[1]!.feedback).toEqual({ status: 'none' });
  });
});

describe('driver bars', () => {
  const explanation = (phis: number[]): ExplanationResponse => ({
    patient_day: 'a:2024-01-16',
    base_value: -3.0,
    prediction_margin: -2.5,
    drivers: phis.map((phi, i) => ({ feature: `f${i}`, phi, value: i })),
  });

  it('preserves the order the service sent', () => {
    const bars = driverBars(explanation([0.5, -1.0, 0.25]));
    expect(bars.map((b) => b.feature)).toEqual(['f0', 'f1', 'f2']);
    expect(bars.map((b) => b.widthPct)).toEqual([50, 100, 25]);
  });

  it('marks positive contributions as toward deterioration', () => {
    const bars = driverBars(explanation([0.5, -1.0]));
    expect(bars[0]!.towardDeterioration).toBe(true);
    expect(bars[1]!.towardDeterioration).toBe(false);
  });

  it('yields no bars for an all-zero explanation', () => {
    expect(driverBars(explanation([0, 0, 0]))).toEqual([]);
  });
});

describe('what-if view', () => {
  it('is a formatting-only projection of the summary', () => {
    const summary: WhatIfSummary = {
      thresholds: { red_level: 0.12, red_delta: 0.06, yellow_level: 0.03, yellow_delta: 0.015 },
      tier_counts: { Red: 2, Yellow: 5, White: 13 },
      n_alerts: 20,
      n_days: 4,
      expected_daily_alert_volume: 1.75,
      sensitivity: 0.5,
      specificity: 0.875,
      precision: 0.25,
      n_labeled: 10,
    };
    expect(whatifView(summary)).toEqual({
      redCount: 2,
      yellowCount: 5,
      whiteCount: 13,
      nAlerts: 20,
      nDays: 4,
      dailyVolume: '1.75',
      sensitivity: '0.500',
      specificity: '0.875',
      precision: '0.250',
      nLabeled: 10,
    });
  });

  it('shows n/a for undefined rates', () => {
    const summary: WhatIfSummary = {
      thresholds: { red_level: 0.12, red_delta: 0.06, yellow_level: 0.03, yellow_delta: 0.015 },
      tier_counts: { Red: 0, Yellow: 0, White: 1 },
      n_alerts: 1,
      n_days: 1,
      expected_daily_alert_volume: 0,
      sensitivity: null,
      specificity: null,
      precision: null,
      n_labeled: 0,
    };
    const view = whatifView(summary);
    expect(view.sensitivity).toBe('n/a');
    expect(view.specificity).toBe('n/a');
    expect(view.precision).toBe('n/a');
  });
});

describe('status badge', () => {
  const status = (staleness: 'fresh' | 'stale'): ModelStatus => ({
    kind: 'gradient_boosted',
    trained_on: '2024-02-10',
    staleness,
    manifest_hash: 'f'.repeat(64),
    n_features: 368,
    hyperparams: {},
    thresholds: { red_level: 0.12, red_delta: 0.06, yellow_level: 0.03, yellow_delta: 0.015 },
  });

  it('labels the model and flags staleness', () => {
    expect(statusBadge(status('fresh'))).toEqual({
      label: 'gradient_boosted trained 2024-02-10 (fresh)',
      stale: false,
    });
    expect(statusBadge(status('stale')).stale).toBe(true);
  });
});

describe('dom builders', () => {
  it('escapes html in untrusted fields', () => {
    expect(escapeHtml('<b>&"\'')).toBe('&lt;b&gt;&amp;&quot;&#39;');
    const rows = buildTriageRows([
      alert('a:2024-01-16', 'Red', 0.2, {
        location: { department: '<script>', room: '1', bed: 'A', service: 's' },
      }),
    ]);
    const html = renderTriageTable(rows, null);
    expect(html).not.toContain('<script>');
    expect(html).toContain('&lt;script&gt;');
  });

  it('renders an empty-state message instead of an empty table', () => {
    expect(renderTriageTable([], null)).toContain('No alerts');
  });

  it('renders the three driver panel states', () => {
    expect(renderDriverPanel(null, null)).toContain('Select a row');
    expect(renderDriverPanel('a:2024-01-16', 'missing')).toContain('not computed');
    expect(renderDriverPanel('a:2024-01-16', [])).toContain('zero');
  });

  it('orders rendered rows the way the view model sorted them', () => {
    const rows = buildTriageRows([
      alert('w:2024-01-16', 'White', 0.9),
      alert('r:2024-01-16', 'Red', 0.05),
    ]);
    const html = renderTriageTable(rows, null);
    expect(rowOrder(html)).toEqual(['r:2024-01-16', 'w:2024-01-16']);
  });
});
