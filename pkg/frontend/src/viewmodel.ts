/**
 * Pure view-model layer: service responses in, display-ready structures
 * out. No requests, no DOM, and no clinical arithmetic beyond formatting
 * and deltas against the previous risks the service echoed back.
 */

import type {
  ExplanationResponse,
  ModelStatus,
  ServiceAlert,
  TierName,
  WhatIfSummary,
} from './types.js';

/**
 * Display colors keyed by the tier string the service sent. Tiers are
 * never recomputed from risk values on the client; a delta-triggered Red
 * at low absolute risk must render red.
 */
export const TIER_COLORS: Record<TierName, string> = {
  Red: '#c62828',
  Yellow: '#f9a825',
  White: '#90a4ae',
};

const TIER_RANK: Record<TierName, number> = { Red: 0, Yellow: 1, White: 2 };

export type FeedbackState =
  | { status: 'none' }
  | { status: 'saving'; verdict: string }
  | { status: 'saved'; verdict: string }
  | { status: 'failed'; message: string };

export const NO_FEEDBACK: FeedbackState = { status: 'none' };

export interface PatientRow {
  patientDay: string;
  patientId: string;
  day: string;
  department: string;
  room: string;
  bed: string;
  service: string;
  risk: number;
  riskPct: string;
  delta1Pct: string;
  delta2Pct: string;
  tier: TierName;
  color: string;
  staleModel: boolean;
  feedback: FeedbackState;
}

export function formatRiskPct(risk: number): string {
  return `${(risk * 100).toFixed(1)}%`;
}

/** Change in percent points vs a service-echoed previous risk. */
export function formatDeltaPct(risk: number, prev: number | null): string {
  if (prev === null) {
    return 'n/a';
  }
  const points = (risk - prev) * 100;
  const sign = points >= 0 ? '+' : '';
  return `${sign}${points.toFixed(1)}`;
}

export function toPatientRow(
  alert: ServiceAlert,
  feedback: FeedbackState = NO_FEEDBACK,
): PatientRow {
  const sep = alert.patient_day.lastIndexOf(':');
  return {
    patientDay: alert.patient_day,
    patientId: alert.patient_day.slice(0, sep),
    day: alert.patient_day.slice(sep + 1),
    department: alert.location.department,
    room: alert.location.room,
    bed: alert.location.bed,
    service: alert.location.service,
    risk: alert.risk,
    riskPct: formatRiskPct(alert.risk),
    delta1Pct: formatDeltaPct(alert.risk, alert.risk_prev1),
    delta2Pct: formatDeltaPct(alert.risk, alert.risk_prev2),
    tier: alert.tier,
    color: TIER_COLORS[alert.tier],
    staleModel: alert.stale_model,
    feedback,
  };
}

/** Red, Yellow, White, then risk descending; patient id settles exact ties. */
export function triageSort(rows: PatientRow[]): PatientRow[] {
  return [...rows].sort((a, b) => {
    const byTier = TIER_RANK[a.tier] - TIER_RANK[b.tier];
    if (byTier !== 0) {
      return byTier;
    }
    if (a.risk !== b.risk) {
      return b.risk - a.risk;
    }
    return a.patientId < b.patientId ? -1 : a.patientId > b.patientId ? 1 : 0;
  });
}

export function buildTriageRows(
  alerts: ServiceAlert[],
  feedback: Record<string, FeedbackState> = {},
): PatientRow[] {
  return triageSort(
    alerts.map((a) => toPatientRow(a, feedback[a.patient_day] ?? NO_FEEDBACK)),
  );
}

export interface DriverBar {
  feature: string;
  phi: number;
  phiText: string;
  valueText: string;
  widthPct: number;
  towardDeterioration: boolean;
}

/**
 * Bars in exactly the order the service sent the drivers; the service
 * already sorts by magnitude. An all-zero explanation yields no bars.
 */
export function driverBars(explanation: ExplanationResponse): DriverBar[] {
  const maxAbs = explanation.drivers.reduce(
    (m, d) => Math.max(m, Math.abs(d.phi)),
    0,
  );
  if (maxAbs === 0) {
    return [];
  }
  return explanation.drivers.map((d) => ({
    feature: d.feature,
    phi: d.phi,
    phiText: d.phi.toFixed(4),
    valueText: formatFeatureValue(d.value),
    widthPct: (Math.abs(d.phi) / maxAbs) * 100,
    towardDeterioration: d.phi >= 0,
  }));
}

export function formatFeatureValue(value: number): string {
  if (Number.isInteger(value)) {
    return String(value);
  }
  return value.toPrecision(4);
}

export interface WhatIfView {
  redCount: number;
  yellowCount: number;
  whiteCount: number;
  nAlerts: number;
  nDays: number;
  dailyVolume: string;
  sensitivity: string;
  specificity: string;
  precision: string;
  nLabeled: number;
}

/** Formatting only; every number comes from one field of the summary. */
export function whatifView(summary: WhatIfSummary): WhatIfView {
  return {
    redCount: summary.tier_counts['Red'] ?? 0,
    yellowCount: summary.tier_counts['Yellow'] ?? 0,
    whiteCount: summary.tier_counts['White'] ?? 0,
    nAlerts: summary.n_alerts,
    nDays: summary.n_days,
    dailyVolume: summary.expected_daily_alert_volume.toFixed(2),
    sensitivity: formatRate(summary.sensitivity),
    specificity: formatRate(summary.specificity),
    precision: formatRate(summary.precision),
    nLabeled: summary.n_labeled,
  };
}

function formatRate(rate: number | null): string {
  return rate === null ? 'n/a' : rate.toFixed(3);
}

export interface StatusBadge {
  label: string;
  stale: boolean;
}

export function statusBadge(status: ModelStatus): StatusBadge {
  const trained = status.trained_on ?? 'unknown date';
  return {
    label: `${status.kind} trained ${trained} (${status.staleness})`,
    stale: status.staleness === 'stale',
  };
}
