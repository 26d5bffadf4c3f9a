/**
 * Response and request shapes of the alert service, mirrored field for
 * field. The dashboard is a view over these; it never derives tiers,
 * contributions, or what-if metrics on its own.
 */

export type TierName = 'Red' | 'Yellow' | 'White';

export interface StayLocation {
  department: string;
  room: string;
  bed: string;
  service: string;
}

export interface ServiceAlert {
  patient_day: string;
  risk: number;
  risk_prev1: number | null;
  risk_prev2: number | null;
  tier: TierName;
  scored_at: string;
  location: StayLocation;
  stale_model: boolean;
}

export interface ThresholdSet {
  red_level: number;
  red_delta: number;
  yellow_level: number;
  yellow_delta: number;
}

export interface AlertsResponse {
  run_date: string;
  thresholds: ThresholdSet;
  alerts: ServiceAlert[];
}

export interface RiskHistoryResponse {
  patient_id: string;
  history: ServiceAlert[];
}

export interface Driver {
  feature: string;
  phi: number;
  value: number;
}

export interface ExplanationResponse {
  patient_day: string;
  base_value: number;
  prediction_margin: number;
  drivers: Driver[];
}

export type FeedbackVerdict =
  | 'TruePositive'
  | 'FalsePositive'
  | 'FalseNegative'
  | 'CornerCase';

export interface FeedbackRequest {
  patient_day: string;
  verdict: FeedbackVerdict;
  note: string;
  author: string;
  ts?: string;
}

export interface FeedbackReceipt {
  stored: boolean;
  patient_day: string;
}

export interface WhatIfRequest extends ThresholdSet {
  start?: string;
  end?: string;
}

export interface WhatIfSummary {
  thresholds: ThresholdSet;
  tier_counts: Record<string, number>;
  n_alerts: number;
  n_days: number;
  expected_daily_alert_volume: number;
  sensitivity: number | null;
  specificity: number | null;
  precision: number | null;
  n_labeled: number;
}

export interface ModelStatus {
  kind: string;
  trained_on: string | null;
  staleness: 'fresh' | 'stale';
  manifest_hash: string;
  n_features: number;
  hyperparams: Record<string, unknown>;
  thresholds: ThresholdSet;
}
