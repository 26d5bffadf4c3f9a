/**
 * HTML string builders over the view models. No state and no requests;
 * everything here is a straight projection of precomputed fields.
 */

import type { DriverBar, PatientRow, StatusBadge, WhatIfView } from './viewmodel.js';
import type { ThresholdSet } from './types.js';

export function escapeHtml(text: string): string {
  return text
    .replaceAll('&', '&amp;')
    .replaceAll('<', '&lt;')
    .replaceAll('>', '&gt;')
    .replaceAll('"', '&quot;')
    .replaceAll("'", '&#39;');
}

export function renderFeedbackBadge(row: PatientRow): string {
  switch (row.feedback.status) {
    case 'none':
      return '';
    case 'saving':
      return `<span class="badge badge-saving">${escapeHtml(row.feedback.verdict)} (saving)</span>`;
    case 'saved':
      return `<span class="badge badge-saved">${escapeHtml(row.feedback.verdict)}</span>`;
    case 'failed':
      return `<span class="badge badge-failed">not saved: ${escapeHtml(row.feedback.message)}</span>`;
  }
}

export function renderPatientRow(row: PatientRow, selected: boolean): string {
  const stale = row.staleModel
    ? ' <span class="badge badge-stale">stale model</span>'
    : '';
  const classes = `row-${row.tier.toLowerCase()}${selected ? ' selected' : ''}`;
  return `<tr class="${classes}" data-patient-day="${escapeHtml(row.patientDay)}">
  <td><span class="tier-dot" style="background:${row.color}"></span>${row.tier}</td>
  <td>${escapeHtml(row.patientId)}${stale}</td>
  <td>${escapeHtml(row.department)}</td>
  <td>${escapeHtml(row.room)}</td>
  <td>${escapeHtml(row.bed)}</td>
  <td>${escapeHtml(row.service)}</td>
  <td class="num">${row.riskPct}</td>
  <td class="num">${row.delta1Pct}</td>
  <td class="num">${row.delta2Pct}</td>
  <td>${renderFeedbackBadge(row)}</td>
</tr>`;
}

export function renderTriageTable(rows: PatientRow[], selected: string | null): string {
  if (rows.length === 0) {
    return '<p class="empty">No alerts for this run and filter.</p>';
  }
  const body = rows
    .map((row) => renderPatientRow(row, row.patientDay === selected))
    .join('\n');
  return `<table class="triage">
<thead><tr>
  <th>Tier</th><th>Patient</th><th>Department</th><th>Room</th><th>Bed</th>
  <th>Service</th><th>Risk</th><th>vs prev</th><th>vs prev2</th><th>Feedback</th>
</tr></thead>
<tbody>
${body}
</tbody>
</table>`;
}

export function renderRetryState(message: string): string {
  return `<div class="load-error">
  <p>Could not load alerts: ${escapeHtml(message)}</p>
  <button data-action="retry">Retry</button>
</div>`;
}

export function renderDriverPanel(
  patientDay: string | null,
  bars: DriverBar[] | 'missing' | null,
): string {
  if (patientDay === null || bars === null) {
    return '<div class="drivers"><p class="hint">Select a row to see its risk drivers.</p></div>';
  }
  const title = `<h2>Drivers for ${escapeHtml(patientDay)}</h2>`;
  if (bars === 'missing') {
    return `<div class="drivers">${title}<p class="hint">Explanation not computed for this day.</p></div>`;
  }
  if (bars.length === 0) {
    return `<div class="drivers">${title}<p class="hint">All feature contributions are zero for this day.</p></div>`;
  }
  const rows = bars
    .map(
      (bar) => `<div class="driver ${bar.towardDeterioration ? 'driver-up' : 'driver-down'}">
  <span class="driver-name">${escapeHtml(bar.feature)} = ${escapeHtml(bar.valueText)}</span>
  <span class="driver-bar" style="width:${bar.widthPct.toFixed(1)}%"></span>
  <span class="driver-phi">${bar.phiText}</span>
</div>`,
    )
    .join('\n');
  return `<div class="drivers">${title}
<p class="hint">Bars to the right push toward deterioration.</p>
${rows}
${renderFeedbackForm()}
</div>`;
}

function renderFeedbackForm(): string {
  return `<form class="feedback-form" data-action="feedback">
  <select name="verdict">
    <option>TruePositive</option>
    <option>FalsePositive</option>
    <option>FalseNegative</option>
    <option>CornerCase</option>
  </select>
  <input name="note" placeholder="note (optional)">
  <button type="submit">File feedback</button>
</form>`;
}

export function renderWhatIfPanel(
  values: ThresholdSet,
  view: WhatIfView | null,
  history: Array<{ label: string; view: WhatIfView }>,
  error: string | null,
  pending: boolean,
): string {
  const slider = (name: keyof ThresholdSet, max: number) =>
    `<label>${name}
  <input type="range" name="${name}" min="0.001" max="${max}" step="0.001" value="${values[name]}">
  <span class="slider-value">${values[name].toFixed(3)}</span>
</label>`;
  const controls = `<div class="whatif-controls">
${slider('red_level', 0.5)}
${slider('red_delta', 0.25)}
${slider('yellow_level', 0.5)}
${slider('yellow_delta', 0.25)}
<button data-action="run-whatif"${pending ? ' disabled' : ''}>Evaluate</button>
<button data-action="run-presets"${pending ? ' disabled' : ''}>Preset sweep 0.03 / 0.06 / 0.12</button>
</div>`;
  if (error !== null) {
    return `<div class="whatif disabled">${controls}
<p class="error">What-if unavailable: ${escapeHtml(error)}</p></div>`;
  }
  const summary =
    view === null
      ? '<p class="hint">Evaluate candidate thresholds against the stored runs.</p>'
      : renderWhatIfSummary(view);
  const comparison = history.length === 0 ? '' : renderWhatIfComparison(history);
  return `<div class="whatif">${controls}
${summary}
${comparison}
<p class="hint">Exploration only; nothing is applied to the live thresholds.</p>
</div>`;
}

function renderWhatIfSummary(view: WhatIfView): string {
  return `<table class="whatif-summary">
<tr><th>Red</th><th>Yellow</th><th>White</th><th>Alerts/day</th>
    <th>Sensitivity</th><th>Specificity</th><th>Precision</th><th>Labeled</th></tr>
<tr>
  <td class="num">${view.redCount}</td>
  <td class="num">${view.yellowCount}</td>
  <td class="num">${view.whiteCount}</td>
  <td class="num">${view.dailyVolume}</td>
  <td class="num">${view.sensitivity}</td>
  <td class="num">${view.specificity}</td>
  <td class="num">${view.precision}</td>
  <td class="num">${view.nLabeled}</td>
</tr>
</table>`;
}

function renderWhatIfComparison(history: Array<{ label: string; view: WhatIfView }>): string {
  const rows = history
    .map(
      (h) => `<tr>
  <td>${escapeHtml(h.label)}</td>
  <td class="num">${h.view.redCount}</td>
  <td class="num">${h.view.yellowCount}</td>
  <td class="num">${h.view.dailyVolume}</td>
  <td class="num">${h.view.sensitivity}</td>
  <td class="num">${h.view.specificity}</td>
  <td class="num">${h.view.precision}</td>
</tr>`,
    )
    .join('\n');
  return `<table class="whatif-compare">
<tr><th>Cutoff</th><th>Red</th><th>Yellow</th><th>Alerts/day</th>
    <th>Sensitivity</th><th>Specificity</th><th>Precision</th></tr>
${rows}
</table>`;
}

export function renderStatusBar(badge: StatusBadge | null): string {
  if (badge === null) {
    return '<span class="model-status">model status unavailable</span>';
  }
  const cls = badge.stale ? 'model-status stale' : 'model-status';
  return `<span class="${cls}">${escapeHtml(badge.label)}</span>`;
}

export function renderToolbar(
  runDate: string,
  department: string,
  tier: string,
  statusHtml: string,
): string {
  const tierOption = (name: string) =>
    `<option value="${name}"${tier === name ? ' selected' : ''}>${name || 'All tiers'}</option>`;
  return `<div class="toolbar">
  <label>Run date <input type="date" name="run-date" value="${escapeHtml(runDate)}"></label>
  <label>Department <input type="text" name="department" value="${escapeHtml(department)}" placeholder="all"></label>
  <label>Tier <select name="tier">${['', 'Red', 'Yellow', 'White'].map(tierOption).join('')}</select></label>
  ${statusHtml}
</div>`;
}
