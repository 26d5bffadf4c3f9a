/**
 * Dashboard state and wiring. State changes re-render the whole page to an
 * HTML string handed to an injected presenter, so the logic runs the same
 * under tests (string assertions) and in the browser (innerHTML swap).
 */

import { ApiClient } from './api.js';
import {
  renderDriverPanel,
  renderRetryState,
  renderStatusBar,
  renderToolbar,
  renderTriageTable,
  renderWhatIfPanel,
} from './dom.js';
import {
  buildTriageRows,
  driverBars,
  statusBadge,
  whatifView,
  type FeedbackState,
  type WhatIfView,
} from './viewmodel.js';
import type {
  AlertsResponse,
  ExplanationResponse,
  FeedbackVerdict,
  ModelStatus,
  ThresholdSet,
  TierName,
  WhatIfRequest,
} from './types.js';

export const DEFAULT_POLL_MS = 60_000;
const PRESET_CUTOFFS = [0.03, 0.06, 0.12];

export interface DashboardOptions {
  author?: string;
  pollMs?: number;
  explanationK?: number;
}

interface WhatIfState {
  values: ThresholdSet;
  view: WhatIfView | null;
  history: Array<{ label: string; view: WhatIfView }>;
  error: string | null;
  pending: boolean;
}

export interface DashboardState {
  runDate: string;
  department: string;
  tier: TierName | '';
  alerts: AlertsResponse | null;
  loadError: string | null;
  selected: string | null;
  explanation: ExplanationResponse | 'missing' | null;
  feedback: Record<string, FeedbackState>;
  whatif: WhatIfState;
  status: ModelStatus | null;
}

const DEFAULT_THRESHOLDS: ThresholdSet = {
  red_level: 0.12,
  red_delta: 0.06,
  yellow_level: 0.03,
  yellow_delta: 0.015,
};

export class Dashboard {
  readonly state: DashboardState;
  private readonly api: ApiClient;
  private readonly present: (html: string) => void;
  private readonly author: string;
  private readonly explanationK: number;
  private readonly pollMs: number;
  private pollTimer: ReturnType<typeof setInterval> | null = null;

  constructor(api: ApiClient, present: (html: string) => void, options: DashboardOptions = {}) {
    this.api = api;
    this.present = present;
    this.author = options.author ?? 'dashboard-user';
    this.explanationK = options.explanationK ?? 10;
    this.pollMs = options.pollMs ?? DEFAULT_POLL_MS;
    this.state = {
      runDate: todayIso(),
      department: '',
      tier: '',
      alerts: null,
      loadError: null,
      selected: null,
      explanation: null,
      feedback: {},
      whatif: {
        values: { ...DEFAULT_THRESHOLDS },
        view: null,
        history: [],
        error: null,
        pending: false,
      },
      status: null,
    };
  }

  render(): string {
    const s = this.state;
    const toolbar = renderToolbar(
      s.runDate,
      s.department,
      s.tier,
      renderStatusBar(s.status ? statusBadge(s.status) : null),
    );
    if (s.loadError !== null) {
      return `${toolbar}\n${renderRetryState(s.loadError)}`;
    }
    const rows = s.alerts ? buildTriageRows(s.alerts.alerts, s.feedback) : [];
    const table = s.alerts
      ? renderTriageTable(rows, s.selected)
      : '<p class="hint">Loading alerts.</p>';
    const drivers = renderDriverPanel(
      s.selected,
      s.explanation === null
        ? null
        : s.explanation === 'missing'
          ? 'missing'
          : driverBars(s.explanation),
    );
    const whatif = renderWhatIfPanel(
      s.whatif.values,
      s.whatif.view,
      s.whatif.history,
      s.whatif.error,
      s.whatif.pending,
    );
    return `${toolbar}\n<main>\n${table}\n${drivers}\n${whatif}\n</main>`;
  }

  private repaint(): void {
    this.present(this.render());
  }

  /** Loads one run's alerts; any failure clears the table rather than
   * leaving stale rows up. */
  async loadRun(runDate?: string): Promise<void> {
    if (runDate !== undefined) {
      this.state.runDate = runDate;
    }
    const filters: { tier?: TierName; department?: string } = {};
    if (this.state.tier) {
      filters.tier = this.state.tier;
    }
    if (this.state.department) {
      filters.department = this.state.department;
    }
    try {
      this.state.alerts = await this.api.getAlerts(this.state.runDate, filters);
      this.state.loadError = null;
    } catch (err) {
      this.state.alerts = null;
      this.state.loadError = errorMessage(err);
    }
    this.repaint();
  }

  async setFilters(department: string, tier: TierName | ''): Promise<void> {
    this.state.department = department;
    this.state.tier = tier;
    await this.loadRun();
  }

  async selectPatient(patientDay: string): Promise<void> {
    this.state.selected = patientDay;
    this.state.explanation = null;
    this.repaint();
    try {
      this.state.explanation = await this.api.getExplanation(patientDay, this.explanationK);
    } catch {
      this.state.explanation = 'missing';
    }
    this.repaint();
  }

  /** Optimistic badge; rolled back to an inline error if the service
   * rejects the entry. One submit per row at a time. */
  async submitFeedback(patientDay: string, verdict: FeedbackVerdict, note: string): Promise<void> {
    if (this.state.feedback[patientDay]?.status === 'saving') {
      return;
    }
    this.state.feedback[patientDay] = { status: 'saving', verdict };
    this.repaint();
    try {
      await this.api.postFeedback({
        patient_day: patientDay,
        verdict,
        note,
        author: this.author,
      });
      this.state.feedback[patientDay] = { status: 'saved', verdict };
    } catch (err) {
      this.state.feedback[patientDay] = { status: 'failed', message: errorMessage(err) };
    }
    this.repaint();
  }

  async runWhatIf(values?: Partial<ThresholdSet>, label?: string): Promise<void> {
    const w = this.state.whatif;
    w.values = { ...w.values, ...values };
    w.pending = true;
    this.repaint();
    try {
      const body: WhatIfRequest = { ...w.values };
      const summary = await this.api.postWhatIf(body);
      w.view = whatifView(summary);
      w.error = null;
      if (label !== undefined) {
        w.history.push({ label, view: w.view });
      }
    } catch (err) {
      w.view = null;
      w.error = errorMessage(err);
    }
    w.pending = false;
    this.repaint();
  }

  /** Three-point sweep: the whole default set scaled so Yellow starts at
   * each preset cutoff. Produces one comparison row per cutoff. */
  async runPresetSweep(): Promise<void> {
    this.state.whatif.history = [];
    for (const cutoff of PRESET_CUTOFFS) {
      const scale = cutoff / DEFAULT_THRESHOLDS.yellow_level;
      await this.runWhatIf(
        {
          red_level: DEFAULT_THRESHOLDS.red_level * scale,
          red_delta: DEFAULT_THRESHOLDS.red_delta * scale,
          yellow_level: cutoff,
          yellow_delta: DEFAULT_THRESHOLDS.yellow_delta * scale,
        },
        cutoff.toFixed(2),
      );
      if (this.state.whatif.error !== null) {
        break;
      }
    }
  }

  async refreshStatus(): Promise<void> {
    try {
      this.state.status = await this.api.getModelStatus();
    } catch {
      this.state.status = null;
    }
    this.repaint();
  }

  startPolling(): void {
    this.stopPolling();
    this.pollTimer = setInterval(() => {
      void this.loadRun();
    }, this.pollMs);
  }

  stopPolling(): void {
    if (this.pollTimer !== null) {
      clearInterval(this.pollTimer);
      this.pollTimer = null;
    }
  }

  /** Binds delegated browser events; everything routes through the same
   * action methods the tests call directly. */
  mount(root: HTMLElement): void {
    root.addEventListener('click', (event) => {
      const target = event.target as HTMLElement;
      const action = target.closest<HTMLElement>('[data-action]')?.dataset['action'];
      if (action === 'retry') {
        void this.loadRun();
        return;
      }
      if (action === 'run-whatif') {
        void this.runWhatIf(readSliders(root));
        return;
      }
      if (action === 'run-presets') {
        void this.runPresetSweep();
        return;
      }
      const row = target.closest<HTMLElement>('tr[data-patient-day]');
      if (row?.dataset['patientDay']) {
        void this.selectPatient(row.dataset['patientDay']);
      }
    });
    root.addEventListener('submit', (event) => {
      const form = event.target as HTMLFormElement;
      if (form.dataset['action'] !== 'feedback' || this.state.selected === null) {
        return;
      }
      event.preventDefault();
      const data = new FormData(form);
      void this.submitFeedback(
        this.state.selected,
        String(data.get('verdict')) as FeedbackVerdict,
        String(data.get('note') ?? ''),
      );
    });
    root.addEventListener('change', (event) => {
      const input = event.target as HTMLInputElement;
      if (input.name === 'run-date') {
        void this.loadRun(input.value);
      } else if (input.name === 'department' || input.name === 'tier') {
        const department =
          root.querySelector<HTMLInputElement>('input[name="department"]')?.value ?? '';
        const tier =
          root.querySelector<HTMLSelectElement>('select[name="tier"]')?.value ?? '';
        void this.setFilters(department, tier as TierName | '');
      }
    });
    void this.loadRun();
    void this.refreshStatus();
    this.startPolling();
  }
}

function readSliders(root: HTMLElement): Partial<ThresholdSet> {
  const read = (name: keyof ThresholdSet) => {
    const input = root.querySelector<HTMLInputElement>(`input[name="${name}"]`);
    return input ? Number(input.value) : undefined;
  };
  const out: Partial<ThresholdSet> = {};
  for (const name of ['red_level', 'red_delta', 'yellow_level', 'yellow_delta'] as const) {
    const value = read(name);
    if (value !== undefined && Number.isFinite(value)) {
      out[name] = value;
    }
  }
  return out;
}

function errorMessage(err: unknown): string {
  if (err instanceof Error) {
    return err.message;
  }
  return String(err);
}

function todayIso(): string {
  return new Date().toISOString().slice(0, 10);
}

function bootstrap(): void {
  const root = document.getElementById('app');
  if (!root) {
    return;
  }
  const base =
    document.querySelector('meta[name="service-base"]')?.getAttribute('content') ?? '';
  const dashboard = new Dashboard(new ApiClient(base), (html) => {
    root.innerHTML = html;
  });
  dashboard.mount(root);
}

if (typeof document !== 'undefined') {
  bootstrap();
}
