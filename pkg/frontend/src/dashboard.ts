/**
 * Auditor dashboard view-model: headline totals, per-participant action
 * availability, and a reconciliation pass that checks the overview
 * counters against the CSV exports row for row. The dashboard never
 * trusts its own arithmetic silently; a mismatch is surfaced, not
 * averaged away.
 */
import Papa from 'papaparse';
import type { Overview, ParticipantRow } from './wire';

const TERMINAL = new Set(['offboarded', 'dropped']);

export interface ActionState {
  id: 'grant_onboarding' | 'reissue_code' | 'offboard';
  enabled: boolean;
  reason?: string;
}

export function actionsFor(p: ParticipantRow): ActionState[] {
  if (TERMINAL.has(p.state)) {
    const reason = `participant is ${p.state}`;
    return [
      { id: 'grant_onboarding', enabled: false, reason },
      { id: 'reissue_code', enabled: false, reason },
      { id: 'offboard', enabled: false, reason },
    ];
  }
  return [
    {
      id: 'grant_onboarding',
      enabled: p.state === 'selected',
      reason: p.state === 'selected' ? undefined : `participant is ${p.state}, not selected`,
    },
    {
      id: 'reissue_code',
      enabled: !['waitlisted', 'selected'].includes(p.state),
      reason: ['waitlisted', 'selected'].includes(p.state)
        ? 'participant has not begun onboarding'
        : undefined,
    },
    { id: 'offboard', enabled: true },
  ];
}

export interface HeadlineTotals {
  participants: number;
  adsStored: number;
  deliveries: number;
  surveysReleased: number;
  surveysSubmitted: number;
  completionRate: number | null;
  paymentsTotalUnits: number;
}

export function headlineTotals(overview: Overview): HeadlineTotals {
  const participants = Object.values(overview.participants_by_state).reduce((a, b) => a + b, 0);
  return {
    participants,
    adsStored: overview.conservation.stored_now,
    deliveries: overview.deliveries,
    surveysReleased: overview.surveys_released,
    surveysSubmitted: overview.surveys_submitted,
    completionRate: overview.completion_rate,
    paymentsTotalUnits: overview.payments_total_units,
  };
}

export interface ReconcileCheck {
  name: string;
  expected: number;
  actual: number;
  ok: boolean;
}

function dataRows(csv: string): Record<string, string>[] {
  const parsed = Papa.parse<Record<string, string>>(csv, {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length) {
    throw new Error(`export csv failed to parse: ${parsed.errors[0]?.message}`);
  }
  return parsed.data;
}

/**
 * Compare the overview's counters with what the exports actually
 * contain. Survey exports are long-form (several rows per survey), so
 * those counters compare against distinct survey ids, not row counts.
 */
export function reconcile(
  overview: Overview,
  exports: { ads: string; deliveries: string; surveys: string; participants: string },
): ReconcileCheck[] {
  const ads = dataRows(exports.ads);
  const deliveries = dataRows(exports.deliveries);
  const surveys = dataRows(exports.surveys);
  const participants = dataRows(exports.participants);

  const surveyIds = new Set(surveys.map((r) => r.survey_id));
  const submittedIds = new Set(
    surveys.filter((r) => (r.submitted_at ?? '') !== '').map((r) => r.survey_id),
  );
  const check = (name: string, expected: number, actual: number): ReconcileCheck => ({
    name,
    expected,
    actual,
    ok: expected === actual,
  });
  return [
    check('participant rows', headlineTotals(overview).participants, participants.length),
    check('exportable ads', overview.conservation.exportable, ads.length),
    check('deliveries', overview.deliveries, deliveries.length),
    check('surveys released', overview.surveys_released, surveyIds.size),
    check('surveys submitted', overview.surveys_submitted, submittedIds.size),
  ];
}

export function allReconciled(checks: ReconcileCheck[]): boolean {
  return checks.every((c) => c.ok);
}
