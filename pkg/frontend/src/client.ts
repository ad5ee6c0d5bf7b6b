/**
 * Typed HTTP clients for the study server. StudyClient speaks the
 * participant surface with a bearer token; AuditorClient drives the
 * admin surface. Both throw ApiError on non-2xx responses, carrying
 * the server's stable error code so callers can branch on it.
 */
import { z } from 'zod';
import {
  AdUpload,
  AnswersPayload,
  envelopeFields,
  eventsAckSchema,
  ingestAckSchema,
  Overview,
  overviewSchema,
  ParticipantRow,
  participantRowSchema,
  RulesetDoc,
  rulesetDocSchema,
  SurveyDoc,
  surveyDocSchema,
  SwapResponse,
  swapResponseSchema,
  TelemetryEvent,
} from './wire';

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(`${code}: ${message}`);
  }
}

async function requestJson(
  url: string,
  method: string,
  token: string | null,
  body?: unknown,
): Promise<Record<string, unknown>> {
  const headers: Record<string, string> = {};
  if (token) headers['Authorization'] = `Bearer ${token}`;
  if (body !== undefined) headers['Content-Type'] = 'application/json';
  const res = await fetch(url, {
    method,
    headers,
    body: body === undefined ? undefined : JSON.stringify(body),
  });
  const doc = (await res.json()) as Record<string, unknown>;
  if (!res.ok) {
    throw new ApiError(res.status, String(doc.error ?? 'unknown'), String(doc.message ?? ''));
  }
  return doc;
}

const registerAckSchema = z.object({ token: z.string(), participant_id: z.string() });
const submitAckSchema = z.object({
  survey_id: z.string(),
  submitted: z.boolean(),
  phase: z.string(),
});
const labelsAckSchema = z.object({
  applied: z.number().int(),
  skipped: z.number().int(),
  unknown: z.array(z.string()),
});

export class StudyClient {
  constructor(
    public base: string,
    public token: string | null = null,
  ) {}

  async register(onboardingCode: string, instanceInfo: string): Promise<string> {
    const doc = await requestJson(`${this.base}/v1/register`, 'POST', null, {
      onboarding_code: onboardingCode,
      instance_info: instanceInfo,
    });
    const ack = registerAckSchema.parse(doc);
    this.token = ack.token;
    return ack.participant_id;
  }

  async uploadAds(ads: AdUpload[]): Promise<{ stored: number; duplicates: number }> {
    const doc = await requestJson(`${this.base}/v1/ads`, 'POST', this.token, { ads });
    return ingestAckSchema.parse(doc);
  }

  async sendEvents(events: TelemetryEvent[]) {
    const doc = await requestJson(`${this.base}/v1/events`, 'POST', this.token, { events });
    return eventsAckSchema.parse(doc);
  }

  async fetchSwap(w: number, h: number): Promise<SwapResponse> {
    const doc = await requestJson(`${this.base}/v1/swap?w=${w}&h=${h}`, 'GET', this.token);
    return swapResponseSchema.parse(doc);
  }

  async fetchRuleset(): Promise<RulesetDoc> {
    // the one unauthenticated endpoint: the extension needs rules pre-consent
    const doc = await requestJson(`${this.base}/v1/ruleset`, 'GET', null);
    return rulesetDocSchema.parse(doc.ruleset);
  }

  async fetchSurvey(): Promise<SurveyDoc> {
    const doc = await requestJson(`${this.base}/v1/survey`, 'GET', this.token);
    return surveyDocSchema.parse(doc.survey);
  }

  async submitSurvey(answers: AnswersPayload) {
    const doc = await requestJson(`${this.base}/v1/survey`, 'POST', this.token, { answers });
    return submitAckSchema.parse(doc);
  }

  async myAds(): Promise<Record<string, unknown>[]> {
    const doc = await requestJson(`${this.base}/v1/me/ads`, 'GET', this.token);
    return (doc.ads as Record<string, unknown>[]) ?? [];
  }

  async redact(adIds: string[]): Promise<number> {
    const doc = await requestJson(`${this.base}/v1/me/redact`, 'POST', this.token, {
      ad_ids: adIds,
    });
    return z.number().int().parse(doc.redacted);
  }
}

export class AuditorClient {
  constructor(
    public base: string,
    public token: string,
  ) {}

  private call(path: string, method = 'POST', body?: unknown) {
    return requestJson(`${this.base}${path}`, method, this.token, body);
  }

  async overview(): Promise<Overview> {
    const doc = await this.call('/v1/admin/overview', 'GET');
    return overviewSchema.parse(doc);
  }

  async participants(): Promise<ParticipantRow[]> {
    const doc = await this.call('/v1/admin/participants', 'GET');
    return z.array(participantRowSchema).parse(doc.participants);
  }

  async addWaitlist(demographics: Record<string, unknown>): Promise<string> {
    const doc = await this.call('/v1/admin/waitlist', 'POST', { demographics });
    return z.string().parse(doc.participant_id);
  }

  async selectCohort(quota: number): Promise<string[]> {
    const doc = await this.call('/v1/admin/select_cohort', 'POST', { quota });
    return z.array(z.string()).parse(doc.selected);
  }

  async grantOnboarding(participantId: string): Promise<string> {
    const doc = await this.call('/v1/admin/grant_onboarding', 'POST', {
      participant_id: participantId,
    });
    return z.string().parse(doc.onboarding_code);
  }

  async assignPairs(): Promise<{ pairs: [string, string][]; unpaired: string | null }> {
    const doc = await this.call('/v1/admin/assign_pairs');
    return {
      pairs: z.array(z.tuple([z.string(), z.string()])).parse(doc.pairs),
      // odd cohorts leave one participant out; null when everyone paired
      unpaired: z.string().nullable().parse(doc.unpaired ?? null),
    };
  }

  async startStudy(): Promise<void> {
    await this.call('/v1/admin/start_study');
  }

  async releaseSurvey(phase: 'midpoint' | 'final'): Promise<number> {
    const doc = await this.call('/v1/admin/release_survey', 'POST', { phase });
    return z.number().int().parse(doc.released);
  }

  async offboard(participantId: string): Promise<void> {
    await this.call('/v1/admin/offboard', 'POST', { participant_id: participantId });
  }

  async applyLabels(labels: { ad_id: string; has_people: boolean }[]) {
    const doc = await this.call('/v1/admin/labels', 'POST', { labels });
    return labelsAckSchema.parse(doc);
  }

  async setRuleset(text: string): Promise<{ version: number; warnings: unknown[] }> {
    const doc = await this.call('/v1/admin/ruleset', 'POST', { text });
    return {
      version: z.number().int().parse(doc.version),
      warnings: (doc.warnings as unknown[]) ?? [],
    };
  }

  async tick(): Promise<void> {
    await this.call('/v1/admin/tick');
  }

  async clockAdvance(seconds: number): Promise<string> {
    const doc = await this.call('/v1/admin/clock_advance', 'POST', { seconds });
    return z.string().parse(doc.now);
  }

  async exportCsv(
    kind: 'ads' | 'deliveries' | 'surveys' | 'participants',
    params: Record<string, string> = {},
  ): Promise<string> {
    const search = new URLSearchParams({ kind, ...params });
    const res = await fetch(`${this.base}/v1/export?${search}`, {
      headers: { Authorization: `Bearer ${this.token}` },
    });
    if (!res.ok) {
      const doc = (await res.json()) as Record<string, unknown>;
      throw new ApiError(res.status, String(doc.error ?? 'unknown'), String(doc.message ?? ''));
    }
    return res.text();
  }
}

// envelopeFields is re-exported so tests can assert the envelope pair
// without importing zod internals from wire.ts call sites.
export const envelope = z.object(envelopeFields);
