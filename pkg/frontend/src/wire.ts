/**
 * Wire document shapes for the study server (docs/protocol.md in the
 * server repo). Every JSON response carries {api_version, server_time};
 * error bodies carry {error, message} plus the same envelope pair.
 * Schemas are deliberately loose about extra fields: the protocol says
 * unknown fields are ignored on input and never emitted, but a client
 * should not break if the server starts emitting more.
 */
import { z } from 'zod';

export const envelopeFields = {
  api_version: z.string(),
  server_time: z.string(),
};

export const rulesetDocSchema = z.object({
  version: z.number().int(),
  digest: z.string(),
  network: z.array(z.string()),
  exceptions: z.array(z.string()),
  cosmetic: z.array(z.string()),
});
export type RulesetDoc = z.infer<typeof rulesetDocSchema>;

export const geometrySchema = z.object({ w: z.number().int(), h: z.number().int() });
export type Geometry = z.infer<typeof geometrySchema>;

export const swapResponseSchema = z.object({
  swap_delivery_id: z.string(),
  slot_geometry: geometrySchema,
  served_at: z.string(),
  payload: z.object({
    payload_kind: z.string(),
    image_url: z.string().nullable(),
    stored_image_ref: z.string().nullable(),
    text: z.string().nullable(),
    target_url: z.string(),
    natural_geometry: geometrySchema,
  }),
});
export type SwapResponse = z.infer<typeof swapResponseSchema>;

const surveyAdSchema = z.object({
  ad_id: z.string(),
  payload_kind: z.string(),
  image_url: z.string().nullable(),
  stored_image_ref: z.string().nullable(),
  text: z.string().nullable(),
});

export const surveyDocSchema = z.object({
  survey_id: z.string(),
  phase: z.enum(['midpoint', 'final']),
  submitted: z.boolean(),
  holistic: z.object({
    skipped: z.boolean(),
    ads: z.array(surveyAdSchema),
  }),
  per_ad: z.array(
    z.object({
      ad: surveyAdSchema,
      category: z.object({
        seen_status: z.enum(['seen', 'unseen']),
        targeted_user: z.enum(['self', 'partner']),
        has_people: z.enum(['people', 'noPeople']),
      }),
    }),
  ),
  experience_fields: z.array(z.string()),
});
export type SurveyDoc = z.infer<typeof surveyDocSchema>;

// Answers travel in the opposite direction; this is the exact POST body
// the server validates, field for field.
export interface HolisticAnswers {
  recognition_bucket: number;
  interest: number;
  representativity: number;
}
export interface PerAdAnswer {
  ad_id: string;
  recognition: 'yes' | 'no' | 'unsure';
  interest: number;
  representativity: number;
}
export interface ExperienceAnswers {
  rating: number;
  recommend: number;
  disabled_freq: number;
  incognito_freq: number;
  comments: string;
}
export interface AnswersPayload {
  holistic?: HolisticAnswers;
  per_ad: PerAdAnswer[];
  experience: ExperienceAnswers;
}

export const ingestAckSchema = z.object({
  stored: z.number().int(),
  duplicates: z.number().int(),
});

export const eventsAckSchema = z.object({
  applied: z.number().int(),
  duplicates: z.number().int(),
  dropped: z.number().int(),
  errors: z.array(z.object({ index: z.number().int(), error: z.string() })),
});

export const conservationSchema = z.object({
  ads_ingested: z.number().int(),
  ads_stored: z.number().int(),
  ads_duplicates: z.number().int(),
  stored_now: z.number().int(),
  redacted: z.number().int(),
  exportable: z.number().int(),
});
export type Conservation = z.infer<typeof conservationSchema>;

export const overviewSchema = z.object({
  participants_by_state: z.record(z.string(), z.number().int()),
  ads_by_phase: z.record(z.string(), z.number().int()),
  deliveries: z.number().int(),
  surveys_released: z.number().int(),
  surveys_submitted: z.number().int(),
  completion_rate: z.number().nullable(),
  payments_total_units: z.number().int(),
  conservation: conservationSchema,
  ruleset_version: z.number().int(),
  study_started: z.boolean(),
});
export type Overview = z.infer<typeof overviewSchema>;

export const participantRowSchema = z.object({
  participant_id: z.string(),
  state: z.string(),
  partner_id: z.string().nullable(),
  milestones: z.array(z.string()),
  redaction_count: z.number().int(),
  ads: z.number().int(),
  excluded_from_intervention: z.boolean(),
  payment_units: z.number().int(),
});
export type ParticipantRow = z.infer<typeof participantRowSchema>;

export interface AdUpload {
  client_ad_id: string;
  payload_kind: 'image' | 'text';
  image_url?: string;
  text?: string;
  target_url: string;
  source_page_url: string;
  slot_geometry: Geometry;
  captured_at: string;
}

export interface TelemetryEvent {
  client_event_id: string;
  kind: 'view' | 'click';
  ref_kind: 'ad' | 'swap';
  ad_ref: string;
}
