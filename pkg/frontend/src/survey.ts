/**
 * Survey form state for the participant console. The server's survey
 * document drives a card deck: one holistic card (unless the server
 * skipped it), one card per sampled ad, one experience card. Cards are
 * answered strictly in order and validation runs at entry time with
 * the same rules the server applies, so a form that reaches the end
 * cannot be rejected for content.
 */
import {
  AnswersPayload,
  ExperienceAnswers,
  HolisticAnswers,
  PerAdAnswer,
  SurveyDoc,
} from './wire';

export class FormError extends Error {
  constructor(
    public field: string,
    message: string,
  ) {
    super(`${field}: ${message}`);
  }
}

function checkLikert(field: string, value: unknown): number {
  if (typeof value !== 'number' || !Number.isInteger(value) || value < 1 || value > 7) {
    throw new FormError(field, 'must be an integer in 1..7');
  }
  return value;
}

const RECOGNITION = new Set(['yes', 'no', 'unsure']);

export type Card =
  | { kind: 'holistic'; adCount: number }
  | { kind: 'per_ad'; adId: string; position: number; total: number }
  | { kind: 'experience' };

export class SurveyForm {
  private cards: Card[] = [];
  private index = 0;
  private holistic: HolisticAnswers | null = null;
  private perAd = new Map<string, PerAdAnswer>();
  private experience: ExperienceAnswers | null = null;

  constructor(public doc: SurveyDoc) {
    if (!doc.holistic.skipped) {
      this.cards.push({ kind: 'holistic', adCount: doc.holistic.ads.length });
    }
    doc.per_ad.forEach((q, i) => {
      this.cards.push({
        kind: 'per_ad',
        adId: q.ad.ad_id,
        position: i + 1,
        total: doc.per_ad.length,
      });
    });
    this.cards.push({ kind: 'experience' });
  }

  get current(): Card | null {
    return this.cards[this.index] ?? null;
  }

  get progress(): { done: number; total: number } {
    return { done: this.index, total: this.cards.length };
  }

  get complete(): boolean {
    return this.index >= this.cards.length;
  }

  private expect(kind: Card['kind']): Card {
    const card = this.current;
    if (!card) throw new FormError('form', 'already complete');
    if (card.kind !== kind) {
      throw new FormError('form', `current card is ${card.kind}, not ${kind}`);
    }
    return card;
  }

  answerHolistic(values: HolisticAnswers): void {
    this.expect('holistic');
    const bucket = values.recognition_bucket;
    if (typeof bucket !== 'number' || !Number.isInteger(bucket) || bucket < 1 || bucket > 7) {
      throw new FormError('holistic.recognition_bucket', 'must be an integer in 1..7');
    }
    this.holistic = {
      recognition_bucket: bucket,
      interest: checkLikert('holistic.interest', values.interest),
      representativity: checkLikert('holistic.representativity', values.representativity),
    };
    this.index += 1;
  }

  answerCurrentAd(values: Omit<PerAdAnswer, 'ad_id'>): void {
    const card = this.expect('per_ad') as Extract<Card, { kind: 'per_ad' }>;
    const prefix = `per_ad[${card.position - 1}]`;
    if (!RECOGNITION.has(values.recognition)) {
      throw new FormError(`${prefix}.recognition`, 'must be one of yes/no/unsure');
    }
    this.perAd.set(card.adId, {
      ad_id: card.adId,
      recognition: values.recognition,
      interest: checkLikert(`${prefix}.interest`, values.interest),
      representativity: checkLikert(`${prefix}.representativity`, values.representativity),
    });
    this.index += 1;
  }

  answerExperience(values: ExperienceAnswers): void {
    this.expect('experience');
    if (typeof values.comments !== 'string') {
      throw new FormError('experience.comments', 'must be text');
    }
    this.experience = {
      rating: checkLikert('experience.rating', values.rating),
      recommend: checkLikert('experience.recommend', values.recommend),
      disabled_freq: checkLikert('experience.disabled_freq', values.disabled_freq),
      incognito_freq: checkLikert('experience.incognito_freq', values.incognito_freq),
      comments: values.comments,
    };
    this.index += 1;
  }

  /** Field names still blocking submission, in card order. */
  missing(): string[] {
    const out: string[] = [];
    if (!this.doc.holistic.skipped && !this.holistic) out.push('holistic');
    for (const q of this.doc.per_ad) {
      if (!this.perAd.has(q.ad.ad_id)) out.push(`per_ad:${q.ad.ad_id}`);
    }
    if (!this.experience) out.push('experience');
    return out;
  }

  /** The exact POST /v1/survey answers body; throws while cards remain. */
  toAnswers(): AnswersPayload {
    const gaps = this.missing();
    if (gaps.length) {
      throw new FormError('form', `unanswered: ${gaps.slice(0, 3).join(', ')}`);
    }
    const payload: AnswersPayload = {
      per_ad: this.doc.per_ad.map((q) => {
        const answer = this.perAd.get(q.ad.ad_id);
        if (!answer) throw new FormError('form', `lost answer for ${q.ad.ad_id}`);
        return { ...answer };
      }),
      experience: { ...(this.experience as ExperienceAnswers) },
    };
    if (this.holistic) payload.holistic = { ...this.holistic };
    return payload;
  }
}
