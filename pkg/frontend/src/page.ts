/**
 * Structural page model the extension logic runs against in tests.
 * Fixture pages stand in for live DOM: geometry in page coordinates,
 * one record per element, subresource URLs attached where a browser
 * would issue requests. The corpus file is NDJSON, one page per line.
 *
 * Selector support covers what study filter lists actually use:
 * compound simple selectors (`tag`, `#id`, `.class`, `div.promo.box`).
 * Anything else never matches.
 */
import { z } from 'zod';

export const rectSchema = z.object({
  x: z.number(),
  y: z.number(),
  w: z.number().nonnegative(),
  h: z.number().nonnegative(),
});
export type Rect = z.infer<typeof rectSchema>;

export const pageElementSchema = z.object({
  key: z.string(),
  tag: z.string(),
  id: z.string().optional(),
  classes: z.array(z.string()).optional(),
  rect: rectSchema,
  img: z.string().optional(),
  script: z.string().optional(),
  href: z.string().optional(),
  text: z.string().optional(),
});
export type PageElement = z.infer<typeof pageElementSchema>;

export const fixturePageSchema = z.object({
  url: z.string(),
  viewport: z.object({ w: z.number().positive(), h: z.number().positive() }),
  height: z.number().positive(),
  elements: z.array(pageElementSchema),
  adKeys: z.array(z.string()), // ground-truth annotation, set at page construction
});
export type FixturePage = z.infer<typeof fixturePageSchema>;

interface CompoundSelector {
  tag?: string;
  id?: string;
  classes: string[];
}

const SELECTOR_RE = /^([a-zA-Z][\w-]*)?(#[\w-]+)?((?:\.[\w-]+)*)$/;

function parseSelector(selector: string): CompoundSelector | null {
  const m = SELECTOR_RE.exec(selector.trim());
  if (!m || !m[0]) return null;
  const classes = m[3] ? m[3].split('.').filter(Boolean) : [];
  return { tag: m[1]?.toLowerCase(), id: m[2]?.slice(1), classes };
}

export function matchesSelector(el: PageElement, selector: string): boolean {
  const parsed = parseSelector(selector);
  if (!parsed) return false;
  if (parsed.tag && el.tag.toLowerCase() !== parsed.tag) return false;
  if (parsed.id && el.id !== parsed.id) return false;
  const classes = el.classes ?? [];
  return parsed.classes.every((c) => classes.includes(c));
}

export function parseCorpus(ndjson: string): FixturePage[] {
  const pages: FixturePage[] = [];
  for (const line of ndjson.split('\n')) {
    if (!line.trim()) continue;
    pages.push(fixturePageSchema.parse(JSON.parse(line)));
  }
  return pages;
}

/** Fraction of the element's area inside the viewport rectangle. */
export function intersectionRatio(rect: Rect, viewport: Rect): number {
  const area = rect.w * rect.h;
  if (area === 0) return 0;
  const ox = Math.max(0, Math.min(rect.x + rect.w, viewport.x + viewport.w) - Math.max(rect.x, viewport.x));
  const oy = Math.max(0, Math.min(rect.y + rect.h, viewport.y + viewport.h) - Math.max(rect.y, viewport.y));
  return (ox * oy) / area;
}
