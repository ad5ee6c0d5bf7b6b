/**
 * Ad detection over a page: network-rule hits on subresource URLs plus
 * cosmetic-selector hits on element shape. One slot per element per
 * page load, whichever route caught it first.
 */
import type { Matcher } from './rules';
import type { FixturePage, PageElement } from './page';
import { matchesSelector } from './page';
import { hostnameOf } from './suffixes';
import type { AdUpload, Geometry } from './wire';

export interface AdSlot {
  clientAdId: string;
  element: PageElement;
  pageUrl: string;
  route: 'network' | 'cosmetic';
  matchedRule: string;
  geometry: Geometry;
}

export interface PageContext {
  pageLoadId: string;
  incognito?: boolean;
}

export function detectAds(page: FixturePage, matcher: Matcher, ctx: PageContext): AdSlot[] {
  // Incognito contexts emit nothing: no slots, so nothing downstream
  // ever uploads or tracks.
  if (ctx.incognito) return [];

  const selectors = matcher.cosmeticSelectorsFor(hostnameOf(page.url));
  const slots: AdSlot[] = [];
  for (const el of page.elements) {
    let route: AdSlot['route'] | null = null;
    let rule = '';
    if (el.img) {
      const d = matcher.matchNetwork(el.img, page.url, 'image');
      if (d.outcome === 'blocked_by') {
        route = 'network';
        rule = d.rule!;
      }
    }
    if (!route && el.script) {
      const d = matcher.matchNetwork(el.script, page.url, 'script');
      if (d.outcome === 'blocked_by') {
        route = 'network';
        rule = d.rule!;
      }
    }
    if (!route) {
      const hit = selectors.find((s) => matchesSelector(el, s));
      if (hit !== undefined) {
        route = 'cosmetic';
        rule = hit;
      }
    }
    if (route) {
      slots.push({
        clientAdId: `${ctx.pageLoadId}:${el.key}`,
        element: el,
        pageUrl: page.url,
        route,
        matchedRule: rule,
        geometry: { w: el.rect.w, h: el.rect.h },
      });
    }
  }
  return slots;
}

/** Wire batch for POST /v1/ads from detected slots. */
export function adsForUpload(slots: AdSlot[], capturedAt: string): AdUpload[] {
  return slots.map((slot) => {
    const el = slot.element;
    const base = {
      client_ad_id: slot.clientAdId,
      target_url: el.href || el.img || slot.pageUrl,
      source_page_url: slot.pageUrl,
      slot_geometry: slot.geometry,
      captured_at: capturedAt,
    };
    if (el.img) return { ...base, payload_kind: 'image' as const, image_url: el.img };
    return { ...base, payload_kind: 'text' as const, text: el.text || '(untitled ad)' };
  });
}
