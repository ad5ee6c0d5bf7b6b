import { describe, expect, it } from 'vitest';
import { Matcher, ResourceType } from '../src/rules';
import { docFromList } from './helpers';

const PAGE = 'https://news.example/story';

// Decision table derived by hand from the published grammar and frozen;
// the server-side suite carries the same 30 cases. Keep both in sync by
// editing the grammar doc first.
const GOLDEN: [string, string, string, string, ResourceType, string, string | null][] = [
  ['host-anchor-basic',
    '||ads.example^', 'https://ads.example/b.js', PAGE, 'other',
    'blocked_by', '||ads.example^'],
  ['host-anchor-subdomain',
    '||ads.example^', 'https://sub.ads.example/x', PAGE, 'other',
    'blocked_by', '||ads.example^'],
  ['host-anchor-prefix-not-boundary',
    '||ads.example^', 'https://notads.example/x', PAGE, 'other',
    'no_match', null],
  ['host-anchor-suffix-continues',
    '||ads.example^', 'https://ads.example.evil.com/x', PAGE, 'other',
    'no_match', null],
  ['separator-matches-port-colon',
    '||ads.example^', 'https://ads.example:8080/x', PAGE, 'other',
    'blocked_by', '||ads.example^'],
  ['separator-matches-end-of-address',
    '||ads.example^', 'https://ads.example', PAGE, 'other',
    'blocked_by', '||ads.example^'],
  ['separator-excludes-underscore',
    '||ads.example^', 'https://ads.example_x/y', PAGE, 'other',
    'no_match', null],
  ['exception-overrides-block',
    '||ads.example^\n@@||ads.example/allowlisted^',
    'https://ads.example/allowlisted?x=1', PAGE, 'other',
    'exempted_by', '@@||ads.example/allowlisted^'],
  ['exception-not-matching-leaves-block',
    '||ads.example^\n@@||ads.example/allowlisted^',
    'https://ads.example/other', PAGE, 'other',
    'blocked_by', '||ads.example^'],
  ['exception-alone-is-no-match',
    '@@||ads.example^', 'https://ads.example/x', PAGE, 'other',
    'no_match', null],
  ['both-anchors-exact',
    '|https://exact.example/landing|',
    'https://exact.example/landing', PAGE, 'other',
    'blocked_by', '|https://exact.example/landing|'],
  ['end-anchor-rejects-trailing',
    '|https://exact.example/landing|',
    'https://exact.example/landing?utm=1', PAGE, 'other',
    'no_match', null],
  ['start-anchor-rejects-prefix',
    '|https://exact.example/landing|',
    'https://m.exact.example/landing', PAGE, 'other',
    'no_match', null],
  ['wildcard-spans-path',
    '/banner/*.gif', 'https://site.example/banner/ad.gif', PAGE, 'other',
    'blocked_by', '/banner/*.gif'],
  ['wildcard-extension-mismatch',
    '/banner/*.gif', 'https://site.example/banner/ad.png', PAGE, 'other',
    'no_match', null],
  ['plain-substring',
    'banner', 'https://site.example/img/bannerad.jpg', PAGE, 'other',
    'blocked_by', 'banner'],
  ['match-is-case-insensitive',
    'BANNER', 'https://site.example/Banner/x', PAGE, 'other',
    'blocked_by', 'BANNER'],
  ['third-party-option-cross-site',
    '||tracker.example^$third-party',
    'https://tracker.example/px', 'https://news.example/story', 'other',
    'blocked_by', '||tracker.example^$third-party'],
  ['third-party-option-same-site',
    '||tracker.example^$third-party',
    'https://tracker.example/px', 'https://sub.tracker.example/story', 'other',
    'no_match', null],
  ['negated-third-party-same-site',
    '||stats.example^$~third-party',
    'https://stats.example/x', 'https://stats.example/home', 'other',
    'blocked_by', '||stats.example^$~third-party'],
  ['negated-third-party-cross-site',
    '||stats.example^$~third-party',
    'https://stats.example/x', 'https://news.example/story', 'other',
    'no_match', null],
  ['type-option-applies',
    '||media.example^$image', 'https://media.example/a.png', PAGE, 'image',
    'blocked_by', '||media.example^$image'],
  ['type-option-filters-other-types',
    '||media.example^$image', 'https://media.example/a.js', PAGE, 'script',
    'no_match', null],
  ['negated-type-excludes',
    '||media.example^$~image', 'https://media.example/a.png', PAGE, 'image',
    'no_match', null],
  ['negated-type-passes-others',
    '||media.example^$~image', 'https://media.example/page', PAGE, 'other',
    'blocked_by', '||media.example^$~image'],
  ['typed-exception-applies-to-its-type',
    '||cdn.example^\n@@||cdn.example^$image',
    'https://cdn.example/pic', PAGE, 'image',
    'exempted_by', '@@||cdn.example^$image'],
  ['typed-exception-skips-other-types',
    '||cdn.example^\n@@||cdn.example^$image',
    'https://cdn.example/app.js', PAGE, 'script',
    'blocked_by', '||cdn.example^'],
  ['mid-pattern-separator',
    '||tracker.example^pixel', 'https://tracker.example/pixel', PAGE, 'other',
    'blocked_by', '||tracker.example^pixel'],
  ['mid-pattern-separator-needs-boundary',
    '||tracker.example^pixel', 'https://tracker.examplepixel/x', PAGE, 'other',
    'no_match', null],
  ['separator-matches-query-start',
    '||search.example/ads^', 'https://search.example/ads?q=1', PAGE, 'other',
    'blocked_by', '||search.example/ads^'],
];

describe('network rule decisions', () => {
  for (const [name, rules, url, page, type, outcome, cited] of GOLDEN) {
    it(name, () => {
      const matcher = new Matcher(docFromList(rules));
      expect(matcher.warnings).toEqual([]);
      const decision = matcher.matchNetwork(url, page, type);
      expect(decision.outcome).toBe(outcome);
      expect(decision.rule ?? null).toBe(cited);
    });
  }

  it('rejects relative request urls', () => {
    const matcher = new Matcher(docFromList('||ads.example^'));
    expect(() => matcher.matchNetwork('/banner.png', PAGE)).toThrow(/absolute/);
  });
});

describe('document hygiene', () => {
  it('skips regex-literal rules with a warning', () => {
    const matcher = new Matcher(docFromList('/^ads[0-9]+$/\n||ads.example^'));
    expect(matcher.warnings).toEqual([
      { line: '/^ads[0-9]+$/', reason: 'regex-literal rules unsupported' },
    ]);
    // the healthy rule still works
    expect(matcher.matchNetwork('https://ads.example/x', PAGE).outcome).toBe('blocked_by');
  });

  it('skips rules with unknown options', () => {
    const matcher = new Matcher(docFromList('||pop.example^$popup'));
    expect(matcher.warnings).toHaveLength(1);
    expect(matcher.warnings[0]?.reason).toContain('popup');
    expect(matcher.matchNetwork('https://pop.example/x', PAGE).outcome).toBe('no_match');
  });

  it('skips empty patterns', () => {
    const matcher = new Matcher(docFromList('$image'));
    expect(matcher.warnings).toHaveLength(1);
    expect(matcher.warnings[0]?.reason).toBe('empty pattern');
  });

  it('splits options on the last dollar sign', () => {
    // the pattern itself contains '$' (query param); only the suffix
    // after the final '$' is the option list
    const matcher = new Matcher(docFromList('/track$param^$image'));
    expect(matcher.warnings).toEqual([]);
    const hit = matcher.matchNetwork('https://x.example/track$param?y', PAGE, 'image');
    expect(hit.outcome).toBe('blocked_by');
    expect(matcher.matchNetwork('https://x.example/track$param?y', PAGE, 'script').outcome).toBe(
      'no_match',
    );
  });
});

describe('cosmetic scoping', () => {
  const doc = docFromList(
    [
      '##.ad-banner',
      'news.example##.promo',
      'news.example,blog.example##.tile',
      '~media.example##.sticky',
      '##.ad-banner', // duplicate line: selector must not repeat
    ].join('\n'),
  );
  const matcher = new Matcher(doc);

  it('global selectors apply everywhere, deduplicated in order', () => {
    expect(matcher.cosmeticSelectorsFor('anything.example')).toEqual(['.ad-banner', '.sticky']);
  });

  it('scoped selectors require a listed domain', () => {
    expect(matcher.cosmeticSelectorsFor('news.example')).toEqual([
      '.ad-banner',
      '.promo',
      '.tile',
      '.sticky',
    ]);
    expect(matcher.cosmeticSelectorsFor('blog.example')).toContain('.tile');
  });

  it('subdomains inherit the scope', () => {
    expect(matcher.cosmeticSelectorsFor('m.news.example')).toContain('.promo');
    // but sibling domains that merely end with the text do not
    expect(matcher.cosmeticSelectorsFor('fakenews.example')).not.toContain('.promo');
  });

  it('excluded domains drop the selector', () => {
    expect(matcher.cosmeticSelectorsFor('media.example')).not.toContain('.sticky');
    expect(matcher.cosmeticSelectorsFor('sub.media.example')).not.toContain('.sticky');
  });
});
