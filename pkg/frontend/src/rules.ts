/**
 * Client-side matcher over the compiled ruleset document served at
 * GET /v1/ruleset. The document carries raw rule lines; this module
 * re-derives matching behavior from the published grammar:
 *
 *   `@@` prefixes an exception. `##` splits a cosmetic rule into a
 *   domain scope and a selector. Network patterns support `||`
 *   (host-label anchor), leading/trailing `|` (address anchors), `*`
 *   (any run), `^` (separator: any char outside [a-z0-9_.%-], or end
 *   of address). Options after `$`: third-party, image, script, each
 *   negatable with `~`. Matching lowercases both pattern and URL.
 *
 * Unparseable lines are skipped with a warning, mirroring the server's
 * parser, so a document from a newer server version degrades instead
 * of breaking the extension. Lookups run off a token index: each rule
 * files under its longest literal run that must survive into any
 * matching URL, so one match call touches few rules.
 */
import type { RulesetDoc } from './wire';
import { SuffixRules, embeddedSuffixRules, hostnameOf, registrableDomainOfHost } from './suffixes';

const SEPARATOR = '(?:[^a-z0-9_.%-]|$)';
const HOST_ANCHOR = '^[a-z][a-z0-9+.-]*://(?:[^/?#]*\\.)?';
const KNOWN_OPTIONS = new Set(['third-party', 'image', 'script']);
const TOKEN_RE = /[a-z0-9%]{2,}/g;
const SCHEME_RE = /^[a-z][a-z0-9+.-]*:\/\//;

export type ResourceType = 'image' | 'script' | 'other';

export interface Decision {
  outcome: 'blocked_by' | 'exempted_by' | 'no_match';
  rule?: string; // raw text of the winning rule
}

export interface RuleWarning {
  line: string;
  reason: string;
}

interface NetRule {
  raw: string;
  thirdParty: boolean | null;
  typeInclude: Set<ResourceType>;
  typeExclude: Set<ResourceType>;
  regex: RegExp;
  token: string | null;
}

interface CosmeticRule {
  selector: string;
  include: string[];
  exclude: string[];
}

const escapeRe = (ch: string) => ch.replace(/[.*+?^${}()|[\]\\/]/g, '\\$&');

function translatePattern(pattern: string): { regex: RegExp; token: string | null } {
  let body = pattern;
  let hostAnchor = false;
  let startAnchor = false;
  let endAnchor = false;
  if (body.startsWith('||')) {
    hostAnchor = true;
    body = body.slice(2);
  } else if (body.startsWith('|')) {
    startAnchor = true;
    body = body.slice(1);
  }
  if (body.endsWith('|')) {
    endAnchor = true;
    body = body.slice(0, -1);
  }

  let source = hostAnchor ? HOST_ANCHOR : startAnchor ? '^' : '';
  for (const ch of body) {
    if (ch === '*') source += '.*';
    else if (ch === '^') source += SEPARATOR;
    else source += escapeRe(ch);
  }
  if (endAnchor) source += '$';

  // Index token: a maximal [a-z0-9%] run whose pattern neighbours force
  // it to appear as a maximal run in the URL too. A `*` on either side
  // (or an unanchored edge) leaves the boundary open.
  let token: string | null = null;
  for (const m of body.matchAll(TOKEN_RE)) {
    const i = m.index;
    const j = i + m[0].length;
    const leftOk = i === 0 ? hostAnchor || startAnchor : body[i - 1] !== '*';
    const rightOk = j === body.length ? endAnchor : body[j] !== '*';
    if (leftOk && rightOk && (token === null || m[0].length > token.length)) token = m[0];
  }
  return { regex: new RegExp(source), token };
}

function parseOptions(opts: string): {
  thirdParty: boolean | null;
  include: Set<ResourceType>;
  exclude: Set<ResourceType>;
  unknown: string | null;
} {
  let thirdParty: boolean | null = null;
  const include = new Set<ResourceType>();
  const exclude = new Set<ResourceType>();
  for (const piece of opts.split(',')) {
    let name = piece.trim();
    const negated = name.startsWith('~');
    if (negated) name = name.slice(1);
    if (!KNOWN_OPTIONS.has(name)) {
      return { thirdParty: null, include, exclude, unknown: piece.trim() || '(empty)' };
    }
    if (name === 'third-party') thirdParty = !negated;
    else if (negated) exclude.add(name as ResourceType);
    else include.add(name as ResourceType);
  }
  return { thirdParty, include, exclude, unknown: null };
}

function parseNetRule(raw: string, warnings: RuleWarning[]): NetRule | null {
  let body = raw.startsWith('@@') ? raw.slice(2) : raw;
  if (body.length > 1 && body.startsWith('/') && body.endsWith('/')) {
    warnings.push({ line: raw, reason: 'regex-literal rules unsupported' });
    return null;
  }
  let thirdParty: boolean | null = null;
  let include = new Set<ResourceType>();
  let exclude = new Set<ResourceType>();
  const dollar = body.lastIndexOf('$');
  if (dollar >= 0) {
    const parsed = parseOptions(body.slice(dollar + 1));
    if (parsed.unknown !== null) {
      warnings.push({ line: raw, reason: `unknown option '${parsed.unknown}'` });
      return null;
    }
    thirdParty = parsed.thirdParty;
    include = parsed.include;
    exclude = parsed.exclude;
    body = body.slice(0, dollar);
  }
  if (!body) {
    warnings.push({ line: raw, reason: 'empty pattern' });
    return null;
  }
  const { regex, token } = translatePattern(body.toLowerCase());
  return { raw, thirdParty, typeInclude: include, typeExclude: exclude, regex, token };
}

class TokenIndex {
  private buckets = new Map<string, NetRule[]>();
  private always: NetRule[] = [];

  constructor(rules: NetRule[]) {
    for (const rule of rules) {
      if (rule.token === null) {
        this.always.push(rule);
      } else {
        const bucket = this.buckets.get(rule.token);
        if (bucket) bucket.push(rule);
        else this.buckets.set(rule.token, [rule]);
      }
    }
  }

  candidates(urlTokens: string[]): NetRule[] {
    const hit: NetRule[] = [];
    for (const tok of urlTokens) {
      const found = this.buckets.get(tok);
      if (found) hit.push(...found);
    }
    return hit.length ? hit.concat(this.always) : this.always;
  }
}

export class Matcher {
  readonly version: number;
  readonly digest: string;
  readonly warnings: RuleWarning[] = [];
  private blocks: TokenIndex;
  private exceptions: TokenIndex;
  private cosmetic: CosmeticRule[] = [];
  private suffixes: SuffixRules;

  constructor(doc: RulesetDoc, suffixes?: SuffixRules) {
    this.version = doc.version;
    this.digest = doc.digest;
    this.suffixes = suffixes ?? embeddedSuffixRules();
    const blocks: NetRule[] = [];
    const exceptions: NetRule[] = [];
    for (const raw of doc.network) {
      const rule = parseNetRule(raw, this.warnings);
      if (rule) blocks.push(rule);
    }
    for (const raw of doc.exceptions) {
      const rule = parseNetRule(raw, this.warnings);
      if (rule) exceptions.push(rule);
    }
    this.blocks = new TokenIndex(blocks);
    this.exceptions = new TokenIndex(exceptions);
    for (const raw of doc.cosmetic) {
      const split = raw.indexOf('##');
      if (split < 0) continue; // cannot happen in a well-formed doc
      const selector = raw.slice(split + 2);
      const include: string[] = [];
      const exclude: string[] = [];
      for (const part of raw.slice(0, split).split(',')) {
        const dom = part.trim().toLowerCase();
        if (!dom) continue;
        if (dom.startsWith('~')) exclude.push(dom.slice(1));
        else include.push(dom);
      }
      this.cosmetic.push({ selector, include, exclude });
    }
  }

  private isThirdParty(requestUrl: string, pageUrl: string): boolean {
    let req: string | null;
    let page: string | null;
    try {
      req = registrableDomainOfHost(hostnameOf(requestUrl), this.suffixes);
      page = registrableDomainOfHost(hostnameOf(pageUrl), this.suffixes);
    } catch {
      return true;
    }
    if (req === null || page === null) return true; // unknown relationship: cross-site
    return req !== page;
  }

  matchNetwork(requestUrl: string, pageUrl: string, resourceType: ResourceType = 'other'): Decision {
    const url = requestUrl.toLowerCase();
    if (!SCHEME_RE.test(url)) throw new Error(`not an absolute URL: ${requestUrl}`);
    const tokens = url.match(TOKEN_RE) ?? [];
    let third: boolean | undefined;
    const thirdParty = () => {
      if (third === undefined) third = this.isThirdParty(url, pageUrl.toLowerCase());
      return third;
    };

    const applies = (rule: NetRule): boolean => {
      if (rule.typeInclude.size && !rule.typeInclude.has(resourceType)) return false;
      if (rule.typeExclude.has(resourceType)) return false;
      if (rule.thirdParty !== null && rule.thirdParty !== thirdParty()) return false;
      return rule.regex.test(url);
    };

    let blocked: NetRule | null = null;
    for (const rule of this.blocks.candidates(tokens)) {
      if (applies(rule)) {
        blocked = rule;
        break;
      }
    }
    if (!blocked) return { outcome: 'no_match' };
    for (const rule of this.exceptions.candidates(tokens)) {
      if (applies(rule)) return { outcome: 'exempted_by', rule: rule.raw };
    }
    return { outcome: 'blocked_by', rule: blocked.raw };
  }

  /** Selectors applicable to a page host; subdomains inherit scopes. */
  cosmeticSelectorsFor(pageHostname: string): string[] {
    const host = pageHostname.toLowerCase();
    const inScope = (domain: string) => host === domain || host.endsWith('.' + domain);
    const out: string[] = [];
    const seen = new Set<string>();
    for (const rule of this.cosmetic) {
      if (rule.exclude.some(inScope)) continue;
      if (rule.include.length && !rule.include.some(inScope)) continue;
      if (!seen.has(rule.selector)) {
        seen.add(rule.selector);
        out.push(rule.selector);
      }
    }
    return out;
  }
}
