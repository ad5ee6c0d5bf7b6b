/**
 * Registrable-domain (eTLD+1) extraction for the first-party vs
 * third-party test in network rule matching.
 *
 * Rule file grammar matches the server's pin: one suffix per line,
 * `//` comments, `*` matches exactly one label, `!` marks exceptions.
 * The snapshot below is a copy of the server's; keep them in lockstep
 * so both sides agree on what counts as cross-site.
 */

export class SuffixRules {
  // reversed label tuple joined with '.' (TLD first) -> isException
  private rules = new Map<string, boolean>();
  private maxLabels = 1;

  constructor(text: string) {
    for (const raw of text.split('\n')) {
      const line = raw.trim();
      if (!line || line.startsWith('//')) continue;
      const exception = line.startsWith('!');
      const labels = (exception ? line.slice(1) : line).toLowerCase().split('.').reverse();
      this.rules.set(labels.join('.'), exception);
      if (labels.length > this.maxLabels) this.maxLabels = labels.length;
    }
  }

  /**
   * Number of labels in the public suffix of a reversed label list.
   * Exceptions win and shorten by one; otherwise longest match; with no
   * match the top label is the suffix (implicit `*` rule).
   */
  suffixLength(labelsRev: string[]): number {
    let best = 1;
    const limit = Math.min(labelsRev.length, this.maxLabels);
    for (let n = 1; n <= limit; n++) {
      const candidate = labelsRev.slice(0, n);
      const exact = this.rules.get(candidate.join('.'));
      if (exact !== undefined) {
        if (exact) return n - 1;
        if (n > best) best = n;
      }
      if (n >= 2) {
        const wild = candidate.slice(0, -1).concat('*').join('.');
        if (this.rules.get(wild) === false && n > best) best = n;
      }
    }
    return best;
  }

  isListedSuffix(label: string): boolean {
    return this.rules.get(label) === false;
  }
}

/** Hostname out of an absolute URL; no DNS, no IDNA. Throws if relative. */
export function hostnameOf(url: string): string {
  const idx = url.indexOf('://');
  if (idx < 0) throw new Error(`not an absolute URL: ${url}`);
  let rest = url.slice(idx + 3);
  for (const stop of ['/', '?', '#']) {
    const cut = rest.indexOf(stop);
    if (cut >= 0) rest = rest.slice(0, cut);
  }
  const at = rest.lastIndexOf('@');
  if (at >= 0) rest = rest.slice(at + 1);
  if (rest.startsWith('[')) {
    const end = rest.indexOf(']');
    if (end < 0) throw new Error(`unterminated IPv6 literal in ${url}`);
    return rest.slice(1, end).toLowerCase();
  }
  const colon = rest.indexOf(':');
  if (colon >= 0) rest = rest.slice(0, colon);
  if (!rest) throw new Error(`URL has no hostname: ${url}`);
  return rest.toLowerCase().replace(/\.+$/, '');
}

const IPV4 = /^(\d{1,3})\.(\d{1,3})\.(\d{1,3})\.(\d{1,3})$/;

function isIp(host: string): boolean {
  const m = IPV4.exec(host);
  if (m) return m.slice(1).every((part) => Number(part) <= 255);
  return host.includes(':'); // bracket-stripped IPv6 literal
}

/**
 * eTLD+1 of a hostname, or null when none exists (bare public suffix).
 * IP literals and unlisted single labels pass through verbatim.
 */
export function registrableDomainOfHost(host: string, rules: SuffixRules): string | null {
  if (isIp(host)) return host;
  const labels = host.split('.');
  if (labels.length === 1) {
    return rules.isListedSuffix(host) ? null : host;
  }
  const suffixLen = rules.suffixLength([...labels].reverse());
  if (suffixLen >= labels.length) return null;
  return labels.slice(labels.length - suffixLen - 1).join('.');
}

export function registrableDomain(url: string, rules: SuffixRules): string | null {
  return registrableDomainOfHost(hostnameOf(url), rules);
}

// Copy of the server's pinned snapshot (curated public-suffix subset).
export const SUFFIX_SNAPSHOT = `
com
org
net
edu
gov
mil
int
info
biz
io
co
ai
app
dev
me
tv
cc
ly
gg
to
xyz
online
site
us
de
fr
it
nl
es
ch
se
no
fi
pl
eu
ru
cn
com.cn
net.cn
org.cn
in
co.in
net.in
org.in
br
com.br
net.br
org.br
ca
mx
com.mx
uk
co.uk
org.uk
net.uk
ac.uk
gov.uk
jp
ac.jp
co.jp
ne.jp
or.jp
*.kawasaki.jp
!city.kawasaki.jp
au
com.au
net.au
org.au
nz
co.nz
net.nz
org.nz
kr
co.kr
*.ck
!www.ck
blogspot.com
github.io
gitlab.io
herokuapp.com
cloudfront.net
amazonaws.com
s3.amazonaws.com
azurewebsites.net
netlify.app
vercel.app
web.app
firebaseapp.com
`;

let embedded: SuffixRules | undefined;

export function embeddedSuffixRules(): SuffixRules {
  if (!embedded) embedded = new SuffixRules(SUFFIX_SNAPSHOT);
  return embedded;
}
