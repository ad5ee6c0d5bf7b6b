import { describe, expect, it } from 'vitest';
import {
  SuffixRules,
  embeddedSuffixRules,
  hostnameOf,
  registrableDomainOfHost,
} from '../src/suffixes';

describe('hostnameOf', () => {
  it('strips scheme, path, query, fragment, userinfo, port', () => {
    expect(hostnameOf('https://user:pw@x.example:8443/p?q#f')).toBe('x.example');
  });
  it('unwraps ipv6 literals', () => {
    expect(hostnameOf('https://[2001:db8::1]:443/x')).toBe('2001:db8::1');
  });
  it('lowercases and drops trailing dots', () => {
    expect(hostnameOf('https://Host.Example./path')).toBe('host.example');
  });
  it('throws on relative urls', () => {
    expect(() => hostnameOf('/just/a/path')).toThrow(/absolute/);
  });
});

describe('registrable domain against the embedded snapshot', () => {
  const rules = embeddedSuffixRules();
  const rd = (host: string) => registrableDomainOfHost(host, rules);

  // expectations cross-checked against the server's resolver, value for
  // value, so both sides agree on every first-party decision
  const CASES: [string, string | null][] = [
    ['www.github.io', 'www.github.io'],
    ['github.io', null],
    ['foo.co.uk', 'foo.co.uk'],
    ['sub.foo.co.uk', 'foo.co.uk'],
    ['uk', null],
    ['b.kawasaki.jp', null], // *.kawasaki.jp swallows the whole host
    ['a.b.kawasaki.jp', 'a.b.kawasaki.jp'],
    ['city.kawasaki.jp', 'city.kawasaki.jp'], // ! exception shortens the suffix
    ['sub.city.kawasaki.jp', 'city.kawasaki.jp'],
    ['cdn.adnet.example', 'adnet.example'], // unlisted TLD: implicit single-label rule
    ['example', 'example'],
    ['localhost', 'localhost'],
    ['192.168.0.1', '192.168.0.1'],
    ['300.1.1.1', '1.1'], // not a valid IPv4, so treated as a name
    ['www.news-hub.example', 'news-hub.example'],
    ['s3.amazonaws.com', null],
    ['bucket.s3.amazonaws.com', 'bucket.s3.amazonaws.com'],
  ];
  for (const [host, expected] of CASES) {
    it(`${host} -> ${expected ?? 'none'}`, () => {
      expect(rd(host)).toBe(expected);
    });
  }

  it('ipv6 literals pass through verbatim', () => {
    expect(rd(hostnameOf('http://[::1]/x'))).toBe('::1');
  });
});

describe('suffix rule grammar', () => {
  it('ignores comments and blank lines', () => {
    const rules = new SuffixRules('// top\n\ncom\nco.uk\n');
    expect(registrableDomainOfHost('a.b.co.uk', rules)).toBe('b.co.uk');
    expect(registrableDomainOfHost('a.com', rules)).toBe('a.com');
  });
  it('falls back to one label for unknown TLDs', () => {
    const rules = new SuffixRules('com');
    expect(registrableDomainOfHost('x.y.zz', rules)).toBe('y.zz');
  });
});
