import { readFileSync } from 'node:fs';
import type { RulesetDoc } from '../src/wire';

export const fixture = (name: string): string =>
  readFileSync(new URL(`../fixtures/${name}`, import.meta.url), 'utf8');

/**
 * Split filter-list text into the document shape GET /v1/ruleset serves.
 * Only valid for lists with no skippable lines (true of the fixtures
 * here); the acceptance suite verifies the live server agrees.
 */
export function docFromList(text: string, version = 1): RulesetDoc {
  const network: string[] = [];
  const exceptions: string[] = [];
  const cosmetic: string[] = [];
  for (const raw of text.split('\n')) {
    const line = raw.trim();
    if (!line || line[0] === '!' || line[0] === '[') continue;
    if (line.includes('##')) cosmetic.push(line);
    else if (line.startsWith('@@')) exceptions.push(line);
    else network.push(line);
  }
  return { version, digest: 'local', network, exceptions, cosmetic };
}
