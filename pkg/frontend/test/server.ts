/**
 * Boots the real coordination server (the Python package this frontend
 * talks to) on a local port for the acceptance suite. Short two-day
 * phases and --sim keep a full study under a minute of wall time.
 */
import { ChildProcess, spawn } from 'node:child_process';
import { mkdtempSync, writeFileSync } from 'node:fs';
import { createServer } from 'node:net';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

export const AUDITOR_TOKEN = 'auditor-dev-token';

const CONFIG = [
  'observational_days = 2',
  'intervention_days = 2',
  'min_ads_gate = 4',
  'reminder_day = 1',
  'rng_seed = 12',
  '',
].join('\n');

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.once('error', reject);
    probe.listen(0, '127.0.0.1', () => {
      const addr = probe.address();
      if (addr === null || typeof addr === 'string') {
        reject(new Error('no port assigned'));
        return;
      }
      probe.close(() => resolve(addr.port));
    });
  });
}

export interface TestServer {
  base: string;
  stop: () => Promise<void>;
}

export async function startServer(): Promise<TestServer> {
  const dir = mkdtempSync(join(tmpdir(), 'adswap-acceptance-'));
  const cfg = join(dir, 'study.cfg');
  writeFileSync(cfg, CONFIG);
  const port = await freePort();
  const child: ChildProcess = spawn(
    'python3',
    ['-m', 'adswap.cli', 'serve', '--sim', '--host', '127.0.0.1', '--port', String(port), '--config', cfg],
    { stdio: ['ignore', 'pipe', 'pipe'] },
  );
  let logs = '';
  child.stdout?.on('data', (d) => (logs += d));
  child.stderr?.on('data', (d) => (logs += d));

  const base = `http://127.0.0.1:${port}`;
  const deadline = Date.now() + 30_000;
  for (;;) {
    if (child.exitCode !== null) throw new Error(`server exited at startup:\n${logs}`);
    try {
      const res = await fetch(`${base}/v1/ruleset`);
      if (res.ok) break;
    } catch {
      // not listening yet
    }
    if (Date.now() > deadline) {
      child.kill('SIGKILL');
      throw new Error(`server never came up on ${base}:\n${logs}`);
    }
    await new Promise((r) => setTimeout(r, 150));
  }

  return {
    base,
    stop: () =>
      new Promise<void>((resolve) => {
        if (child.exitCode !== null) {
          resolve();
          return;
        }
        child.once('exit', () => resolve());
        child.kill('SIGTERM');
        setTimeout(() => {
          if (child.exitCode === null) child.kill('SIGKILL');
        }, 2_000).unref();
      }),
  };
}
