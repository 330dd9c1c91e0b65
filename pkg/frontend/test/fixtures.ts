/**
 * Fixture loader. Every JSON file under fixtures/ is a recorded response
 * from a real service instance (see scripts/record_fixtures.py), so these
 * tests exercise the console against genuine wire payloads.
 *
 * Paths resolve from the project root (vitest runs with cwd = frontend/),
 * which stays correct in both the node and jsdom environments.
 */

import { readFileSync } from 'node:fs';
import { join } from 'node:path';

export function fixture<T>(name: string): T {
  const path = join(process.cwd(), 'test', 'fixtures', `${name}.json`);
  return JSON.parse(readFileSync(path, 'utf8')) as T;
}
