import { ChildProcess, spawn } from 'node:child_process';
import { mkdtempSync, readFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join, dirname } from 'node:path';
import { fileURLToPath } from 'node:url';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api';
import { AppCallbacks, AppController } from '../src/app';
import { QueryPayload, SessionInfo } from '../src/types';

const here = dirname(fileURLToPath(import.meta.url));
const PORT = 18300 + (process.pid % 1000);
const BASE = `http://127.0.0.1:${PORT}`;
const TRAJECTORY_LENGTH = 8;

let service: ChildProcess;
let logPath: string;

async function waitForService(): Promise<void> {
    for (let i = 0; i < 150; i++) {
        try {
            const resp = await fetch(`${BASE}/api/session`);
            if (resp.ok) return;
        } catch {
            // not up yet
        }
        await new Promise((r) => setTimeout(r, 100));
    }
    throw new Error('service never became reachable');
}

beforeAll(async () => {
    logPath = join(mkdtempSync(join(tmpdir(), 'elicit-')), 'labels.jsonl');
    service = spawn(
        'python3',
        [join(here, 'serve_fixture.py'), '--port', String(PORT), '--log', logPath, '--length', String(TRAJECTORY_LENGTH)],
        { stdio: 'ignore' },
    );
    await waitForService();
}, 30_000);

afterAll(() => {
    service.kill();
});

describe('labeling round trip against the real service', () => {
    it('submits left, logs exactly one correct record, and loads the next query', async () => {
        const queries: (QueryPayload | null)[] = [];
        const progress: SessionInfo[] = [];
        const callbacks: AppCallbacks = {
            onQuery: (q) => queries.push(q),
            onProgress: (info) => progress.push(info),
            onNotice: () => undefined,
            onRetryNeeded: () => undefined,
        };
        const app = new AppController(new ApiClient(BASE), callbacks);
        await app.start();

        const first = app.current;
        expect(first).not.toBeNull();
        expect(first!.left.steps).toHaveLength(TRAJECTORY_LENGTH);
        expect(first!.right.steps).toHaveLength(TRAJECTORY_LENGTH);

        await app.choose('left');

        // exactly one record, whose winner is the left trajectory of query 0
        const lines = readFileSync(logPath, 'utf-8').trim().split('\n');
        expect(lines).toHaveLength(1);
        const entry = JSON.parse(lines[0]);
        expect(entry.query_id).toBe(first!.query_id);
        expect(entry.choice).toBe('left');
        expect(entry.left).toBe(first!.left.id);

        // the next query is on screen and differs from the first
        expect(app.phase).toBe('labeling');
        expect(app.current!.query_id).toBe(first!.query_id + 1);
        const latest = progress.at(-1)!;
        expect(latest.answered).toBe(1);
    }, 30_000);
});
