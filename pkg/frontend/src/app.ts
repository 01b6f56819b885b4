import { ApiClient, ApiError, NetworkError } from './api';
import { Choice, Maze, QueryPayload, SessionInfo } from './types';

export type AppPhase = 'loading' | 'labeling' | 'done' | 'error';

export interface AppCallbacks {
    /** New query loaded (null when the queue is drained). */
    onQuery(query: QueryPayload | null): void;
    onProgress(info: SessionInfo): void;
    /** Non-blocking notice, e.g. a duplicate-label 409. */
    onNotice(message: string): void;
    /** Server unreachable; call retry() to resubmit without losing state. */
    onRetryNeeded(message: string): void;
}

/** Labeling flow controller: one query on screen, one request in flight.
 *
 * Every POST corresponds to exactly one explicit user choice; the controller
 * never fabricates or repeats labels on its own.
 */
export class AppController {
    phase: AppPhase = 'loading';
    maze: Maze | null = null;
    current: QueryPayload | null = null;
    labeled = 0;
    private inFlight = false;
    private pendingChoice: Choice | null = null;

    constructor(private api: ApiClient, private callbacks: AppCallbacks) {}

    async start(): Promise<void> {
        const info = await this.api.session();
        this.maze = info.maze;
        this.callbacks.onProgress(info);
        await this.loadNext();
    }

    async loadNext(): Promise<void> {
        const query = await this.api.nextQuery();
        this.current = query;
        this.phase = query === null ? 'done' : 'labeling';
        this.callbacks.onQuery(query);
        this.callbacks.onProgress(await this.api.session());
    }

    /** Submit the user's choice for the on-screen query, then advance. */
    async choose(choice: Choice): Promise<void> {
        if (this.phase !== 'labeling' || this.current === null || this.inFlight) return;
        this.inFlight = true;
        this.pendingChoice = choice;
        try {
            await this.api.postLabel(this.current.query_id, choice);
            this.labeled += 1;
            this.pendingChoice = null;
            await this.loadNext();
        } catch (err) {
            if (err instanceof ApiError && err.status === 409) {
                // someone already answered this query; move on quietly
                this.callbacks.onNotice(`query ${this.current.query_id} was already labeled`);
                this.pendingChoice = null;
                await this.loadNext();
            } else if (err instanceof NetworkError) {
                this.phase = 'error';
                this.callbacks.onRetryNeeded('server unreachable, choice kept for retry');
            } else {
                throw err;
            }
        } finally {
            this.inFlight = false;
        }
    }

    /** Resubmit the choice kept from a failed attempt. */
    async retry(): Promise<void> {
        if (this.phase !== 'error' || this.pendingChoice === null) return;
        this.phase = 'labeling';
        const choice = this.pendingChoice;
        this.pendingChoice = null;
        await this.choose(choice);
    }
}
