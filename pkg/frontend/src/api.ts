import { Choice, QueryPayload, SessionInfo } from './types';

export class ApiError extends Error {
    constructor(message: string, readonly status: number) {
        super(message);
    }
}

/** Thrown when the server cannot be reached at all (retryable). */
export class NetworkError extends Error {}

type FetchLike = typeof fetch;

export class ApiClient {
    private fetchImpl: FetchLike;

    constructor(readonly baseUrl: string = '', fetchImpl?: FetchLike) {
        this.fetchImpl = fetchImpl ?? fetch.bind(globalThis);
    }

    private async request(path: string, init?: RequestInit): Promise<Response> {
        let resp: Response;
        try {
            resp = await this.fetchImpl(this.baseUrl + path, init);
        } catch (err) {
            throw new NetworkError(`cannot reach server: ${err}`);
        }
        return resp;
    }

    async session(): Promise<SessionInfo> {
        const resp = await this.request('/api/session');
        if (!resp.ok) throw new ApiError('session fetch failed', resp.status);
        return (await resp.json()) as SessionInfo;
    }

    /** Oldest pending query, or null once the queue is drained. */
    async nextQuery(): Promise<QueryPayload | null> {
        const resp = await this.request('/api/query/next');
        if (resp.status === 204) return null;
        if (!resp.ok) throw new ApiError('query fetch failed', resp.status);
        return (await resp.json()) as QueryPayload;
    }

    async postLabel(queryId: number, choice: Choice): Promise<boolean> {
        const resp = await this.request('/api/label', {
            method: 'POST',
            headers: { 'Content-Type': 'application/json' },
            body: JSON.stringify({ query_id: queryId, choice }),
        });
        if (resp.status === 409) throw new ApiError('already labeled', 409);
        if (!resp.ok) throw new ApiError(`label rejected (${resp.status})`, resp.status);
        const body = (await resp.json()) as { recorded: boolean };
        return body.recorded;
    }
}
