/** Typed client for the review service.
 *
 * The base URL comes from runtime config, never from the build. Every
 * non-network failure is mapped to a typed error carrying the server's
 * detail so the UI can render it without parsing bodies itself.
 */

import type {
    Progress,
    QueuePage,
    ReviewItemDetail,
    VerdictRequest,
    VerdictResult,
    WinningVerdict,
} from "./types.js";

export class ApiNetworkError extends Error {
    constructor(message: string) {
        super(message);
        this.name = "ApiNetworkError";
    }
}

export class ApiValidationError extends Error {
    constructor(public readonly detail: string) {
        super(detail);
        this.name = "ApiValidationError";
    }
}

export class ApiNotFoundError extends Error {
    constructor(public readonly tripletId: string) {
        super(`unknown triplet ${tripletId}`);
        this.name = "ApiNotFoundError";
    }
}

export class ApiConflictError extends Error {
    constructor(public readonly winningVerdict: WinningVerdict) {
        super("verdict already recorded");
        this.name = "ApiConflictError";
    }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface ClientConfig {
    baseUrl: string;
    token?: string;
    fetchImpl?: FetchLike;
}

export class ReviewApiClient {
    private readonly baseUrl: string;
    private readonly token?: string;
    private readonly fetchImpl: FetchLike;

    constructor(config: ClientConfig) {
        this.baseUrl = config.baseUrl.replace(/\/+$/, "");
        this.token = config.token;
        this.fetchImpl = config.fetchImpl ?? ((url, init) => fetch(url, init));
    }

    async fetchQueue(page: number, pageSize: number): Promise<QueuePage> {
        const url = `${this.baseUrl}/review/queue?page=${page}&page_size=${pageSize}`;
        const response = await this.request(url, { method: "GET" });
        return (await this.parse(response)) as QueuePage;
    }

    async fetchItem(tripletId: string): Promise<ReviewItemDetail> {
        const url = `${this.baseUrl}/review/item/${encodeURIComponent(tripletId)}`;
        const response = await this.request(url, { method: "GET" });
        const body = (await this.parse(response, tripletId)) as {
            item: ReviewItemDetail;
        };
        return body.item;
    }

    async submitVerdict(
        tripletId: string,
        verdict: VerdictRequest,
    ): Promise<VerdictResult> {
        const url = `${this.baseUrl}/review/item/${encodeURIComponent(tripletId)}/verdict`;
        const response = await this.request(url, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(verdict),
        });
        return (await this.parse(response, tripletId)) as VerdictResult;
    }

    async fetchProgress(): Promise<Progress> {
        const response = await this.request(`${this.baseUrl}/review/progress`, {
            method: "GET",
        });
        return (await this.parse(response)) as Progress;
    }

    private async request(url: string, init: RequestInit): Promise<Response> {
        if (this.token) {
            init.headers = {
                ...(init.headers ?? {}),
                Authorization: `Bearer ${this.token}`,
            };
        }
        try {
            return await this.fetchImpl(url, init);
        } catch (error) {
            throw new ApiNetworkError(
                error instanceof Error ? error.message : String(error),
            );
        }
    }

    private async parse(response: Response, tripletId = ""): Promise<unknown> {
        const body = (await response.json()) as Record<string, unknown>;
        if (response.status === 404) {
            throw new ApiNotFoundError(tripletId);
        }
        if (response.status === 409) {
            throw new ApiConflictError(body["winning_verdict"] as WinningVerdict);
        }
        if (response.status === 422) {
            throw new ApiValidationError(String(body["detail"] ?? "invalid request"));
        }
        if (!response.ok) {
            throw new ApiNetworkError(`unexpected status ${response.status}`);
        }
        return body;
    }
}
