/** Idempotent verdict submission.
 *
 * The idempotency key is the triplet_id: a double-click shares the
 * in-flight request, a completed submission replays from cache without
 * touching the network, and a network failure parks the verdict in a
 * retry queue holding at most one pending request per triplet. The server
 * therefore sees at most one verdict per id from this client, no matter
 * how the buttons are mashed.
 */

import { ApiNetworkError } from "./api.js";
import type { ReviewApiClient } from "./api.js";
import type { VerdictRequest, VerdictResult } from "./types.js";

export type SubmitOutcome =
    | { status: "applied"; result: VerdictResult }
    | { status: "queued-retry" };

export class SubmitGate {
    private readonly inFlight = new Map<string, Promise<SubmitOutcome>>();
    private readonly applied = new Map<string, VerdictResult>();
    private readonly retryQueue = new Map<string, VerdictRequest>();

    constructor(private readonly client: ReviewApiClient) {}

    submit(tripletId: string, request: VerdictRequest): Promise<SubmitOutcome> {
        const done = this.applied.get(tripletId);
        if (done) {
            return Promise.resolve({ status: "applied", result: done });
        }
        const pending = this.inFlight.get(tripletId);
        if (pending) {
            return pending;
        }
        const attempt = this.send(tripletId, request).finally(() => {
            this.inFlight.delete(tripletId);
        });
        this.inFlight.set(tripletId, attempt);
        return attempt;
    }

    /** Replay every parked verdict; failures stay parked for the next try. */
    async retryPending(): Promise<SubmitOutcome[]> {
        const parked = [...this.retryQueue.entries()];
        const outcomes: SubmitOutcome[] = [];
        for (const [tripletId, request] of parked) {
            outcomes.push(await this.submit(tripletId, request));
        }
        return outcomes;
    }

    pendingRetries(): string[] {
        return [...this.retryQueue.keys()];
    }

    private async send(
        tripletId: string,
        request: VerdictRequest,
    ): Promise<SubmitOutcome> {
        try {
            const result = await this.client.submitVerdict(tripletId, request);
            this.applied.set(tripletId, result);
            this.retryQueue.delete(tripletId);
            return { status: "applied", result };
        } catch (error) {
            if (error instanceof ApiNetworkError) {
                this.retryQueue.set(tripletId, request);
                return { status: "queued-retry" };
            }
            throw error;
        }
    }
}
