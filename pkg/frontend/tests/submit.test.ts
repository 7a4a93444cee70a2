import { describe, expect, it } from "vitest";

import { ApiConflictError, ReviewApiClient } from "../src/api.js";
import { SubmitGate } from "../src/submit.js";
import type { VerdictRequest } from "../src/types.js";
import { FixtureReviewServer } from "./fixtureApi.js";

const REQUEST: VerdictRequest = {
    decision: "Accepted",
    rubric: { physiological_accuracy: 4, coaching_relevance: 5, source_fidelity: 3 },
    reviewer_id: "rev-a",
};

function makeGate(server: FixtureReviewServer): SubmitGate {
    return new SubmitGate(
        new ReviewApiClient({
            baseUrl: "http://fixture.test",
            fetchImpl: server.fetchStub(),
        }),
    );
}

describe("SubmitGate idempotency", () => {
    it("a double-click shares one in-flight request", async () => {
        const server = new FixtureReviewServer({ pending: 2, accepted: 0 });
        const gate = makeGate(server);
        const [first, second] = await Promise.all([
            gate.submit("tri-fix-0000", REQUEST),
            gate.submit("tri-fix-0000", REQUEST),
        ]);
        expect(first.status).toBe("applied");
        expect(second.status).toBe("applied");
        expect(server.auditLog).toHaveLength(1);
        const posts = server.requestLog.filter((r) => r.method === "POST");
        expect(posts).toHaveLength(1);
    });

    it("a repeat submit after success replays the cached result offline", async () => {
        const server = new FixtureReviewServer({ pending: 1, accepted: 0 });
        const gate = makeGate(server);
        const first = await gate.submit("tri-fix-0000", REQUEST);
        const postsBefore = server.requestLog.filter((r) => r.method === "POST").length;
        const again = await gate.submit("tri-fix-0000", REQUEST);
        expect(again).toEqual(first);
        const postsAfter = server.requestLog.filter((r) => r.method === "POST").length;
        expect(postsAfter).toBe(postsBefore);
        expect(server.auditLog).toHaveLength(1);
    });

    it("a network failure parks the verdict; retry lands it exactly once", async () => {
        const server = new FixtureReviewServer({ pending: 1, accepted: 0 });
        const gate = makeGate(server);
        server.failNextRequests(1);
        const parked = await gate.submit("tri-fix-0000", REQUEST);
        expect(parked.status).toBe("queued-retry");
        expect(gate.pendingRetries()).toEqual(["tri-fix-0000"]);
        expect(server.auditLog).toHaveLength(0);

        const outcomes = await gate.retryPending();
        expect(outcomes).toHaveLength(1);
        expect(outcomes[0]?.status).toBe("applied");
        expect(gate.pendingRetries()).toEqual([]);
        expect(server.auditLog).toHaveLength(1);
        expect(server.statusOf("tri-fix-0000")).toBe("HITLAccepted");
    });

    it("repeated failures keep exactly one parked request per triplet", async () => {
        const server = new FixtureReviewServer({ pending: 1, accepted: 0 });
        const gate = makeGate(server);
        server.failNextRequests(2);
        await gate.submit("tri-fix-0000", REQUEST);
        await gate.retryPending();
        expect(gate.pendingRetries()).toEqual(["tri-fix-0000"]);
        await gate.retryPending();
        expect(server.auditLog).toHaveLength(1);
    });

    it("conflicts pass through untouched and are not retried", async () => {
        const server = new FixtureReviewServer({ pending: 1, accepted: 0 });
        server.verdict("tri-fix-0000", {
            decision: "Accepted",
            rubric: REQUEST.rubric,
            reviewer_id: "someone-else",
        });
        const gate = makeGate(server);
        await expect(gate.submit("tri-fix-0000", REQUEST)).rejects.toBeInstanceOf(
            ApiConflictError,
        );
        expect(gate.pendingRetries()).toEqual([]);
        expect(server.auditLog).toHaveLength(1);
        expect(server.auditLog[0]?.reviewer_id).toBe("someone-else");
    });
});
