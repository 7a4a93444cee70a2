/** In-memory review service double for the test suite.
 *
 * Implements the wire contract of the real service: queue pagination over
 * pending plus sampled items, item detail with critic history and
 * grounding flags, verdict validation (422), first-verdict-wins conflicts
 * (409), an append-only audit log, and status transitions. Also fakes the
 * network: requests can be made to fail so retry behavior is testable.
 */

import type { FetchLike } from "../src/api.js";
import type {
    CriticHistory,
    FinalStatus,
    GroundingDetail,
    Progress,
    QueueItemSummary,
    ReviewItemDetail,
    WinningVerdict,
} from "../src/types.js";

const RUBRIC_AXES = [
    "physiological_accuracy",
    "coaching_relevance",
    "source_fidelity",
] as const;

const SCHEMA_VERSION = 1;

interface FixtureRecord {
    detail: ReviewItemDetail;
    sampled: boolean;
}

export interface FixtureOptions {
    pending?: number;
    accepted?: number;
    sampleRate?: number;
}

interface JsonResponse {
    status: number;
    body: Record<string, unknown>;
}

function versioned(body: Record<string, unknown>, status = 200): JsonResponse {
    return { status, body: { schema_version: SCHEMA_VERSION, ...body } };
}

const NUMBER_RE = /-?\d+(?:\.\d+)?/g;

function groundingFor(answer: string, context: string): GroundingDetail {
    const numbers = [...answer.matchAll(NUMBER_RE)].map((match) => ({
        value: match[0],
        grounded: context.includes(match[0]),
    }));
    return { numbers, names: [] };
}

function pendingHistory(): CriticHistory {
    return {
        passed: false,
        violations: [
            { rule_id: "F1", reason: "high-intensity work with fatigue above 7" },
        ],
        iteration_count: 3,
        critic_rejection_reason: "F1: high-intensity work with fatigue above 7",
    };
}

function cleanHistory(): CriticHistory {
    return {
        passed: true,
        violations: [],
        iteration_count: 0,
        critic_rejection_reason: "",
    };
}

function makeRecord(index: number, status: FinalStatus): FixtureRecord {
    const id = `tri-fix-${String(index).padStart(4, "0")}`;
    const context =
        "Aggregate summary: mean split time 32.5 seconds, training load 640 " +
        "arbitrary units across the build block.";
    // the first record cites one value the context never states, so the
    // highlighting path always has an ungrounded reference to render
    const answer =
        index === 0
            ? "Hold 32.5 seconds pace and target 41.7 ml/kg/min next block."
            : "Hold 32.5 seconds pace with load near 640 next block.";
    const detail: ReviewItemDetail = {
        anchor_id: `anc-fix-${index % 7}`,
        triplet_id: id,
        query: `As an Elite Coach, how should athlete ${index} progress this block?`,
        query_type: "Reasoning",
        persona: "EliteCoach",
        complexity_level: "Medium",
        context,
        expected_output: answer,
        anchor_type: "LoadPerformance",
        anchor_variables: ["training_load_au", "split_time_s"],
        stroke_type: "Freestyle",
        training_phase: "Build",
        data_category: "Physiological",
        source_documents: ["athlete_table.csv"],
        final_status: status,
        critic_history: status === "HITLPending" ? pendingHistory() : cleanHistory(),
        grounding: groundingFor(answer, context),
        sampled: false,
    };
    return { detail, sampled: false };
}

export class FixtureReviewServer {
    readonly auditLog: WinningVerdict[] = [];
    readonly requestLog: { method: string; url: string }[] = [];
    lastAuthorization: string | null = null;
    private readonly records = new Map<string, FixtureRecord>();
    private readonly pendingOrder: string[] = [];
    private readonly sampledOrder: string[] = [];
    private failRemaining = 0;

    constructor(options: FixtureOptions = {}) {
        const pending = options.pending ?? 50;
        const accepted = options.accepted ?? 200;
        const sampleRate = options.sampleRate ?? 0.05;
        const sampleCount = Math.round(accepted * sampleRate);
        for (let i = 0; i < pending; i += 1) {
            const record = makeRecord(i, "HITLPending");
            this.records.set(record.detail.triplet_id, record);
            this.pendingOrder.push(record.detail.triplet_id);
        }
        for (let i = 0; i < accepted; i += 1) {
            const record = makeRecord(pending + i, "AutoAccepted");
            record.sampled = i < sampleCount;
            record.detail.sampled = record.sampled;
            this.records.set(record.detail.triplet_id, record);
            if (record.sampled) {
                this.sampledOrder.push(record.detail.triplet_id);
            }
        }
    }

    /** Make the next n requests fail at the network layer. */
    failNextRequests(n: number): void {
        this.failRemaining = n;
    }

    statusOf(tripletId: string): FinalStatus {
        const record = this.records.get(tripletId);
        if (!record) {
            throw new Error(`no fixture record ${tripletId}`);
        }
        return record.detail.final_status;
    }

    expectedOutputOf(tripletId: string): string {
        const record = this.records.get(tripletId);
        if (!record) {
            throw new Error(`no fixture record ${tripletId}`);
        }
        return record.detail.expected_output;
    }

    queueIds(): string[] {
        const open = this.pendingOrder.filter(
            (id) => this.records.get(id)?.detail.final_status === "HITLPending",
        );
        const sampled = this.sampledOrder.filter(
            (id) => this.records.get(id)?.detail.final_status === "AutoAccepted",
        );
        return [...open, ...sampled];
    }

    queuePage(page: number, pageSize: number): JsonResponse {
        if (page < 1) {
            return versioned({ detail: "page must be >= 1" }, 422);
        }
        if (pageSize < 1 || pageSize > 200) {
            return versioned({ detail: "page_size must be in 1..200" }, 422);
        }
        const ids = this.queueIds();
        const start = (page - 1) * pageSize;
        const items = ids.slice(start, start + pageSize).map((id) => this.summary(id));
        const totalPages = ids.length === 0 ? 0 : Math.ceil(ids.length / pageSize);
        return versioned({
            page,
            page_size: pageSize,
            total_items: ids.length,
            total_pages: totalPages,
            items,
        });
    }

    itemDetail(tripletId: string): JsonResponse {
        const record = this.records.get(tripletId);
        if (!record || !this.inQueueUniverse(tripletId)) {
            return versioned({ detail: `unknown triplet ${tripletId}` }, 404);
        }
        return versioned({ item: { ...record.detail } });
    }

    verdict(tripletId: string, body: Record<string, unknown>): JsonResponse {
        const decision = body["decision"];
        if (decision !== "Accepted" && decision !== "Revised") {
            return versioned(
                { detail: `decision must be Accepted or Revised, got ${String(decision)}` },
                422,
            );
        }
        const rubric = body["rubric"];
        const rubricProblem = this.validateRubric(rubric);
        if (rubricProblem) {
            return versioned({ detail: rubricProblem }, 422);
        }
        let revised: string | null = null;
        if (decision === "Revised") {
            const raw = body["revised_output"];
            if (typeof raw !== "string" || raw.trim() === "") {
                return versioned(
                    { detail: "Revised verdicts require a non-empty revised_output" },
                    422,
                );
            }
            revised = raw;
        }
        const existing = this.auditLog.find((entry) => entry.triplet_id === tripletId);
        if (existing) {
            return versioned(
                { detail: "verdict already recorded", winning_verdict: existing },
                409,
            );
        }
        const record = this.records.get(tripletId);
        if (!record || !this.inQueueUniverse(tripletId)) {
            return versioned({ detail: `unknown triplet ${tripletId}` }, 404);
        }
        const previous = record.detail.final_status;
        const next: FinalStatus = decision === "Accepted" ? "HITLAccepted" : "HITLRevised";
        const entry: WinningVerdict = {
            schema_version: SCHEMA_VERSION,
            triplet_id: tripletId,
            decision,
            rubric: rubric as WinningVerdict["rubric"],
            revised_output: revised,
            reviewer_id: String(body["reviewer_id"] ?? "anonymous"),
            timestamp: `2026-08-17T00:00:${String(this.auditLog.length).padStart(2, "0")}Z`,
            previous_status: previous,
            new_status: next,
        };
        this.auditLog.push(entry);
        record.detail.final_status = next;
        if (revised !== null) {
            record.detail.expected_output = revised;
        }
        return versioned({
            triplet_id: tripletId,
            final_status: next,
            previous_status: previous,
            progress: this.progressBody(),
        });
    }

    progress(): JsonResponse {
        return versioned(this.progressBody() as unknown as Record<string, unknown>);
    }

    /** A fetch implementation routing to this fixture. */
    fetchStub(): FetchLike {
        return async (url, init) => {
            this.requestLog.push({ method: init?.method ?? "GET", url });
            if (this.failRemaining > 0) {
                this.failRemaining -= 1;
                throw new TypeError("fetch failed: connection refused");
            }
            const headers = (init?.headers ?? {}) as Record<string, string>;
            this.lastAuthorization = headers["Authorization"] ?? null;
            const parsed = new URL(url, "http://fixture.test");
            const response = this.route(parsed, init);
            return new Response(JSON.stringify(response.body), {
                status: response.status,
                headers: { "Content-Type": "application/json" },
            });
        };
    }

    private route(url: URL, init?: RequestInit): JsonResponse {
        const path = url.pathname;
        const method = init?.method ?? "GET";
        if (method === "GET" && path === "/review/queue") {
            const page = Number(url.searchParams.get("page") ?? "1");
            const pageSize = Number(url.searchParams.get("page_size") ?? "20");
            return this.queuePage(page, pageSize);
        }
        if (method === "GET" && path === "/review/progress") {
            return this.progress();
        }
        const itemMatch = path.match(/^\/review\/item\/([^/]+)$/);
        if (method === "GET" && itemMatch) {
            return this.itemDetail(decodeURIComponent(itemMatch[1] ?? ""));
        }
        const verdictMatch = path.match(/^\/review\/item\/([^/]+)\/verdict$/);
        if (method === "POST" && verdictMatch) {
            const body = JSON.parse(String(init?.body ?? "{}")) as Record<string, unknown>;
            return this.verdict(decodeURIComponent(verdictMatch[1] ?? ""), body);
        }
        return versioned({ detail: `no route for ${method} ${path}` }, 404);
    }

    private summary(tripletId: string): QueueItemSummary {
        const record = this.records.get(tripletId);
        if (!record) {
            throw new Error(`no fixture record ${tripletId}`);
        }
        const detail = record.detail;
        return {
            triplet_id: detail.triplet_id,
            persona: detail.persona,
            query_type: detail.query_type,
            stroke_type: detail.stroke_type,
            complexity_level: detail.complexity_level,
            final_status: detail.final_status,
            query: detail.query,
            violation_rules: detail.critic_history.violations.map((v) => v.rule_id),
            iteration_count: detail.critic_history.iteration_count,
            sampled: record.sampled,
        };
    }

    private inQueueUniverse(tripletId: string): boolean {
        const record = this.records.get(tripletId);
        if (!record) {
            return false;
        }
        const status = record.detail.final_status;
        if (status === "HITLPending" || status === "HITLAccepted" || status === "HITLRevised") {
            return true;
        }
        return record.sampled;
    }

    private validateRubric(rubric: unknown): string | null {
        if (typeof rubric !== "object" || rubric === null || Array.isArray(rubric)) {
            return "rubric must be an object with three scores";
        }
        const entries = rubric as Record<string, unknown>;
        const unknown = Object.keys(entries).filter(
            (key) => !(RUBRIC_AXES as readonly string[]).includes(key),
        );
        if (unknown.length > 0) {
            return `unknown rubric axes: ${unknown.sort().join(", ")}`;
        }
        for (const axis of RUBRIC_AXES) {
            const value = entries[axis];
            if (value === undefined) {
                return `rubric missing axis '${axis}'`;
            }
            if (typeof value !== "number" || !Number.isInteger(value)) {
                return `rubric axis '${axis}' must be an integer`;
            }
            if (value < 1 || value > 5) {
                return `rubric axis '${axis}' must be in 1..5`;
            }
        }
        return null;
    }

    private progressBody(): Progress {
        const accepted = this.auditLog.filter((e) => e.decision === "Accepted").length;
        const revised = this.auditLog.filter((e) => e.decision === "Revised").length;
        const remaining = this.queueIds().length;
        return {
            queue_total: remaining + accepted + revised,
            reviewed: accepted + revised,
            remaining,
            accepted,
            revised,
        };
    }
}
