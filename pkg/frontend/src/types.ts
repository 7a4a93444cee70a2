/** Wire types for the review API, schema_version 1.
 *
 * These mirror the server contract field for field; the client refuses to
 * build any request the server would reject for schema reasons, so every
 * shape here is load-bearing.
 */

export const SCHEMA_VERSION = 1;

export const RUBRIC_AXES = [
    "physiological_accuracy",
    "coaching_relevance",
    "source_fidelity",
] as const;

export type RubricAxis = (typeof RUBRIC_AXES)[number];

export type Decision = "Accepted" | "Revised";

export type FinalStatus =
    | "Draft"
    | "AutoAccepted"
    | "HITLPending"
    | "HITLAccepted"
    | "HITLRevised";

export interface QueueItemSummary {
    triplet_id: string;
    persona: string;
    query_type: string;
    stroke_type: string;
    complexity_level: string;
    final_status: FinalStatus;
    query: string;
    violation_rules: string[];
    iteration_count: number;
    sampled: boolean;
}

export interface QueuePage {
    schema_version: number;
    page: number;
    page_size: number;
    total_items: number;
    total_pages: number;
    items: QueueItemSummary[];
}

export interface RuleViolation {
    rule_id: string;
    reason: string;
}

export interface CriticHistory {
    passed: boolean;
    violations: RuleViolation[];
    iteration_count: number;
    critic_rejection_reason: string;
}

export interface GroundedNumber {
    value: string;
    grounded: boolean;
}

export interface GroundedName {
    value: string;
    kind: string;
    grounded: boolean;
}

export interface GroundingDetail {
    numbers: GroundedNumber[];
    names: GroundedName[];
}

export interface ReviewItemDetail {
    anchor_id: string;
    triplet_id: string;
    query: string;
    query_type: string;
    persona: string;
    complexity_level: string;
    context: string;
    expected_output: string;
    anchor_type: string;
    anchor_variables: string[];
    stroke_type: string;
    training_phase: string;
    data_category: string;
    source_documents: string[];
    final_status: FinalStatus;
    critic_history: CriticHistory;
    grounding: GroundingDetail;
    sampled: boolean;
}

export type Rubric = Record<RubricAxis, number>;

export interface VerdictRequest {
    decision: Decision;
    rubric: Rubric;
    revised_output?: string;
    reviewer_id: string;
}

export interface Progress {
    schema_version?: number;
    queue_total: number;
    reviewed: number;
    remaining: number;
    accepted: number;
    revised: number;
}

export interface VerdictResult {
    schema_version: number;
    triplet_id: string;
    final_status: FinalStatus;
    previous_status: FinalStatus;
    progress: Progress;
}

/** Audit entry shape returned inside a 409 conflict body. */
export interface WinningVerdict {
    schema_version: number;
    triplet_id: string;
    decision: Decision;
    rubric: Rubric;
    revised_output: string | null;
    reviewer_id: string;
    timestamp: string;
    previous_status: FinalStatus;
    new_status: FinalStatus;
}
