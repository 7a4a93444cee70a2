/** Verdict form state and validation.
 *
 * The invariants here are the client half of the server contract: submit
 * stays disabled until all three rubric scores are set, and a Revised
 * verdict requires edited output that actually differs from the original.
 * A request built from a state this module accepts can never fail server
 * validation for schema reasons.
 */

import { RUBRIC_AXES } from "./types.js";
import type { Decision, Rubric, RubricAxis, VerdictRequest } from "./types.js";

export type RubricDraft = Record<RubricAxis, number | null>;

export interface FormState {
    decision: Decision;
    rubric: RubricDraft;
    revisedText: string;
}

export function emptyRubric(): RubricDraft {
    return {
        physiological_accuracy: null,
        coaching_relevance: null,
        source_fidelity: null,
    };
}

export function emptyForm(): FormState {
    return { decision: "Accepted", rubric: emptyRubric(), revisedText: "" };
}

export function setScore(
    draft: RubricDraft,
    axis: RubricAxis,
    score: number,
): RubricDraft {
    return { ...draft, [axis]: score };
}

export function rubricComplete(draft: RubricDraft): boolean {
    return RUBRIC_AXES.every((axis) => {
        const score = draft[axis];
        return score !== null && Number.isInteger(score) && score >= 1 && score <= 5;
    });
}

/** Human-readable blockers; an empty list means the form is submittable. */
export function formProblems(state: FormState, originalOutput: string): string[] {
    const problems: string[] = [];
    for (const axis of RUBRIC_AXES) {
        const score = state.rubric[axis];
        if (score === null) {
            problems.push(`score required: ${axisLabel(axis)}`);
        } else if (!Number.isInteger(score) || score < 1 || score > 5) {
            problems.push(`score for ${axisLabel(axis)} must be an integer 1 to 5`);
        }
    }
    if (state.decision === "Revised") {
        const revised = state.revisedText.trim();
        if (!revised) {
            problems.push("revised output must not be empty");
        } else if (revised === originalOutput.trim()) {
            problems.push("revised output must differ from the original");
        }
    }
    return problems;
}

export function buildVerdict(
    state: FormState,
    reviewerId: string,
    originalOutput: string,
): VerdictRequest {
    const problems = formProblems(state, originalOutput);
    if (problems.length > 0) {
        throw new Error(`form not submittable: ${problems.join("; ")}`);
    }
    const rubric = Object.fromEntries(
        RUBRIC_AXES.map((axis) => [axis, state.rubric[axis] as number]),
    ) as Rubric;
    const request: VerdictRequest = {
        decision: state.decision,
        rubric,
        reviewer_id: reviewerId,
    };
    if (state.decision === "Revised") {
        request.revised_output = state.revisedText.trim();
    }
    return request;
}

export function axisLabel(axis: RubricAxis): string {
    return axis.replace(/_/g, " ");
}
