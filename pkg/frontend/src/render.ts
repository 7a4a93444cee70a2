/** DOM construction for the review screens.
 *
 * Framework-free: each function builds elements for one screen region and
 * wires the handlers it is given. All state lives in the app controller;
 * re-rendering replaces the region wholesale, which is cheap at queue
 * scale and keeps every screen a pure function of state.
 */

import { axisLabel, formProblems } from "./form.js";
import type { FormState } from "./form.js";
import { markAnswer, markContext } from "./highlight.js";
import { RUBRIC_AXES } from "./types.js";
import type {
    Progress,
    QueueItemSummary,
    QueuePage,
    ReviewItemDetail,
    RubricAxis,
} from "./types.js";

type Child = Node | string;

function el<K extends keyof HTMLElementTagNameMap>(
    tag: K,
    attrs: Record<string, string> = {},
    children: Child[] = [],
): HTMLElementTagNameMap[K] {
    const node = document.createElement(tag);
    for (const [key, value] of Object.entries(attrs)) {
        node.setAttribute(key, value);
    }
    for (const child of children) {
        node.append(child);
    }
    return node;
}

export interface QueueHandlers {
    onOpen: (tripletId: string) => void;
    onPage: (page: number) => void;
}

export function renderQueueCard(
    item: QueueItemSummary,
    onOpen: (tripletId: string) => void,
): HTMLElement {
    const badges = el("div", { class: "badges" }, [
        el(
            "span",
            { class: `badge status-${item.final_status}` },
            [item.final_status],
        ),
    ]);
    if (item.sampled) {
        badges.append(el("span", { class: "badge sampled" }, ["Sampled"]));
    }
    const chips = el(
        "div",
        { class: "chips" },
        item.violation_rules.map((rule) =>
            el("span", { class: "chip", "data-rule": rule }, [rule]),
        ),
    );
    const meta = el("p", { class: "meta" }, [
        `${item.persona} · ${item.stroke_type} · ${item.complexity_level}` +
            ` · ${item.iteration_count} regeneration${item.iteration_count === 1 ? "" : "s"}`,
    ]);
    const open = el("button", { class: "open", type: "button" }, ["Review"]);
    open.addEventListener("click", () => onOpen(item.triplet_id));
    return el(
        "article",
        { class: "queue-card", "data-triplet-id": item.triplet_id },
        [badges, el("p", { class: "query" }, [item.query]), chips, meta, open],
    );
}

export function renderQueue(
    container: HTMLElement,
    page: QueuePage,
    handlers: QueueHandlers,
): void {
    container.replaceChildren();
    const list = el("section", { class: "queue" });
    for (const item of page.items) {
        list.append(renderQueueCard(item, handlers.onOpen));
    }
    container.append(list, renderPagination(page, handlers.onPage));
}

export function renderPagination(
    page: QueuePage,
    onPage: (page: number) => void,
): HTMLElement {
    const nav = el("nav", { class: "pagination", "aria-label": "queue pages" });
    for (let n = 1; n <= page.total_pages; n += 1) {
        const attrs: Record<string, string> = {
            type: "button",
            class: n === page.page ? "page current" : "page",
            "data-page": String(n),
        };
        if (n === page.page) {
            attrs["disabled"] = "disabled";
        }
        const button = el("button", attrs, [String(n)]);
        button.addEventListener("click", () => onPage(n));
        nav.append(button);
    }
    nav.append(
        el("span", { class: "page-note" }, [
            `page ${page.page} of ${page.total_pages} · ${page.total_items} items`,
        ]),
    );
    return nav;
}

export function renderCompleteState(
    container: HTMLElement,
    progress: Progress,
): void {
    container.replaceChildren(
        el("section", { class: "review-complete" }, [
            el("h2", {}, ["Review complete"]),
            el("p", { class: "progress-summary" }, [
                `${progress.reviewed} of ${progress.queue_total} reviewed · ` +
                    `${progress.accepted} accepted · ${progress.revised} revised`,
            ]),
        ]),
    );
}

export function renderRetryBanner(
    container: HTMLElement,
    pendingCount: number,
    onRetry: () => void,
): void {
    const existing = container.querySelector(".retry-banner");
    existing?.remove();
    if (pendingCount === 0) {
        return;
    }
    const retry = el("button", { class: "retry", type: "button" }, ["Retry"]);
    retry.addEventListener("click", onRetry);
    const banner = el("div", { class: "retry-banner", role: "alert" }, [
        el("span", {}, [
            `Connection lost: ${pendingCount} verdict${pendingCount === 1 ? "" : "s"}` +
                " waiting to send. Nothing was lost.",
        ]),
        retry,
    ]);
    container.prepend(banner);
}

export function renderProgressBar(
    container: HTMLElement,
    progress: Progress,
): void {
    const existing = container.querySelector(".progress-indicator");
    existing?.remove();
    container.prepend(
        el("p", { class: "progress-indicator" }, [
            `${progress.reviewed} reviewed · ${progress.remaining} remaining`,
        ]),
    );
}

export interface ItemHandlers {
    onBack: () => void;
    onChange: (mutate: (state: FormState) => void) => void;
    onSubmit: () => void;
}

export function renderItemView(
    container: HTMLElement,
    detail: ReviewItemDetail,
    form: FormState,
    handlers: ItemHandlers,
): void {
    container.replaceChildren();
    const back = el("button", { class: "back", type: "button" }, ["Back to queue"]);
    back.addEventListener("click", handlers.onBack);

    const context = el("div", { class: "panel context" });
    context.innerHTML = markContext(detail.context, detail.grounding);
    const answer = el("div", { class: "panel answer" });
    answer.innerHTML = markAnswer(detail.expected_output, detail.grounding);

    const history = detail.critic_history;
    const violations = el(
        "ul",
        { class: "violations" },
        history.violations.map((violation) =>
            el("li", { "data-rule": violation.rule_id }, [
                el("span", { class: "chip" }, [violation.rule_id]),
                ` ${violation.reason}`,
            ]),
        ),
    );
    const criticSection = el("section", { class: "critic-history" }, [
        el("h3", {}, ["Critic history"]),
        el("p", {}, [
            `${history.iteration_count} regeneration cycle` +
                `${history.iteration_count === 1 ? "" : "s"}` +
                (history.critic_rejection_reason
                    ? ` · ${history.critic_rejection_reason}`
                    : ""),
        ]),
        violations,
    ]);

    container.append(
        back,
        el("article", { class: "item-view", "data-triplet-id": detail.triplet_id }, [
            el("h2", { class: "query" }, [detail.query]),
            el("p", { class: "meta" }, [
                `${detail.persona} · ${detail.stroke_type} · ${detail.training_phase}` +
                    ` · sources: ${detail.source_documents.join(", ")}`,
            ]),
            el("section", { class: "texts" }, [
                el("h3", {}, ["Context"]),
                context,
                el("h3", {}, ["Answer"]),
                answer,
            ]),
            criticSection,
            renderVerdictForm(detail, form, handlers),
        ]),
    );
}

function scoreRow(
    axis: RubricAxis,
    form: FormState,
    handlers: ItemHandlers,
): HTMLElement {
    const row = el("fieldset", { class: "score-row", "data-axis": axis }, [
        el("legend", {}, [axisLabel(axis)]),
    ]);
    for (let score = 1; score <= 5; score += 1) {
        const input = el("input", {
            type: "radio",
            name: `rubric-${axis}`,
            value: String(score),
        }) as HTMLInputElement;
        if (form.rubric[axis] === score) {
            input.checked = true;
        }
        input.addEventListener("change", () =>
            handlers.onChange((state) => {
                state.rubric = { ...state.rubric, [axis]: score };
            }),
        );
        row.append(el("label", {}, [input, String(score)]));
    }
    return row;
}

export function renderVerdictForm(
    detail: ReviewItemDetail,
    form: FormState,
    handlers: ItemHandlers,
): HTMLElement {
    const problems = formProblems(form, detail.expected_output);

    const rubricRows = RUBRIC_AXES.map((axis) => scoreRow(axis, form, handlers));

    const decisionRow = el("fieldset", { class: "decision-row" }, [
        el("legend", {}, ["Decision"]),
    ]);
    for (const decision of ["Accepted", "Revised"] as const) {
        const input = el("input", {
            type: "radio",
            name: "decision",
            value: decision,
        }) as HTMLInputElement;
        if (form.decision === decision) {
            input.checked = true;
        }
        input.addEventListener("change", () =>
            handlers.onChange((state) => {
                state.decision = decision;
                if (decision === "Revised" && !state.revisedText) {
                    state.revisedText = detail.expected_output;
                }
            }),
        );
        decisionRow.append(el("label", {}, [input, decision]));
    }

    const revised = el("textarea", {
        class: "revised-output",
        rows: "6",
    }) as HTMLTextAreaElement;
    revised.value = form.decision === "Revised" ? form.revisedText : "";
    revised.disabled = form.decision !== "Revised";
    revised.addEventListener("input", () =>
        handlers.onChange((state) => {
            state.revisedText = revised.value;
        }),
    );

    const problemList = el(
        "ul",
        { class: "form-problems" },
        problems.map((problem) => el("li", {}, [problem])),
    );

    const submit = el("button", {
        class: "submit",
        type: "button",
    }) as HTMLButtonElement;
    submit.textContent = "Submit verdict";
    submit.disabled = problems.length > 0;
    submit.addEventListener("click", handlers.onSubmit);

    return el("form", { class: "verdict-form" }, [
        ...rubricRows,
        decisionRow,
        revised,
        problemList,
        submit,
    ]);
}
