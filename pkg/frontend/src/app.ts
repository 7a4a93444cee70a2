/** Screen controller: one reviewer session over the queue.
 *
 * Holds all client-side state (current page, open item, form draft,
 * progress) and re-renders wholesale after every change. Corpus data is
 * only ever mutated through the verdict endpoint; everything else here is
 * presentation.
 */

import {
    ApiConflictError,
    ApiNetworkError,
    ApiValidationError,
} from "./api.js";
import type { ReviewApiClient } from "./api.js";
import { buildVerdict, emptyForm, formProblems } from "./form.js";
import type { FormState } from "./form.js";
import {
    renderCompleteState,
    renderItemView,
    renderProgressBar,
    renderQueue,
    renderRetryBanner,
} from "./render.js";
import { SubmitGate } from "./submit.js";
import type { Progress, QueuePage, ReviewItemDetail } from "./types.js";

export interface AppConfig {
    reviewerId?: string;
    pageSize?: number;
}

type View =
    | { name: "queue"; page: QueuePage }
    | { name: "item"; detail: ReviewItemDetail }
    | { name: "complete"; progress: Progress }
    | { name: "error"; message: string };

export class ReviewApp {
    readonly gate: SubmitGate;
    private readonly reviewerId: string;
    private readonly pageSize: number;
    private readonly banner: HTMLElement;
    private readonly status: HTMLElement;
    private readonly main: HTMLElement;
    private view: View = { name: "error", message: "not started" };
    private form: FormState = emptyForm();
    private progress: Progress | null = null;
    private currentPage = 1;
    private notice = "";

    constructor(
        private readonly client: ReviewApiClient,
        private readonly root: HTMLElement,
        config: AppConfig = {},
    ) {
        this.gate = new SubmitGate(client);
        this.reviewerId = config.reviewerId ?? "reviewer";
        this.pageSize = config.pageSize ?? 20;
        this.banner = document.createElement("div");
        this.banner.className = "banner-region";
        this.status = document.createElement("div");
        this.status.className = "status-region";
        this.main = document.createElement("div");
        this.main.className = "main-region";
        this.root.replaceChildren(this.banner, this.status, this.main);
    }

    async start(): Promise<void> {
        await this.loadQueue(1);
    }

    async loadQueue(pageNumber: number): Promise<void> {
        try {
            const page = await this.client.fetchQueue(pageNumber, this.pageSize);
            this.currentPage = page.page;
            if (page.total_items === 0) {
                const progress = await this.client.fetchProgress();
                this.progress = progress;
                this.view = { name: "complete", progress };
            } else {
                this.view = { name: "queue", page };
            }
        } catch (error) {
            if (error instanceof ApiNetworkError) {
                this.notice = "queue fetch failed";
            } else {
                this.view = { name: "error", message: String(error) };
            }
        }
        this.render();
    }

    async openItem(tripletId: string): Promise<void> {
        try {
            const detail = await this.client.fetchItem(tripletId);
            this.form = emptyForm();
            this.notice = "";
            this.view = { name: "item", detail };
        } catch (error) {
            if (error instanceof ApiNetworkError) {
                this.notice = "item fetch failed";
            } else {
                this.view = { name: "error", message: String(error) };
            }
        }
        this.render();
    }

    changeForm(mutate: (state: FormState) => void): void {
        mutate(this.form);
        this.render();
    }

    async submitCurrent(): Promise<void> {
        if (this.view.name !== "item") {
            return;
        }
        const detail = this.view.detail;
        if (formProblems(this.form, detail.expected_output).length > 0) {
            this.render();
            return;
        }
        const request = buildVerdict(this.form, this.reviewerId, detail.expected_output);
        try {
            const outcome = await this.gate.submit(detail.triplet_id, request);
            if (outcome.status === "applied") {
                this.progress = outcome.result.progress;
                this.notice = "";
                await this.loadQueue(this.currentPage);
                return;
            }
            this.notice = "verdict parked for retry";
        } catch (error) {
            if (error instanceof ApiConflictError) {
                const winner = error.winningVerdict;
                this.notice =
                    `already reviewed by ${winner.reviewer_id}: ` +
                    `${winner.decision} at ${winner.timestamp}`;
                await this.loadQueue(this.currentPage);
                return;
            }
            if (error instanceof ApiValidationError) {
                this.notice = error.detail;
            } else {
                this.view = { name: "error", message: String(error) };
            }
        }
        this.render();
    }

    async retryParked(): Promise<void> {
        const outcomes = await this.gate.retryPending();
        for (const outcome of outcomes) {
            if (outcome.status === "applied") {
                this.progress = outcome.result.progress;
            }
        }
        if (this.gate.pendingRetries().length === 0) {
            this.notice = "";
            await this.loadQueue(this.currentPage);
            return;
        }
        this.render();
    }

    render(): void {
        renderRetryBanner(this.banner, this.gate.pendingRetries().length, () => {
            void this.retryParked();
        });
        this.status.replaceChildren();
        if (this.progress) {
            renderProgressBar(this.status, this.progress);
        }
        if (this.notice) {
            const note = document.createElement("p");
            note.className = "notice";
            note.textContent = this.notice;
            this.status.append(note);
        }
        switch (this.view.name) {
            case "queue":
                renderQueue(this.main, this.view.page, {
                    onOpen: (tripletId) => void this.openItem(tripletId),
                    onPage: (pageNumber) => void this.loadQueue(pageNumber),
                });
                break;
            case "item":
                renderItemView(this.main, this.view.detail, this.form, {
                    onBack: () => void this.loadQueue(this.currentPage),
                    onChange: (mutate) => this.changeForm(mutate),
                    onSubmit: () => void this.submitCurrent(),
                });
                break;
            case "complete":
                renderCompleteState(this.main, this.view.progress);
                break;
            case "error": {
                const failure = document.createElement("p");
                failure.className = "fatal";
                failure.textContent = this.view.message;
                this.main.replaceChildren(failure);
                break;
            }
        }
    }
}
