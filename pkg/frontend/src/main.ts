/** Entry point: read runtime config, mount the app. */

import { ReviewApiClient } from "./api.js";
import { ReviewApp } from "./app.js";

interface RuntimeConfig {
    apiBase?: string;
    token?: string;
    reviewerId?: string;
}

declare global {
    interface Window {
        REVIEW_UI_CONFIG?: RuntimeConfig;
    }
}

export function mount(root: HTMLElement): ReviewApp {
    const config = window.REVIEW_UI_CONFIG ?? {};
    const client = new ReviewApiClient({
        baseUrl: config.apiBase ?? "",
        token: config.token,
    });
    const app = new ReviewApp(client, root, { reviewerId: config.reviewerId });
    void app.start();
    return app;
}

const root = document.getElementById("review-root");
if (root) {
    mount(root);
}
