/** Reference highlighting for the source-fidelity panels.
 *
 * The item payload ships every number and name the answer cites, each
 * flagged grounded or not against the context. The answer panel marks all
 * of them; the context panel marks the grounded ones at their source so a
 * reviewer can eyeball fidelity without re-reading both texts.
 */

import type { GroundingDetail } from "./types.js";

export interface Reference {
    value: string;
    grounded: boolean;
    kind: string;
}

export function collectReferences(grounding: GroundingDetail): Reference[] {
    const numbers = grounding.numbers.map((n) => ({
        value: n.value,
        grounded: n.grounded,
        kind: "Number",
    }));
    const names = grounding.names.map((n) => ({
        value: n.value,
        grounded: n.grounded,
        kind: n.kind,
    }));
    // longest first so "100.5" wins over "100" when both are cited
    return [...numbers, ...names].sort((a, b) => b.value.length - a.value.length);
}

export function escapeHtml(text: string): string {
    return text
        .replace(/&/g, "&amp;")
        .replace(/</g, "&lt;")
        .replace(/>/g, "&gt;")
        .replace(/"/g, "&quot;");
}

function escapeRegExp(literal: string): string {
    return literal.replace(/[.*+?^${}()|[\]\\]/g, "\\$&");
}

function patternFor(ref: Reference): string {
    const body = escapeRegExp(ref.value);
    if (ref.kind === "Number") {
        // a cited 7.5 must not light up inside 17.5, 7.55, or 7.5.3,
        // but a sentence-ending period after it is fine
        return `(?<![\\d.])${body}(?!\\d|\\.\\d)`;
    }
    return `\\b${body}\\b`;
}

/** Render text to HTML with each reference occurrence wrapped in a mark. */
export function markReferences(text: string, refs: Reference[]): string {
    if (refs.length === 0) {
        return escapeHtml(text);
    }
    const matcher = new RegExp(refs.map(patternFor).join("|"), "g");
    const byValue = new Map(refs.map((ref) => [ref.value, ref]));
    let html = "";
    let cursor = 0;
    for (const match of text.matchAll(matcher)) {
        const start = match.index ?? 0;
        const ref = byValue.get(match[0]);
        html += escapeHtml(text.slice(cursor, start));
        if (ref) {
            const state = ref.grounded ? "grounded" : "ungrounded";
            html +=
                `<mark class="ref ${state}" data-kind="${escapeHtml(ref.kind)}"` +
                ` data-value="${escapeHtml(ref.value)}">` +
                escapeHtml(match[0]) +
                "</mark>";
        } else {
            html += escapeHtml(match[0]);
        }
        cursor = start + match[0].length;
    }
    html += escapeHtml(text.slice(cursor));
    return html;
}

/** Answer panel: every cited reference, grounded and ungrounded alike. */
export function markAnswer(answer: string, grounding: GroundingDetail): string {
    return markReferences(answer, collectReferences(grounding));
}

/** Context panel: only references the answer grounds here are marked. */
export function markContext(context: string, grounding: GroundingDetail): string {
    const grounded = collectReferences(grounding).filter((ref) => ref.grounded);
    return markReferences(context, grounded);
}
