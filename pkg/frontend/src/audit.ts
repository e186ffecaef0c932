/**
 * Read-only audit viewer with a chain-verification badge.
 */

import { ApiClient, escapeHtml } from './api.js';

export interface AuditViewerState {
    events: {
        seq: number;
        actor_id: string;
        action: string;
        entity_ref: { type: string; id: string; version: number };
        timestamp: string;
    }[];
    chainValid: boolean;
    checked: number;
}

export async function loadAuditViewer(
    api: ApiClient,
    start = 1,
    end?: number,
): Promise<AuditViewerState> {
    const [events, verification] = await Promise.all([
        api.auditEvents(start, end),
        api.auditVerify(),
    ]);
    return {
        events: events.events,
        chainValid: verification.valid,
        checked: verification.checked,
    };
}

export function renderAuditViewer(state: AuditViewerState): string {
    const badge = state.chainValid
        ? `<span class="badge badge-verified">chain verified (${state.checked} events)</span>`
        : '<span class="badge badge-broken">chain verification FAILED</span>';
    const parts = [`<section class="audit-viewer">${badge}`];
    parts.push('<table><thead><tr><th>#</th><th>When</th><th>Actor</th>' +
        '<th>Action</th><th>Entity</th></tr></thead><tbody>');
    for (const event of state.events) {
        parts.push(
            `<tr><td>${event.seq}</td>` +
                `<td>${escapeHtml(event.timestamp)}</td>` +
                `<td>${escapeHtml(event.actor_id)}</td>` +
                `<td>${escapeHtml(event.action)}</td>` +
                `<td>${escapeHtml(event.entity_ref.type)}/${escapeHtml(event.entity_ref.id)}</td></tr>`,
        );
    }
    parts.push('</tbody></table></section>');
    return parts.join('\n');
}
