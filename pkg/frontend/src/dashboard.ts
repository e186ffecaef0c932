/**
 * Consensus dashboard: each party's submitted tier, the required set,
 * and the recorded outcome. The server's resolution is shown verbatim;
 * the dashboard derives nothing itself.
 */

import { ApiClient, WorkPackageStatus, escapeHtml } from './api.js';

export type Banner = 'agreed' | 'proceed_at_max' | 'disagreement' | 'halt' | 'pending';

export interface ConsensusView {
    wpId: string;
    state: string;
    phase: string;
    rows: { classifier: string; role: string; tier: number }[];
    required: { role: string; providerId: string | null }[];
    outcome: { kind: string; tier: number | null } | null;
    banner: Banner;
}

export function bannerFor(status: WorkPackageStatus): Banner {
    if (status.halt_flag) return 'halt';
    if (!status.outcome) return 'pending';
    switch (status.outcome.kind) {
        case 'agreed':
            return 'agreed';
        case 'proceed_at_max':
            return 'proceed_at_max';
        case 'tier4_halt':
            return 'halt';
        default:
            return 'disagreement';
    }
}

export async function loadConsensusDashboard(
    api: ApiClient,
    wpId: string,
): Promise<ConsensusView> {
    const status = await api.workPackageStatus(wpId);
    return {
        wpId,
        state: status.state,
        phase: status.phase,
        rows: status.decisions.map((d) => ({
            classifier: d.classifier_user_id,
            role: d.role,
            tier: d.tier,
        })),
        required: status.required_classifiers.map((r) => ({
            role: r.role,
            providerId: r.provider_id,
        })),
        outcome: status.outcome,
        banner: bannerFor(status),
    };
}

const BANNER_TEXT: Record<Banner, string> = {
    agreed: 'All classifiers agree. Analysis can begin once the agreement is recorded.',
    proceed_at_max: 'No unanimity; proceeding at the highest tier proposed.',
    disagreement:
        'Classifiers disagree. Find a consensus before starting the project.',
    halt: 'A tier-4 classification was proposed. Programme manager review is required before proceeding.',
    pending: 'Waiting for classifiers to submit their decisions.',
};

export function renderDashboard(view: ConsensusView): string {
    const parts = [`<section class="consensus" data-wp="${escapeHtml(view.wpId)}">`];
    parts.push(
        `<div class="banner banner-${view.banner}">${escapeHtml(BANNER_TEXT[view.banner])}</div>`,
    );
    parts.push('<table class="decisions"><thead><tr>' +
        '<th>Classifier</th><th>Role</th><th>Tier</th></tr></thead><tbody>');
    for (const row of view.rows) {
        parts.push(
            `<tr><td>${escapeHtml(row.classifier)}</td>` +
                `<td>${escapeHtml(row.role)}</td><td>${row.tier}</td></tr>`,
        );
    }
    parts.push('</tbody></table>');
    const outstanding = view.required.filter(
        (r) =>
            !view.rows.some(
                (row) => row.role === r.role || (r.providerId && row.role === 'dataset_provider_representative'),
            ),
    );
    if (outstanding.length) {
        parts.push('<ul class="awaiting">');
        for (const r of outstanding) {
            const suffix = r.providerId ? ` (${escapeHtml(r.providerId)})` : '';
            parts.push(`<li>awaiting ${escapeHtml(r.role)}${suffix}</li>`);
        }
        parts.push('</ul>');
    }
    if (view.outcome && view.outcome.tier !== null) {
        parts.push(
            `<p class="outcome">Recorded outcome: ${escapeHtml(view.outcome.kind)} ` +
                `at tier ${view.outcome.tier}</p>`,
        );
    }
    parts.push('</section>');
    return parts.join('\n');
}
