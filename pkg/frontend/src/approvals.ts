/**
 * Approval screens: one-click actions mapping 1:1 onto API mutations.
 *
 * Button visibility comes from server-side capability probes, and every
 * action is confirmed with the policy it enacts, so the console can never
 * offer an action the API would refuse.
 */

import { ApiClient, CapabilityVerdict, escapeHtml } from './api.js';

export interface ApprovalScreen {
    action: string;
    targetLabel: string;
    confirmation: string;
    verdict: CapabilityVerdict;
}

export async function ingressCompletionScreen(
    api: ApiClient,
    volumeId: string,
): Promise<ApprovalScreen> {
    const verdict = await api.probe('complete_ingress', { volume_id: volumeId });
    return {
        action: 'complete_ingress',
        targetLabel: volumeId,
        confirmation:
            'Confirming the transfer seals the volume and immediately revokes ' +
            'your deposit access.',
        verdict,
    };
}

export function performIngressCompletion(api: ApiClient, volumeId: string) {
    return api.completeIngress(volumeId);
}

export async function softwareReviewScreen(
    api: ApiClient,
    requestId: string,
): Promise<ApprovalScreen> {
    const verdict = await api.probe('signoff_software', { request_id: requestId });
    const request = await api.getSoftwareRequest(requestId);
    const environment = await api.getEnvironment(request.environment_id);
    const policy = await api.policy(environment.tier);
    return {
        action: 'signoff_software',
        targetLabel: request.artifact_ref,
        confirmation:
            `Approving makes this artifact readable inside the environment. ` +
            `Tier ${environment.tier} requires: ${policy.software_ingress_signoff}.`,
        verdict,
    };
}

export function performSoftwareSignoff(api: ApiClient, requestId: string, approve = true) {
    return api.signoffSoftware(requestId, approve);
}

export async function egressSignoffScreen(
    api: ApiClient,
    releaseId: string,
): Promise<ApprovalScreen> {
    const verdict = await api.probe('signoff_release', { release_id: releaseId });
    const release = await api.getRelease(releaseId);
    const referee = release.referee_required
        ? 'An independent referee must also sign before release.'
        : 'Referee consultation is available but not required for this intent.';
    return {
        action: 'signoff_release',
        targetLabel: release.output_descriptor,
        confirmation:
            `These outputs matched a descriptor agreed at classification time, so ` +
            `they release without returning to the provider representative. ${referee}`,
        verdict,
    };
}

export function performReleaseSignoff(api: ApiClient, releaseId: string) {
    return api.signoffRelease(releaseId);
}

export async function counterApprovalScreen(
    api: ApiClient,
    projectId: string,
    userId: string,
): Promise<ApprovalScreen> {
    const verdict = await api.probe('counter_approve_member', {
        project_id: projectId,
        user_id: userId,
    });
    return {
        action: 'counter_approve_member',
        targetLabel: userId,
        confirmation:
            'Members working at tier 3 and above become active only after ' +
            'counter-approval by the dataset provider representative.',
        verdict,
    };
}

export function performCounterApproval(api: ApiClient, projectId: string, userId: string) {
    return api.counterApprove(projectId, userId);
}

export async function openWindowForm(
    api: ApiClient,
    viewId: string,
    ipRange: string,
    durationHours: number,
) {
    const window = await api.openExposureWindow(viewId, ipRange, durationHours);
    return {
        window,
        countdownLabel: `open until ${window.closes_at} for ${window.ip_range}`,
    };
}

export function renderApprovalScreen(screen: ApprovalScreen): string {
    const parts = [`<section class="approval approval-${escapeHtml(screen.action)}">`];
    parts.push(`<p class="target">${escapeHtml(screen.targetLabel)}</p>`);
    parts.push(`<p class="confirmation">${escapeHtml(screen.confirmation)}</p>`);
    if (screen.verdict.allowed) {
        parts.push(`<button class="approve" data-action="${screen.action}">Confirm</button>`);
    } else {
        parts.push(
            `<p class="denied">Not available: ${escapeHtml(screen.verdict.reason ?? '')}</p>`,
        );
    }
    parts.push('</section>');
    return parts.join('\n');
}
