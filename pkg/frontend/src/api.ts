/**
 * Typed client for the management API.
 *
 * The console performs no authorization decisions of its own: every
 * capability shown in the UI comes from a server-side probe, and every
 * tier shown to a classifier comes from the server's decision endpoint.
 */

export interface ApiOptions {
    baseUrl: string;
    token: string;
    originNetwork?: string;
    deviceClass?: string;
    clientIp?: string;
    fetchImpl?: typeof fetch;
}

export class ApiError extends Error {
    readonly status: number;
    readonly code: string;

    constructor(status: number, code: string, message: string) {
        super(message);
        this.status = status;
        this.code = code;
    }
}

export interface Answers {
    personal_data_status: string;
    deidentification_confidence: string;
    substantial_threat_to_subjects: boolean;
    sophisticated_attacker_target: boolean;
    commercial_sensitivity: string;
    publication_intent: string;
}

export interface QuestionOption {
    value: string;
    label: string;
}

export interface Question {
    id: string;
    text: string;
    type: 'choice' | 'boolean';
    options?: QuestionOption[];
    applies_when?: Record<string, string[]>;
    help?: string;
}

export interface QuestionnaireDefinition {
    schema_version: string;
    questions: Question[];
    sensitivity_orders: Record<string, unknown[]>;
}

export interface DecisionRow {
    classifier_user_id: string;
    role: string;
    tier: number;
    provider_id: string | null;
}

export interface WorkPackageStatus {
    state: string;
    phase: string;
    decisions: DecisionRow[];
    required_classifiers: { role: string; provider_id: string | null }[];
    outcome: { kind: string; tier: number | null } | null;
    halt_flag: boolean;
    work_package: Record<string, unknown>;
    project_id: string;
}

export interface CapabilityVerdict {
    action: string;
    allowed: boolean;
    reason: string | null;
}

export class ApiClient {
    private readonly options: ApiOptions;
    private readonly fetchImpl: typeof fetch;

    constructor(options: ApiOptions) {
        this.options = options;
        this.fetchImpl = options.fetchImpl ?? fetch;
    }

    private headers(): Record<string, string> {
        const headers: Record<string, string> = {
            authorization: `Bearer ${this.options.token}`,
            'x-origin-network': this.options.originNetwork ?? 'institutional',
            'x-device-class': this.options.deviceClass ?? 'managed',
        };
        if (this.options.clientIp) headers['x-client-ip'] = this.options.clientIp;
        return headers;
    }

    async request<T = any>(
        method: string,
        path: string,
        body?: unknown,
        rawBody?: Uint8Array,
    ): Promise<T> {
        const headers = this.headers();
        let payload: string | Uint8Array | undefined;
        if (rawBody !== undefined) {
            headers['content-type'] = 'application/octet-stream';
            payload = rawBody;
        } else if (body !== undefined) {
            headers['content-type'] = 'application/json';
            payload = JSON.stringify(body);
        }
        const response = await this.fetchImpl(`${this.options.baseUrl}${path}`, {
            method,
            headers,
            body: payload as BodyInit | undefined,
        });
        const text = await response.text();
        if (!response.ok) {
            let code = 'error';
            let message = text;
            try {
                const parsed = JSON.parse(text);
                code = parsed.error?.code ?? code;
                message = parsed.error?.message ?? message;
            } catch {
                // non-JSON error body; keep raw text
            }
            throw new ApiError(response.status, code, message);
        }
        const contentType = response.headers.get('content-type') ?? '';
        if (contentType.startsWith('application/x-ndjson') || contentType.startsWith('text/')) {
            return text as unknown as T;
        }
        return text ? JSON.parse(text) : (undefined as unknown as T);
    }

    questionnaire(): Promise<QuestionnaireDefinition> {
        return this.request('GET', '/classification/questionnaire');
    }

    previewTier(answers: Answers): Promise<{ tier: number; normalization_notes: string[] }> {
        return this.request('POST', '/classification/preview', { answers });
    }

    submitClassification(wpId: string, answers: Answers): Promise<any> {
        return this.request('POST', `/work-packages/${wpId}/classification`, { answers });
    }

    workPackageStatus(wpId: string): Promise<WorkPackageStatus> {
        return this.request('GET', `/work-packages/${wpId}/status`);
    }

    resolveConsensus(wpId: string, proceed = false): Promise<{ kind: string; tier: number | null }> {
        return this.request('POST', `/work-packages/${wpId}/consensus`, {
            proceed_without_consensus: proceed,
        });
    }

    probe(action: string, target: Record<string, string>): Promise<CapabilityVerdict> {
        return this.request('POST', '/capabilities', { action, target });
    }

    policy(tier: number): Promise<Record<string, any>> {
        return this.request('GET', `/policies/${tier}`);
    }

    completeIngress(volumeId: string): Promise<any> {
        return this.request('POST', `/volumes/${volumeId}/complete`);
    }

    verifyIntegrity(volumeId: string, providerHash: string | null = null): Promise<any> {
        return this.request('POST', `/volumes/${volumeId}/verify`, {
            provider_hash: providerHash,
        });
    }

    signoffRelease(releaseId: string): Promise<any> {
        return this.request('POST', `/releases/${releaseId}/signoff`);
    }

    signoffSoftware(requestId: string, approve = true): Promise<any> {
        return this.request('POST', `/software-ingress/${requestId}/signoff`, { approve });
    }

    counterApprove(projectId: string, userId: string): Promise<any> {
        return this.request('POST', `/projects/${projectId}/members/${userId}/counter-approve`);
    }

    acknowledgeHalt(wpId: string): Promise<any> {
        return this.request('POST', `/work-packages/${wpId}/acknowledge-halt`);
    }

    openExposureWindow(viewId: string, ipRange: string, durationHours: number): Promise<any> {
        return this.request('POST', '/exposure-windows', {
            view_id: viewId,
            ip_range: ipRange,
            duration_hours: durationHours,
        });
    }

    listExposureWindows(): Promise<{ windows: any[] }> {
        return this.request('GET', '/exposure-windows');
    }

    auditEvents(start = 1, end?: number): Promise<{ events: any[] }> {
        const params = end === undefined ? `?start=${start}` : `?start=${start}&end=${end}`;
        return this.request('GET', `/audit/events${params}`);
    }

    auditVerify(): Promise<{ valid: boolean; checked: number }> {
        return this.request('GET', '/audit/verify');
    }

    getEnvironment(envId: string): Promise<any> {
        return this.request('GET', `/environments/${envId}`);
    }

    getVolume(volumeId: string): Promise<any> {
        return this.request('GET', `/volumes/${volumeId}`);
    }

    getSoftwareRequest(requestId: string): Promise<any> {
        return this.request('GET', `/software-ingress/${requestId}`);
    }

    getRelease(releaseId: string): Promise<any> {
        return this.request('GET', `/releases/${releaseId}`);
    }

    getProject(projectId: string): Promise<any> {
        return this.request('GET', `/projects/${projectId}`);
    }
}

export function escapeHtml(value: string): string {
    return value
        .replace(/&/g, '&amp;')
        .replace(/</g, '&lt;')
        .replace(/>/g, '&gt;')
        .replace(/"/g, '&quot;');
}
