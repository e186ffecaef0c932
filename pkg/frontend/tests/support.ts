/**
 * Test harness: spawns the management API service and seeds a deployment.
 */

import { spawn, ChildProcess } from 'node:child_process';
import { createHash } from 'node:crypto';

import { Answers, ApiClient } from '../src/api.js';

export interface RunningServer {
    baseUrl: string;
    stop: () => Promise<void>;
}

async function waitForHealth(baseUrl: string, timeoutMs = 30_000): Promise<void> {
    const deadline = Date.now() + timeoutMs;
    while (Date.now() < deadline) {
        try {
            const response = await fetch(`${baseUrl}/health`);
            if (response.ok) return;
        } catch {
            // not up yet
        }
        await new Promise((resolve) => setTimeout(resolve, 200));
    }
    throw new Error(`service at ${baseUrl} did not come up`);
}

export async function startServer(): Promise<RunningServer> {
    const port = 8700 + Math.floor(Math.random() * 500);
    const baseUrl = `http://127.0.0.1:${port}`;
    const child: ChildProcess = spawn(
        'safehaven',
        ['serve', '--host', '127.0.0.1', '--port', String(port), '--dev-identity'],
        { stdio: ['ignore', 'pipe', 'pipe'] },
    );
    const stderr: string[] = [];
    child.stderr?.on('data', (chunk) => stderr.push(String(chunk)));
    try {
        await waitForHealth(baseUrl);
    } catch (error) {
        child.kill('SIGKILL');
        throw new Error(`${error}\n--- server stderr ---\n${stderr.join('')}`);
    }
    return {
        baseUrl,
        stop: () =>
            new Promise((resolve) => {
                child.once('exit', () => resolve());
                child.kill('SIGTERM');
                setTimeout(() => {
                    child.kill('SIGKILL');
                    resolve();
                }, 3000).unref();
            }),
    };
}

export async function devToken(baseUrl: string, userId: string): Promise<string> {
    const response = await fetch(`${baseUrl}/auth/dev-token`, {
        method: 'POST',
        headers: { 'content-type': 'application/json' },
        body: JSON.stringify({ user_id: userId, second_factor: true }),
    });
    if (!response.ok) throw new Error(`dev token failed: ${await response.text()}`);
    return (await response.json()).token;
}

/** Volume digest matching the service: sorted paths, 8-byte BE lengths. */
export function computeVolumeDigest(files: Record<string, Uint8Array>): string {
    const hash = createHash('sha256');
    for (const path of Object.keys(files).sort()) {
        const encodedPath = Buffer.from(path, 'utf-8');
        const content = Buffer.from(files[path]);
        const pathLen = Buffer.alloc(8);
        pathLen.writeBigUInt64BE(BigInt(encodedPath.length));
        const contentLen = Buffer.alloc(8);
        contentLen.writeBigUInt64BE(BigInt(content.length));
        hash.update(pathLen);
        hash.update(encodedPath);
        hash.update(contentLen);
        hash.update(content);
    }
    return hash.digest('hex');
}

export const DATASET_FILES: Record<string, Uint8Array> = {
    'records/cohort.csv': Buffer.from('id,value\n1,10\n2,20\n'),
    'README.txt': Buffer.from('curated extract for analysis\n'),
};

export const TIER3_ANSWERS: Answers = {
    personal_data_status: 'identifiable',
    deidentification_confidence: 'not_applicable',
    substantial_threat_to_subjects: false,
    sophisticated_attacker_target: false,
    commercial_sensitivity: 'none',
    publication_intent: 'confidential',
};

export const TIER2_ANSWERS: Answers = {
    personal_data_status: 'pseudonymised',
    deidentification_confidence: 'strong',
    substantial_threat_to_subjects: false,
    sophisticated_attacker_target: false,
    commercial_sensitivity: 'none',
    publication_intent: 'confidential',
};

export const TIER4_ANSWERS: Answers = {
    ...TIER3_ANSWERS,
    substantial_threat_to_subjects: true,
};

export class Deployment {
    readonly baseUrl: string;
    pgm = 'user-bootstrap-programme-manager';
    investigator = '';
    pm = '';
    researcher = '';
    referee = '';
    rep = '';
    provider = '';
    dataset = '';
    project = '';

    constructor(baseUrl: string) {
        this.baseUrl = baseUrl;
    }

    async client(userId: string): Promise<ApiClient> {
        return new ApiClient({
            baseUrl: this.baseUrl,
            token: await devToken(this.baseUrl, userId),
        });
    }

    async seed(): Promise<void> {
        const boot = await this.client(this.pgm);
        const user = async (displayName: string, guest = false) =>
            (
                await boot.request('POST', '/users', {
                    display_name: displayName,
                    training_certified: true,
                    guest,
                })
            ).id;
        this.investigator = await user('Ivy Investigator');
        this.pm = await user('Petra Manager');
        this.researcher = await user('Ray Researcher');
        this.referee = await user('Rhea Referee');
        this.rep = await user('Pat Provider-Rep', true);
        this.provider = (
            await boot.request('POST', '/providers', {
                name: 'Data Trust Ltd',
                representative_user_id: this.rep,
            })
        ).id;
        this.dataset = (
            await boot.request('POST', '/datasets', {
                provider_id: this.provider,
                provider_hash: computeVolumeDigest(DATASET_FILES),
            })
        ).id;
        this.project = (
            await boot.request('POST', '/projects', {
                investigator_id: this.investigator,
                project_manager_id: this.pm,
            })
        ).id;
        const pm = await this.client(this.pm);
        await pm.request('POST', `/projects/${this.project}/members`, {
            user_id: this.referee,
            role: 'referee',
        });
        await pm.request('POST', `/projects/${this.project}/members`, {
            user_id: this.researcher,
            role: 'researcher',
        });
    }

    async createWorkPackage(preApproved: string[] = []): Promise<string> {
        const pm = await this.client(this.pm);
        const wp = await pm.request('POST', '/work-packages', {
            project_id: this.project,
            dataset_ids: [this.dataset],
            intended_analysis: 'combine and summarise the cohort',
            pre_approved_outputs: preApproved,
        });
        return wp.id;
    }

    async classifyRound(wpId: string, answers: Answers, includeReferee: boolean) {
        const inv = await this.client(this.investigator);
        const rep = await this.client(this.rep);
        await inv.submitClassification(wpId, answers);
        await rep.submitClassification(wpId, answers);
        if (includeReferee) {
            const referee = await this.client(this.referee);
            await referee.submitClassification(wpId, answers);
        }
        const pm = await this.client(this.pm);
        return pm.resolveConsensus(wpId);
    }

    /** Everything up to (not including) the representative's completion. */
    async ingressUpToCompletion(wpId: string, answers: Answers) {
        await this.classifyRound(wpId, answers, false);
        const rep = await this.client(this.rep);
        await rep.request('POST', `/datasets/${this.dataset}/sharing-agreement`, {
            doc_ref: 'agreements/executed-1',
        });
        const inv = await this.client(this.investigator);
        await inv.request('POST', `/work-packages/${wpId}/environment`, {
            platform_id: 'platform-a',
            initial: true,
        });
        await inv.request('POST', `/work-packages/${wpId}/ingress/authorize-mount`, {
            dataset_id: this.dataset,
        });
        const pm = await this.client(this.pm);
        const begun = await pm.request('POST', `/work-packages/${wpId}/ingress/begin`, {
            dataset_id: this.dataset,
        });
        for (const [path, content] of Object.entries(DATASET_FILES)) {
            await rep.request(
                'POST',
                `/ingress/deposit?token=${begun.token.id}&path=${encodeURIComponent(path)}`,
                undefined,
                content,
            );
        }
        return begun.volume.id as string;
    }

    async driveToActive(wpId: string, answers: Answers): Promise<void> {
        const volumeId = await this.ingressUpToCompletion(wpId, answers);
        const rep = await this.client(this.rep);
        await rep.completeIngress(volumeId);
        await rep.verifyIntegrity(volumeId);
        const pm = await this.client(this.pm);
        await pm.request('POST', `/work-packages/${wpId}/transition`, {
            event: 'data_ingressed',
        });
        const inv = await this.client(this.investigator);
        await inv.request('POST', `/work-packages/${wpId}/start-full-classification`);
        await this.classifyRound(wpId, answers, true);
        const status = await pm.workPackageStatus(wpId);
        if (status.work_package.personal_data) {
            await pm.request('POST', `/work-packages/${wpId}/dpia`, {
                doc_ref: 'dpia/final-1',
            });
        }
        await inv.request('POST', `/work-packages/${wpId}/transition`, {
            event: 'start_analysis',
        });
    }
}
