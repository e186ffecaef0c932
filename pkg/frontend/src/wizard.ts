/**
 * Classification wizard: a series of dialogues driven by the server's
 * questionnaire schema. The wizard never computes a tier locally; the
 * preview always comes from the server's decision endpoint.
 */

import {
    Answers,
    ApiClient,
    Question,
    QuestionnaireDefinition,
    escapeHtml,
} from './api.js';

export interface WizardSession {
    wpId: string;
    schema: QuestionnaireDefinition;
    phase: 'initial' | 'full';
    collected: Partial<Record<keyof Answers, string | boolean>>;
    questionIndex: number;
    previewTier: number | null;
    normalizationNotes: string[];
    haltWarning: boolean;
}

const NOT_APPLICABLE = 'not_applicable';

export async function startWizard(api: ApiClient, wpId: string): Promise<WizardSession> {
    const schema = await api.questionnaire();
    const status = await api.workPackageStatus(wpId);
    return {
        wpId,
        schema,
        phase: status.phase === 'initial' ? 'initial' : 'full',
        collected: {},
        questionIndex: 0,
        previewTier: null,
        normalizationNotes: [],
        haltWarning: false,
    };
}

function questionApplies(question: Question, collected: WizardSession['collected']): boolean {
    if (!question.applies_when) return true;
    for (const [field, allowed] of Object.entries(question.applies_when)) {
        const value = collected[field as keyof Answers];
        if (typeof value !== 'string' || !allowed.includes(value)) return false;
    }
    return true;
}

export function applicableQuestions(session: WizardSession): Question[] {
    return session.schema.questions.filter((q) => questionApplies(q, session.collected));
}

export function currentQuestion(session: WizardSession): Question | null {
    const questions = applicableQuestions(session);
    return session.questionIndex < questions.length ? questions[session.questionIndex] : null;
}

export function wizardComplete(session: WizardSession): boolean {
    return currentQuestion(session) === null;
}

export function collectedAnswers(session: WizardSession): Answers {
    const c = session.collected;
    return {
        personal_data_status: String(c.personal_data_status ?? 'none'),
        deidentification_confidence: String(c.deidentification_confidence ?? NOT_APPLICABLE),
        substantial_threat_to_subjects: Boolean(c.substantial_threat_to_subjects ?? false),
        sophisticated_attacker_target: Boolean(c.sophisticated_attacker_target ?? false),
        commercial_sensitivity: String(c.commercial_sensitivity ?? 'none'),
        publication_intent: String(c.publication_intent ?? 'confidential'),
    };
}

/**
 * Record one answer and advance. When every applicable question is
 * answered, the preview tier is fetched from the server; a tier-4 preview
 * during the initial stage raises the halt warning for the banner.
 */
export async function answerQuestion(
    api: ApiClient,
    session: WizardSession,
    questionId: string,
    value: string | boolean,
): Promise<WizardSession> {
    const question = currentQuestion(session);
    if (!question || question.id !== questionId) {
        throw new Error(`question ${questionId} is not the current dialogue`);
    }
    const collected = { ...session.collected, [questionId]: value };
    // Skipped questions are pinned to their inapplicable value so the
    // submitted document is always complete.
    if (questionId === 'personal_data_status' && (value === 'none' || value === 'identifiable')) {
        collected.deidentification_confidence = NOT_APPLICABLE;
    }
    let next: WizardSession = {
        ...session,
        collected,
        questionIndex: session.questionIndex + 1,
    };
    if (wizardComplete(next)) {
        const preview = await api.previewTier(collectedAnswers(next));
        next = {
            ...next,
            previewTier: preview.tier,
            normalizationNotes: preview.normalization_notes,
            haltWarning: preview.tier === 4 && next.phase === 'initial',
        };
    }
    return next;
}

export async function submitWizard(api: ApiClient, session: WizardSession): Promise<any> {
    if (!wizardComplete(session)) {
        throw new Error('the wizard still has unanswered questions');
    }
    return api.submitClassification(session.wpId, collectedAnswers(session));
}

export function renderWizard(session: WizardSession): string {
    const question = currentQuestion(session);
    const parts: string[] = [`<section class="wizard" data-wp="${escapeHtml(session.wpId)}">`];
    if (session.haltWarning) {
        parts.push(
            '<div class="banner banner-halt" role="alert">' +
                'This work package may be tier 4. All parties should reconsider ' +
                'whether to proceed before any data is ingressed.</div>',
        );
    }
    if (question) {
        parts.push(`<h3>${escapeHtml(question.text)}</h3>`);
        if (question.help) {
            parts.push(`<p class="help">${escapeHtml(question.help)}</p>`);
        }
        if (question.type === 'boolean') {
            parts.push(
                `<label><input type="radio" name="${question.id}" value="true">Yes</label>`,
                `<label><input type="radio" name="${question.id}" value="false">No</label>`,
            );
        } else {
            for (const option of question.options ?? []) {
                parts.push(
                    `<label><input type="radio" name="${question.id}" ` +
                        `value="${escapeHtml(option.value)}">${escapeHtml(option.label)}</label>`,
                );
            }
        }
    } else {
        parts.push('<h3>Review and submit</h3>');
        if (session.previewTier !== null) {
            parts.push(
                `<p class="preview">Provisional classification: ` +
                    `<strong>tier ${session.previewTier}</strong> (computed by the server)</p>`,
            );
        }
        for (const note of session.normalizationNotes) {
            parts.push(`<p class="note">${escapeHtml(note)}</p>`);
        }
        parts.push('<button class="wizard-submit">Record my classification</button>');
    }
    parts.push('</section>');
    return parts.join('\n');
}
