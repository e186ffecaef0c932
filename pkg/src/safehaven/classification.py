"""Tier selection, per-classifier submissions and consensus resolution.

The decision procedure is an ordered rule list, most sensitive first, so
that erring on the side of caution is structural and monotonicity over
the questionnaire space is provable by exhaustive sweep.

Sensitivity orders used for monotonicity (least to most sensitive):

====================== =====================================================
personal_data_status   none < anonymised < pseudonymised < identifiable
deidentification       absolute < strong < weak   (not_applicable excluded)
threat / attacker      False < True
commercial_sensitivity none < very_low < low < not_low
publication_intent     ready_for_publication < eventual_publication
                       < confidential
====================== =====================================================
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from datetime import datetime
from enum import Enum
from typing import Iterable, Iterator, Mapping

from .domain import Role, Tier, WorkPackage


class PersonalDataStatus(str, Enum):
    NONE = "none"
    ANONYMISED = "anonymised"
    PSEUDONYMISED = "pseudonymised"
    IDENTIFIABLE = "identifiable"


class DeidentificationConfidence(str, Enum):
    ABSOLUTE = "absolute"
    STRONG = "strong"
    WEAK = "weak"
    NOT_APPLICABLE = "not_applicable"


class CommercialSensitivity(str, Enum):
    NONE = "none"
    VERY_LOW = "very_low"
    LOW = "low"
    NOT_LOW = "not_low"


class PublicationIntent(str, Enum):
    READY_FOR_PUBLICATION = "ready_for_publication"
    EVENTUAL_PUBLICATION = "eventual_publication"
    CONFIDENTIAL = "confidential"


SENSITIVITY_ORDERS: Mapping[str, tuple] = {
    "personal_data_status": (
        PersonalDataStatus.NONE,
        PersonalDataStatus.ANONYMISED,
        PersonalDataStatus.PSEUDONYMISED,
        PersonalDataStatus.IDENTIFIABLE,
    ),
    "deidentification_confidence": (
        DeidentificationConfidence.ABSOLUTE,
        DeidentificationConfidence.STRONG,
        DeidentificationConfidence.WEAK,
    ),
    "substantial_threat_to_subjects": (False, True),
    "sophisticated_attacker_target": (False, True),
    "commercial_sensitivity": (
        CommercialSensitivity.NONE,
        CommercialSensitivity.VERY_LOW,
        CommercialSensitivity.LOW,
        CommercialSensitivity.NOT_LOW,
    ),
    "publication_intent": (
        PublicationIntent.READY_FOR_PUBLICATION,
        PublicationIntent.EVENTUAL_PUBLICATION,
        PublicationIntent.CONFIDENTIAL,
    ),
}

_NO_CONFIDENCE_STATUSES = frozenset(
    {PersonalDataStatus.NONE, PersonalDataStatus.IDENTIFIABLE}
)


@dataclass(frozen=True)
class QuestionnaireAnswers:
    personal_data_status: PersonalDataStatus
    deidentification_confidence: DeidentificationConfidence
    substantial_threat_to_subjects: bool
    sophisticated_attacker_target: bool
    commercial_sensitivity: CommercialSensitivity
    publication_intent: PublicationIntent


class InvalidAnswersError(ValueError):
    """Questionnaire answers violate their declared invariants."""


def validate_answers(answers: QuestionnaireAnswers) -> tuple[str, ...]:
    problems: list[str] = []
    status = answers.personal_data_status
    confidence = answers.deidentification_confidence
    if status in _NO_CONFIDENCE_STATUSES:
        if confidence is not DeidentificationConfidence.NOT_APPLICABLE:
            problems.append(
                "deidentification confidence applies only to anonymised or "
                "pseudonymised data"
            )
    elif confidence is DeidentificationConfidence.NOT_APPLICABLE:
        problems.append(
            "anonymised or pseudonymised data requires a confidence level"
        )
    if (
        status is PersonalDataStatus.ANONYMISED
        and confidence
        not in (DeidentificationConfidence.ABSOLUTE, DeidentificationConfidence.NOT_APPLICABLE)
    ):
        problems.append(
            "anonymised requires absolute confidence; anything less is "
            "pseudonymised (normalize before submitting)"
        )
    return tuple(problems)


def normalize_answers(
    answers: QuestionnaireAnswers,
) -> tuple[QuestionnaireAnswers, tuple[str, ...]]:
    """Apply input normalization, reporting what changed.

    A claim of anonymisation held with less than absolute confidence is
    recorded as pseudonymisation; genuinely anonymised data is rarer than
    most classifiers assume, and the doubt itself is the signal.
    """
    notes: list[str] = []
    if (
        answers.personal_data_status is PersonalDataStatus.ANONYMISED
        and answers.deidentification_confidence is not DeidentificationConfidence.ABSOLUTE
    ):
        answers = replace(answers, personal_data_status=PersonalDataStatus.PSEUDONYMISED)
        notes.append(
            "anonymised with less than absolute confidence recorded as pseudonymised"
        )
    return answers, tuple(notes)


def decide_tier(answers: QuestionnaireAnswers) -> Tier:
    """Map validated answers to the unique tier, most sensitive rule first."""
    problems = validate_answers(answers)
    if problems:
        raise InvalidAnswersError("; ".join(problems))

    if answers.substantial_threat_to_subjects or answers.sophisticated_attacker_target:
        return Tier.TIER_4

    pseudonymised = answers.personal_data_status is PersonalDataStatus.PSEUDONYMISED
    if (
        answers.personal_data_status is PersonalDataStatus.IDENTIFIABLE
        or (pseudonymised and answers.deidentification_confidence is DeidentificationConfidence.WEAK)
        or answers.commercial_sensitivity is CommercialSensitivity.NOT_LOW
    ):
        return Tier.TIER_3

    # Pseudonymised data is still personal data and never drops below this
    # tier; strong or absolute confidence in the pseudonymisation lands here.
    if pseudonymised or answers.commercial_sensitivity is CommercialSensitivity.LOW:
        return Tier.TIER_2

    if (
        answers.publication_intent is not PublicationIntent.READY_FOR_PUBLICATION
        or answers.commercial_sensitivity is CommercialSensitivity.VERY_LOW
    ):
        return Tier.TIER_1

    return Tier.TIER_0


def iter_valid_answers() -> Iterator[QuestionnaireAnswers]:
    """Enumerate the full finite space of invariant-satisfying answers."""
    for status, confidence, threat, attacker, commercial, publication in itertools.product(
        PersonalDataStatus,
        DeidentificationConfidence,
        (False, True),
        (False, True),
        CommercialSensitivity,
        PublicationIntent,
    ):
        candidate = QuestionnaireAnswers(
            personal_data_status=status,
            deidentification_confidence=confidence,
            substantial_threat_to_subjects=threat,
            sophisticated_attacker_target=attacker,
            commercial_sensitivity=commercial,
            publication_intent=publication,
        )
        if not validate_answers(candidate):
            yield candidate


def sensitivity_increases(
    answers: QuestionnaireAnswers,
) -> Iterator[QuestionnaireAnswers]:
    """Yield valid variants with exactly one field strictly more sensitive."""
    for field_name, order in SENSITIVITY_ORDERS.items():
        current = getattr(answers, field_name)
        if current not in order:
            continue
        position = order.index(current)
        for higher in order[position + 1 :]:
            candidate = replace(answers, **{field_name: higher})
            if not validate_answers(candidate):
                yield candidate


@dataclass(frozen=True)
class TierDecision:
    work_package_id: str
    classifier_user_id: str
    classifier_role: Role
    answers: QuestionnaireAnswers
    tier: Tier
    timestamp: datetime
    # Provider the classifier represents, for representative decisions.
    provider_id: str | None = None


def make_decision(
    wp_id: str,
    user_id: str,
    role: Role,
    answers: QuestionnaireAnswers,
    timestamp: datetime,
    provider_id: str | None = None,
) -> TierDecision:
    """Build a decision whose stored tier is always the computed one."""
    return TierDecision(
        work_package_id=wp_id,
        classifier_user_id=user_id,
        classifier_role=role,
        answers=answers,
        tier=decide_tier(answers),
        timestamp=timestamp,
        provider_id=provider_id,
    )


@dataclass(frozen=True)
class RequiredClassifier:
    role: Role
    provider_id: str | None = None


def required_classifiers(
    wp: WorkPackage,
    provisional_tier: Tier,
    providers_by_dataset: Mapping[str, str],
    *,
    anonymised_from_personal: bool = False,
) -> frozenset[RequiredClassifier]:
    """The set of parties whose agreement is needed for this work package.

    The investigator and one representative per distinct provider always
    classify; an independent referee joins at tier 2 and above, and also
    for data anonymised from personal data even when it lands at tier 0/1.
    """
    if not wp.dataset_ids:
        raise ValueError("work package has no datasets")
    required = {RequiredClassifier(Role.INVESTIGATOR)}
    for dataset_id in wp.dataset_ids:
        try:
            provider_id = providers_by_dataset[dataset_id]
        except KeyError:
            raise KeyError(f"unknown dataset {dataset_id}") from None
        required.add(
            RequiredClassifier(Role.DATASET_PROVIDER_REPRESENTATIVE, provider_id)
        )
    if provisional_tier >= Tier.TIER_2 or anonymised_from_personal:
        required.add(RequiredClassifier(Role.REFEREE))
    return frozenset(required)


class ConsensusKind(str, Enum):
    AGREED = "agreed"
    DISAGREEMENT = "disagreement"
    PROCEED_AT_MAX = "proceed_at_max"
    TIER4_HALT = "tier4_halt"


@dataclass(frozen=True)
class ConsensusOutcome:
    kind: ConsensusKind
    tier: Tier | None = None
    dissenting_decisions: tuple[TierDecision, ...] = ()
    missing: tuple[RequiredClassifier, ...] = ()


def resolve_consensus(
    decisions: Iterable[TierDecision],
    required: frozenset[RequiredClassifier],
    proceed_without_consensus: bool = False,
    *,
    halt_acknowledged: bool = False,
) -> ConsensusOutcome:
    """Resolve submitted decisions against the required classifier set.

    Any tier-4 decision halts the process for programme manager review
    unless a previous halt on this work package was acknowledged; the
    remaining outcomes are unanimity, an explicit proceed-at-maximum, or
    a disagreement listing either the missing parties or every dissenting
    decision.
    """
    decisions = tuple(decisions)
    wp_ids = {d.work_package_id for d in decisions}
    if len(wp_ids) > 1:
        raise ValueError(f"decisions span multiple work packages: {sorted(wp_ids)}")

    if not halt_acknowledged and any(d.tier is Tier.TIER_4 for d in decisions):
        return ConsensusOutcome(kind=ConsensusKind.TIER4_HALT)

    covered = set()
    for decision in decisions:
        if decision.classifier_role is Role.DATASET_PROVIDER_REPRESENTATIVE:
            covered.add(
                RequiredClassifier(decision.classifier_role, decision.provider_id)
            )
        else:
            covered.add(RequiredClassifier(decision.classifier_role))
    missing = tuple(
        sorted(required - covered, key=lambda r: (r.role.value, r.provider_id or ""))
    )
    if missing:
        return ConsensusOutcome(kind=ConsensusKind.DISAGREEMENT, missing=missing)

    tiers = {d.tier for d in decisions}
    if len(tiers) == 1:
        return ConsensusOutcome(kind=ConsensusKind.AGREED, tier=tiers.pop())
    if proceed_without_consensus:
        return ConsensusOutcome(kind=ConsensusKind.PROCEED_AT_MAX, tier=max(tiers))
    return ConsensusOutcome(
        kind=ConsensusKind.DISAGREEMENT, dissenting_decisions=decisions
    )
