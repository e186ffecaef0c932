"""Versioned machine-readable questionnaire definition.

One document drives every classification surface: the web console wizard,
the CLI and the API validation all consume this schema, so the questions
cannot drift between them.
"""

from __future__ import annotations

from .classification import (
    CommercialSensitivity,
    DeidentificationConfidence,
    PersonalDataStatus,
    PublicationIntent,
    SENSITIVITY_ORDERS,
)

QUESTIONNAIRE_VERSION = "1.0"

_LIVING_INDIVIDUAL_GUIDANCE = (
    "Treat a data subject as living unless there is reasonable evidence of "
    "death. When the subject's status is unknown, assume a lifespan of 100 "
    "years from birth; when age is unknown, assume 16 for an adult and 0 for "
    "a child unless context supports a better estimate. These assumptions "
    "are guidance for the classifier; the framework never inspects subject "
    "records itself."
)


def questionnaire_definition() -> dict:
    """The published form definition, stable under a schema version."""
    return {
        "schema_version": QUESTIONNAIRE_VERSION,
        "questions": [
            {
                "id": "personal_data_status",
                "text": (
                    "Does the work package handle, combine or generate data "
                    "relating to living individuals, and in what form?"
                ),
                "type": "choice",
                "options": [
                    {
                        "value": PersonalDataStatus.NONE.value,
                        "label": "No personal data is involved at any stage",
                    },
                    {
                        "value": PersonalDataStatus.ANONYMISED.value,
                        "label": (
                            "Derived from personal data, but no individual can "
                            "be identified under any circumstances"
                        ),
                    },
                    {
                        "value": PersonalDataStatus.PSEUDONYMISED.value,
                        "label": (
                            "Individuals could be re-identified with separately "
                            "held additional information (includes synthetic "
                            "data and models trained on personal data until "
                            "expert review says otherwise)"
                        ),
                    },
                    {
                        "value": PersonalDataStatus.IDENTIFIABLE.value,
                        "label": "Individuals are directly or indirectly identifiable",
                    },
                ],
                "help": _LIVING_INDIVIDUAL_GUIDANCE,
            },
            {
                "id": "deidentification_confidence",
                "text": (
                    "How confident are you that individuals cannot be "
                    "re-identified from the de-identified data, including by "
                    "combination with other datasets?"
                ),
                "type": "choice",
                "options": [
                    {
                        "value": DeidentificationConfidence.ABSOLUTE.value,
                        "label": "Absolute: no doubt is involved",
                    },
                    {
                        "value": DeidentificationConfidence.STRONG.value,
                        "label": "Strong",
                    },
                    {
                        "value": DeidentificationConfidence.WEAK.value,
                        "label": "Weak",
                    },
                    {
                        "value": DeidentificationConfidence.NOT_APPLICABLE.value,
                        "label": "Not applicable (no de-identified data involved)",
                    },
                ],
                "applies_when": {
                    "personal_data_status": [
                        PersonalDataStatus.ANONYMISED.value,
                        PersonalDataStatus.PSEUDONYMISED.value,
                    ]
                },
                "help": (
                    "A claim of anonymisation held with less than absolute "
                    "confidence is recorded as pseudonymisation."
                ),
            },
            {
                "id": "substantial_threat_to_subjects",
                "text": (
                    "Would disclosure pose a substantial threat to the personal "
                    "safety, health or security of the data subjects?"
                ),
                "type": "boolean",
            },
            {
                "id": "sophisticated_attacker_target",
                "text": (
                    "Is the data likely to attract targeted attack by "
                    "sophisticated, well-resourced and determined actors, such "
                    "as serious organised crime groups or state actors?"
                ),
                "type": "boolean",
            },
            {
                "id": "commercial_sensitivity",
                "text": (
                    "If commercial-in-confidence material or intellectual "
                    "property were disclosed, how severe would the legal, "
                    "commercial, political or reputational consequences be?"
                ),
                "type": "choice",
                "options": [
                    {
                        "value": CommercialSensitivity.NONE.value,
                        "label": "No commercially sensitive material is involved",
                    },
                    {
                        "value": CommercialSensitivity.VERY_LOW.value,
                        "label": "No impact or very low impact, with the agreement of all parties",
                    },
                    {
                        "value": CommercialSensitivity.LOW.value,
                        "label": "Low",
                    },
                    {
                        "value": CommercialSensitivity.NOT_LOW.value,
                        "label": "Not low: commercially, legally or politically sensitive",
                    },
                ],
            },
            {
                "id": "publication_intent",
                "text": "What is the publication standing of the information handled?",
                "type": "choice",
                "options": [
                    {
                        "value": PublicationIntent.READY_FOR_PUBLICATION.value,
                        "label": "Open information, ready for publication now",
                    },
                    {
                        "value": PublicationIntent.EVENTUAL_PUBLICATION.value,
                        "label": (
                            "Intended for eventual publication; kept private "
                            "for competitive advantage only"
                        ),
                    },
                    {
                        "value": PublicationIntent.CONFIDENTIAL.value,
                        "label": "Confidential",
                    },
                ],
            },
        ],
        "sensitivity_orders": {
            name: [v.value if hasattr(v, "value") else v for v in order]
            for name, order in SENSITIVITY_ORDERS.items()
        },
    }
