"""Work package and project lifecycle state machines.

The transition table below is the published machine-readable matrix; the
framework applies it, the docs export it, and the test suite walks it.
Guards that need store context (consensus records, signed agreements,
DPIA) are enforced by the framework before an event is applied.
"""

from __future__ import annotations

from enum import Enum
from typing import Mapping

from .domain import Role, WorkPackageState

LIFECYCLE_SCHEMA_VERSION = "1.0"


class WorkPackageEvent(str, Enum):
    RECORD_INITIAL_CLASSIFICATION = "record_initial_classification"
    DATA_INGRESSED = "data_ingressed"
    START_FULL_CLASSIFICATION = "start_full_classification"
    RECORD_CONSENSUS = "record_consensus"
    TIER4_HALT = "tier4_halt"
    ACKNOWLEDGE_HALT = "acknowledge_halt"
    START_ANALYSIS = "start_analysis"
    REQUEST_EGRESS = "request_egress"
    RESOLVE_EGRESS = "resolve_egress"
    SUPERSEDE = "supersede"
    CLOSE = "close"


_S = WorkPackageState
_E = WorkPackageEvent

_PRE_ACTIVE = (
    _S.DRAFT,
    _S.INITIAL_CLASSIFIED,
    _S.INGRESSED_TIER3,
    _S.FULL_CLASSIFICATION,
    _S.CONSENSUS_REACHED,
)

TRANSITION_TABLE: Mapping[tuple[WorkPackageState, WorkPackageEvent], WorkPackageState] = {
    (_S.DRAFT, _E.RECORD_INITIAL_CLASSIFICATION): _S.INITIAL_CLASSIFIED,
    (_S.INITIAL_CLASSIFIED, _E.DATA_INGRESSED): _S.INGRESSED_TIER3,
    (_S.INGRESSED_TIER3, _E.START_FULL_CLASSIFICATION): _S.FULL_CLASSIFICATION,
    (_S.FULL_CLASSIFICATION, _E.RECORD_CONSENSUS): _S.CONSENSUS_REACHED,
    (_S.CONSENSUS_REACHED, _E.START_ANALYSIS): _S.ACTIVE,
    (_S.ACTIVE, _E.REQUEST_EGRESS): _S.EGRESS_PENDING,
    (_S.EGRESS_PENDING, _E.RESOLVE_EGRESS): _S.ACTIVE,
    (_S.ACTIVE, _E.SUPERSEDE): _S.SUPERSEDED,
    (_S.ACTIVE, _E.CLOSE): _S.CLOSED,
    (_S.SUPERSEDED, _E.CLOSE): _S.CLOSED,
    (_S.DRAFT, _E.ACKNOWLEDGE_HALT): _S.DRAFT,
    **{(state, _E.TIER4_HALT): _S.DRAFT for state in _PRE_ACTIVE},
}

EVENT_AUTHORIZED_ROLES: Mapping[WorkPackageEvent, frozenset[Role]] = {
    _E.RECORD_INITIAL_CLASSIFICATION: frozenset(
        {Role.INVESTIGATOR, Role.PROJECT_MANAGER, Role.PROGRAMME_MANAGER}
    ),
    _E.DATA_INGRESSED: frozenset({Role.PROJECT_MANAGER, Role.PROGRAMME_MANAGER}),
    _E.START_FULL_CLASSIFICATION: frozenset(
        {Role.INVESTIGATOR, Role.PROJECT_MANAGER, Role.PROGRAMME_MANAGER}
    ),
    _E.RECORD_CONSENSUS: frozenset(
        {Role.INVESTIGATOR, Role.PROJECT_MANAGER, Role.PROGRAMME_MANAGER}
    ),
    _E.TIER4_HALT: frozenset(
        {
            Role.INVESTIGATOR,
            Role.REFEREE,
            Role.DATASET_PROVIDER_REPRESENTATIVE,
            Role.PROJECT_MANAGER,
            Role.PROGRAMME_MANAGER,
        }
    ),
    _E.ACKNOWLEDGE_HALT: frozenset({Role.PROGRAMME_MANAGER}),
    _E.START_ANALYSIS: frozenset(
        {Role.INVESTIGATOR, Role.PROJECT_MANAGER, Role.PROGRAMME_MANAGER}
    ),
    _E.REQUEST_EGRESS: frozenset({Role.INVESTIGATOR}),
    # The party completing the egress review (which can be the referee on a
    # pre-approved release) returns the package to analysis.
    _E.RESOLVE_EGRESS: frozenset(
        {Role.INVESTIGATOR, Role.REFEREE, Role.PROJECT_MANAGER, Role.PROGRAMME_MANAGER}
    ),
    _E.SUPERSEDE: frozenset({Role.PROJECT_MANAGER, Role.PROGRAMME_MANAGER}),
    _E.CLOSE: frozenset({Role.PROJECT_MANAGER, Role.PROGRAMME_MANAGER}),
}


class IllegalTransitionError(Exception):
    def __init__(self, state: WorkPackageState, event: WorkPackageEvent) -> None:
        super().__init__(f"event {event.value} is illegal in state {state.value}")
        self.state = state
        self.event = event


def next_state(state: WorkPackageState, event: WorkPackageEvent) -> WorkPackageState:
    try:
        return TRANSITION_TABLE[(state, event)]
    except KeyError:
        raise IllegalTransitionError(state, event) from None


def legal_events(state: WorkPackageState) -> tuple[WorkPackageEvent, ...]:
    return tuple(e for (s, e) in TRANSITION_TABLE if s is state)


def transition_matrix_document() -> dict:
    """The lifecycle as a versioned machine-readable matrix."""
    return {
        "schema_version": LIFECYCLE_SCHEMA_VERSION,
        "states": [s.value for s in WorkPackageState],
        "events": [e.value for e in WorkPackageEvent],
        "transitions": sorted(
            (
                {"from": s.value, "event": e.value, "to": t.value}
                for (s, e), t in TRANSITION_TABLE.items()
            ),
            key=lambda row: (row["from"], row["event"]),
        ),
        "authorized_roles": {
            e.value: sorted(r.value for r in roles)
            for e, roles in EVENT_AUTHORIZED_ROLES.items()
        },
    }
