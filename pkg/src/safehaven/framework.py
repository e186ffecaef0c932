"""Stateful orchestration of the governance workflows.

Every mutating operation here is authorization-checked, guard-checked,
written through the versioned store, and recorded in the hash-chained
audit log. Platform-affecting operations additionally require a
credential forwarded from the acting user; the service never acts with
authority of its own.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone
from typing import Any, Callable, Iterable, Protocol

from . import lifecycle
from .audit import AuditLog, EntityRef
from .blueprint import (
    Blueprint,
    blueprint_to_dict,
    plan_derived_environment,
    plan_environment,
)
from .canonical import to_jsonable
from .classification import (
    CommercialSensitivity,
    ConsensusKind,
    ConsensusOutcome,
    DeidentificationConfidence,
    PersonalDataStatus,
    PublicationIntent,
    QuestionnaireAnswers,
    RequiredClassifier,
    TierDecision,
    make_decision,
    normalize_answers,
    required_classifiers,
    resolve_consensus,
)
from .config import ServiceConfig
from .domain import (
    Dataset,
    DatasetProvider,
    DerivationLink,
    Environment,
    EnvironmentState,
    Membership,
    MembershipStatus,
    Project,
    ProjectState,
    Role,
    Tier,
    User,
    Volume,
    VolumeKind,
    VolumeMode,
    VolumeState,
    WorkPackage,
    WorkPackageState,
    validate_entity,
)
from .errors import (
    AuthorizationError,
    ConflictError,
    GuardError,
    InvalidInputError,
    NotFound,
    SafeHavenError,
)
from .ids import new_id
from .ingress import (
    EgressIntent,
    IngressToken,
    IntegrityRecord,
    IntegrityStatus,
    PreApprovedRelease,
    PublishAuthorization,
    ReleaseAuthorization,
    ReleaseGrant,
    Signoff,
    SoftwareIngressRequest,
    SoftwareReviewState,
    TokenAccessError,
    compute_volume_digest,
    grant_allows,
    signoffs_satisfy,
    token_active,
)
from .lifecycle import WorkPackageEvent
from .platform_driver import (
    ForwardedCredential,
    PlatformDriver,
    SimulatorDriver,
)
from .policy import (
    DeviceClass,
    NetworkClass,
    check_access,
    resolve_policy,
)
from .store import EntityStore, NotFoundError, VersionConflictError, register_entity

BOOTSTRAP_PROGRAMME_MANAGER_ID = "user-bootstrap-programme-manager"
SCHEDULER_ACTOR_ID = "system-scheduler"


class Notifier(Protocol):
    def notify(self, user_ids: Iterable[str], subject: str, body: str) -> None: ...


@dataclass(frozen=True)
class Notification:
    user_ids: tuple[str, ...]
    subject: str
    body: str


class CollectingNotifier:
    """Default notifier; keeps messages in memory for inspection."""

    def __init__(self) -> None:
        self.messages: list[Notification] = []

    def notify(self, user_ids: Iterable[str], subject: str, body: str) -> None:
        self.messages.append(Notification(tuple(user_ids), subject, body))


# Store records owned by the framework ---------------------------------------


@dataclass(frozen=True)
class ClassificationRecord:
    id: str  # work package id
    phase: str = "initial"
    decisions: tuple[TierDecision, ...] = ()
    archived_decisions: tuple[TierDecision, ...] = ()
    outcome: ConsensusOutcome | None = None


@dataclass(frozen=True)
class VolumeContents:
    id: str  # volume id
    files: dict[str, str]  # path -> hex content


@dataclass(frozen=True)
class MountAuthorization:
    id: str
    work_package_id: str
    dataset_id: str
    authorized_by: str
    timestamp: datetime


@dataclass(frozen=True)
class EgressRequest:
    id: str
    work_package_id: str
    output_volume_id: str
    analysis_script_ref: str
    intent: EgressIntent
    path: str  # "pre_approved" | "derived"
    derived_work_package_id: str | None = None
    release_id: str | None = None
    resolved: bool = False


@dataclass(frozen=True)
class PreApprovedArtifact:
    id: str
    artifact_ref: str
    registered_by: str


@dataclass(frozen=True)
class ExposureWindow:
    id: str
    view_id: str
    ip_range: str
    opens_at: datetime
    closes_at: datetime
    opened_by: str


@dataclass(frozen=True)
class BlueprintRecord:
    id: str
    document: dict


for _name, _cls in {
    "classification_record": ClassificationRecord,
    "volume_contents": VolumeContents,
    "mount_authorization": MountAuthorization,
    "ingress_token": IngressToken,
    "integrity_record": IntegrityRecord,
    "software_ingress_request": SoftwareIngressRequest,
    "egress_request": EgressRequest,
    "pre_approved_release": PreApprovedRelease,
    "publish_authorization": PublishAuthorization,
    "release_authorization": ReleaseAuthorization,
    "release_grant": ReleaseGrant,
    "pre_approved_artifact": PreApprovedArtifact,
    "exposure_window": ExposureWindow,
    "blueprint": BlueprintRecord,
}.items():
    register_entity(_name, _cls)


def _utc_now() -> datetime:
    return datetime.now(timezone.utc)


class ManagementFramework:
    """The management application core, driving all governance actions."""

    def __init__(
        self,
        *,
        store: EntityStore | None = None,
        audit_log: AuditLog | None = None,
        clock: Callable[[], datetime] | None = None,
        driver: PlatformDriver | None = None,
        notifier: Notifier | None = None,
        config: ServiceConfig | None = None,
    ) -> None:
        self.store = store or EntityStore()
        self.clock = clock or _utc_now
        self.audit = audit_log or AuditLog(clock=self.clock)
        self.driver = driver or SimulatorDriver()
        self.notifier = notifier or CollectingNotifier()
        self.config = config or ServiceConfig()
        self._bootstrap()

    # -- plumbing -----------------------------------------------------------

    def _bootstrap(self) -> None:
        if not self.store.exists("user", BOOTSTRAP_PROGRAMME_MANAGER_ID):
            user = User(
                id=BOOTSTRAP_PROGRAMME_MANAGER_ID,
                display_name="Bootstrap Programme Manager",
                training_certified=True,
                directory_credential_ref="directory:bootstrap-programme-manager",
                system_roles=frozenset({Role.PROGRAMME_MANAGER}),
            )
            self.store.put(user, 0)
            self._audit(
                BOOTSTRAP_PROGRAMME_MANAGER_ID, "user.bootstrap", "user", user.id, 1
            )

    def _now(self) -> datetime:
        return self.clock()

    def _audit(
        self,
        actor_id: str,
        action: str,
        entity_type: str,
        entity_id: str,
        version: int,
        payload: Any = None,
    ) -> None:
        self.audit.append(
            actor_id, action, EntityRef(entity_type, entity_id, version), payload
        )

    def _put_new(self, actor: str, action: str, type_name: str, entity: Any, payload: Any = None) -> None:
        report = validate_entity(entity)
        if not report.ok():
            raise InvalidInputError("; ".join(report.violations))
        version = self.store.put(entity, 0)
        self._audit(actor, action, type_name, entity.id, version, payload)

    def _put_update(
        self,
        actor: str,
        action: str,
        type_name: str,
        entity: Any,
        expected_version: int,
        payload: Any = None,
    ) -> None:
        report = validate_entity(entity)
        if not report.ok():
            raise InvalidInputError("; ".join(report.violations))
        version = self.store.put(entity, expected_version)
        self._audit(actor, action, type_name, entity.id, version, payload)

    def _get(self, type_name: str, entity_id: str):
        try:
            return self.store.get(type_name, entity_id)
        except NotFoundError:
            raise NotFound(f"{type_name} {entity_id} not found") from None

    # -- role resolution ----------------------------------------------------

    def _user(self, user_id: str) -> User:
        return self._get("user", user_id)[0]

    def _is_programme_manager(self, user_id: str) -> bool:
        return Role.PROGRAMME_MANAGER in self._user(user_id).system_roles

    def _is_system_manager(self, user_id: str) -> bool:
        return Role.SYSTEM_MANAGER in self._user(user_id).system_roles

    def _project_roles(self, project: Project, user_id: str) -> frozenset[Role]:
        roles = set(project.roles_of(user_id))
        if self._is_programme_manager(user_id):
            roles.add(Role.PROGRAMME_MANAGER)
        if self._is_system_manager(user_id):
            roles.add(Role.SYSTEM_MANAGER)
        return frozenset(roles)

    def _providers_represented_by(self, user_id: str) -> set[str]:
        return {
            provider.id
            for provider, _ in self.store.list("dataset_provider")
            if provider.representative_user_id == user_id
        }

    def _providers_by_dataset(self, wp: WorkPackage) -> dict[str, str]:
        mapping = {}
        for dataset_id in wp.dataset_ids:
            dataset = self._get("dataset", dataset_id)[0]
            mapping[dataset_id] = dataset.provider_id
        return mapping

    def _require_roles(
        self, project: Project, user_id: str, allowed: frozenset[Role], action: str
    ) -> frozenset[Role]:
        roles = self._project_roles(project, user_id)
        if not roles & allowed:
            raise AuthorizationError(
                f"{action} requires one of: {sorted(r.value for r in allowed)}"
            )
        return roles

    # -- users, providers, datasets ------------------------------------------

    def register_user(
        self,
        actor: str,
        display_name: str,
        *,
        training_certified: bool = False,
        system_roles: Iterable[Role] = (),
        guest: bool = False,
        directory_credential_ref: str | None = None,
    ) -> User:
        if not self._is_programme_manager(actor):
            raise AuthorizationError("only programme managers may invite new users")
        user = User(
            id=new_id("user"),
            display_name=display_name,
            training_certified=training_certified,
            directory_credential_ref=directory_credential_ref
            or f"directory:{display_name.lower().replace(' ', '-')}",
            system_roles=frozenset(system_roles),
            guest=guest,
        )
        self._put_new(actor, "user.register", "user", user)
        return user

    def certify_training(self, user_id: str, actor: str) -> User:
        if actor != user_id and not self._is_programme_manager(actor):
            raise AuthorizationError("training is certified by the user themselves")
        user, version = self._get("user", user_id)
        user = replace(user, training_certified=True)
        self._put_update(actor, "user.certify_training", "user", user, version)
        return user

    def register_provider(
        self, actor: str, name: str, representative_user_id: str
    ) -> DatasetProvider:
        if not self._is_programme_manager(actor):
            raise AuthorizationError("only programme managers register providers")
        self._user(representative_user_id)
        provider = DatasetProvider(
            id=new_id("provider"), name=name, representative_user_id=representative_user_id
        )
        self._put_new(actor, "provider.register", "dataset_provider", provider)
        return provider

    def change_provider_representative(
        self, provider_id: str, new_representative_id: str, actor: str
    ) -> DatasetProvider:
        if not self._is_programme_manager(actor):
            raise AuthorizationError("only programme managers change representatives")
        self._user(new_representative_id)
        provider, version = self._get("dataset_provider", provider_id)
        previous = provider.representative_user_id
        provider = replace(provider, representative_user_id=new_representative_id)
        self._put_update(
            actor,
            "provider.change_representative",
            "dataset_provider",
            provider,
            version,
            payload={"from": previous, "to": new_representative_id},
        )
        return provider

    def register_dataset(
        self,
        actor: str,
        provider_id: str,
        provider_hash: str,
        *,
        contractual_terms: str = "",
        lawful_basis_certified: bool = False,
    ) -> Dataset:
        if not self._is_programme_manager(actor):
            raise AuthorizationError("only programme managers register datasets")
        self._get("dataset_provider", provider_id)
        dataset = Dataset(
            id=new_id("dataset"),
            provider_id=provider_id,
            provider_hash=provider_hash,
            contractual_terms=contractual_terms,
            lawful_basis_certified=lawful_basis_certified,
        )
        self._put_new(actor, "dataset.register", "dataset", dataset)
        return dataset

    def record_sharing_agreement(
        self, dataset_id: str, doc_ref: str, actor: str
    ) -> Dataset:
        dataset, version = self._get("dataset", dataset_id)
        provider = self._get("dataset_provider", dataset.provider_id)[0]
        if actor != provider.representative_user_id and not self._is_programme_manager(actor):
            raise AuthorizationError(
                "sharing agreements are recorded by the provider representative "
                "or a programme manager"
            )
        if not doc_ref:
            raise InvalidInputError("an executed agreement document reference is required")
        dataset = replace(dataset, sharing_agreement_doc_ref=doc_ref)
        self._put_update(actor, "dataset.sharing_agreement", "dataset", dataset, version)
        return dataset

    def certify_lawful_basis(self, dataset_id: str, actor: str) -> Dataset:
        dataset, version = self._get("dataset", dataset_id)
        provider = self._get("dataset_provider", dataset.provider_id)[0]
        if actor != provider.representative_user_id:
            raise AuthorizationError(
                "lawful basis is certified by the provider representative"
            )
        dataset = replace(dataset, lawful_basis_certified=True)
        self._put_update(actor, "dataset.lawful_basis", "dataset", dataset, version)
        return dataset

    # -- projects and membership ----------------------------------------------

    def create_project(
        self, actor: str, investigator_id: str, project_manager_id: str
    ) -> Project:
        if not self._is_programme_manager(actor):
            raise AuthorizationError("projects are created by a programme manager")
        investigator = self._user(investigator_id)
        self._user(project_manager_id)
        if not investigator.training_certified:
            raise GuardError("the investigator must certify training first")
        project = Project(
            id=new_id("project"),
            programme_manager_id=actor,
            project_manager_id=project_manager_id,
            investigator_id=investigator_id,
        )
        self._put_new(actor, "project.create", "project", project)
        return project

    def _project_max_tier(self, project: Project) -> Tier:
        """Highest tier any work package of the project operates at."""
        highest = Tier.TIER_0
        for wp_id in project.work_package_ids:
            wp = self._get("work_package", wp_id)[0]
            candidates = [t for t in (wp.final_tier, wp.preliminary_tier) if t is not None]
            # Between initial ingress and full classification the data sits
            # in a tier-3 environment regardless of the eventual tier.
            if wp.state in (
                WorkPackageState.INGRESSED_TIER3,
                WorkPackageState.FULL_CLASSIFICATION,
            ):
                candidates.append(Tier.TIER_3)
            for tier in candidates:
                highest = max(highest, tier)
        return highest

    def assign_user(
        self, project_id: str, user_id: str, role: Role, actor: str
    ) -> Membership:
        project, version = self._get("project", project_id)
        if project.state is ProjectState.CLOSED:
            raise GuardError("closed projects accept no new members")
        if role in (Role.PROGRAMME_MANAGER, Role.SYSTEM_MANAGER):
            raise InvalidInputError(f"{role.value} is not a project-scoped role")
        actor_roles = self._project_roles(project, actor)
        if Role.PROGRAMME_MANAGER not in actor_roles and Role.PROJECT_MANAGER not in actor_roles:
            raise AuthorizationError("members are assigned by a project or programme manager")
        user = self._user(user_id)
        if not user.training_certified:
            raise GuardError("users must certify data-handling training before joining")
        if any(m.user_id == user_id and m.role == role for m in project.memberships):
            raise ConflictError(f"{user_id} already holds role {role.value}")
        if role is Role.REFEREE:
            team = {project.investigator_id} | {
                m.user_id
                for m in project.memberships
                if m.role in (Role.RESEARCHER, Role.INVESTIGATOR)
            }
            if user_id in team:
                raise GuardError(
                    "a referee must be independent of the project's research team"
                )
        needs_counter_approval = (
            self._project_max_tier(project) >= Tier.TIER_3
            and role in (Role.RESEARCHER, Role.REFEREE, Role.INVESTIGATOR)
        )
        membership = Membership(
            user_id=user_id,
            role=role,
            status=MembershipStatus.PENDING_COUNTER_APPROVAL
            if needs_counter_approval
            else MembershipStatus.ACTIVE,
        )
        project = replace(project, memberships=project.memberships + (membership,))
        self._put_update(
            actor,
            "project.assign_user",
            "project",
            project,
            version,
            payload={"user_id": user_id, "role": role.value, "status": membership.status.value},
        )
        return membership

    def counter_approve_member(
        self, project_id: str, user_id: str, actor: str
    ) -> Membership:
        project, version = self._get("project", project_id)
        rep_providers = self._providers_represented_by(actor)
        project_providers: set[str] = set()
        for wp_id in project.work_package_ids:
            wp = self._get("work_package", wp_id)[0]
            project_providers.update(self._providers_by_dataset(wp).values())
        if not rep_providers & project_providers:
            raise AuthorizationError(
                "counter-approval comes from a dataset provider representative "
                "for this project"
            )
        updated: list[Membership] = []
        approved: Membership | None = None
        for m in project.memberships:
            if m.user_id == user_id and m.status is MembershipStatus.PENDING_COUNTER_APPROVAL:
                approved = replace(m, status=MembershipStatus.ACTIVE)
                updated.append(approved)
            else:
                updated.append(m)
        if approved is None:
            raise NotFound(f"no pending membership for {user_id}")
        project = replace(project, memberships=tuple(updated))
        self._put_update(
            actor,
            "project.counter_approve",
            "project",
            project,
            version,
            payload={"user_id": user_id},
        )
        return approved

    # -- work packages ----------------------------------------------------------

    def create_work_package(
        self,
        project_id: str,
        dataset_ids: Iterable[str],
        intended_analysis: str,
        actor: str,
        *,
        expected_outputs: str = "",
        intended_tools: str = "",
        declared_future_dataset_ids: Iterable[str] = (),
        pre_approved_outputs: Iterable[str] = (),
        supersedes: str | None = None,
    ) -> WorkPackage:
        project = self._get("project", project_id)[0]
        self._require_roles(
            project,
            actor,
            frozenset({Role.PROJECT_MANAGER, Role.PROGRAMME_MANAGER}),
            "work package creation",
        )
        return self._create_work_package(
            project_id,
            dataset_ids,
            intended_analysis,
            actor,
            expected_outputs=expected_outputs,
            intended_tools=intended_tools,
            declared_future_dataset_ids=declared_future_dataset_ids,
            pre_approved_outputs=pre_approved_outputs,
            supersedes=supersedes,
        )

    def _create_work_package(
        self,
        project_id: str,
        dataset_ids: Iterable[str],
        intended_analysis: str,
        actor: str,
        *,
        expected_outputs: str = "",
        intended_tools: str = "",
        declared_future_dataset_ids: Iterable[str] = (),
        pre_approved_outputs: Iterable[str] = (),
        derived_from: DerivationLink | None = None,
        supersedes: str | None = None,
    ) -> WorkPackage:
        project, project_version = self._get("project", project_id)
        if project.state is ProjectState.CLOSED:
            raise GuardError("closed projects accept no new work packages")
        dataset_ids = frozenset(dataset_ids)
        if not dataset_ids:
            raise InvalidInputError("a work package needs at least one dataset")
        for dataset_id in dataset_ids | frozenset(declared_future_dataset_ids):
            if not self.store.exists("dataset", dataset_id):
                raise NotFound(f"dataset {dataset_id} not found")
        wp = WorkPackage(
            id=new_id("wp"),
            project_id=project_id,
            dataset_ids=dataset_ids,
            intended_analysis=intended_analysis,
            expected_outputs=expected_outputs,
            intended_tools=intended_tools,
            declared_future_dataset_ids=frozenset(declared_future_dataset_ids),
            pre_approved_outputs=tuple(pre_approved_outputs),
            derived_from=derived_from,
            supersedes=supersedes,
        )
        self._put_new(actor, "work_package.create", "work_package", wp)
        self.store.put(ClassificationRecord(id=wp.id), 0)
        project = replace(
            project, work_package_ids=project.work_package_ids + (wp.id,)
        )
        self._put_update(
            actor, "project.attach_work_package", "project", project, project_version,
            payload={"work_package_id": wp.id},
        )
        return wp

    def _wp_and_project(self, wp_id: str) -> tuple[WorkPackage, int, Project]:
        wp, version = self._get("work_package", wp_id)
        project = self._get("project", wp.project_id)[0]
        return wp, version, project

    def transition_work_package(
        self,
        wp_id: str,
        event: WorkPackageEvent,
        actor: str,
        *,
        credential: ForwardedCredential | None = None,
    ) -> WorkPackage:
        """Apply a lifecycle event; illegal transitions change nothing."""
        wp, version, project = self._wp_and_project(wp_id)
        if project.state is ProjectState.CLOSED:
            raise GuardError("closed projects accept no mutating events")
        self._require_roles(
            project, actor, lifecycle.EVENT_AUTHORIZED_ROLES[event], event.value
        )
        new_state = lifecycle.next_state(wp.state, event)
        self._check_event_guards(wp, event)
        updated = replace(wp, state=new_state)
        if event is WorkPackageEvent.TIER4_HALT:
            updated = replace(updated, halt_flag=True, preliminary_tier=None, final_tier=None)
        if event is WorkPackageEvent.ACKNOWLEDGE_HALT:
            updated = replace(updated, halt_flag=False, halt_acknowledged=True)
        self._put_update(
            actor,
            f"work_package.{event.value}",
            "work_package",
            updated,
            version,
            payload={"from": wp.state.value, "to": new_state.value},
        )
        if event is WorkPackageEvent.START_ANALYSIS:
            self._activate_environments(updated, actor)
        return updated

    def _supersession_chain(self, wp: WorkPackage) -> set[str]:
        ids = {wp.id}
        current = wp.supersedes
        while current is not None and current not in ids:
            ids.add(current)
            current = self._get("work_package", current)[0].supersedes
        return ids

    def _check_event_guards(self, wp: WorkPackage, event: WorkPackageEvent) -> None:
        if event is WorkPackageEvent.DATA_INGRESSED:
            if wp.derived_from is not None:
                # Derived work packages mount an already-sealed egress volume.
                return
            # Deposits made under a superseded predecessor still count.
            eligible = self._supersession_chain(wp)
            sealed = {
                v.dataset_id
                for v, _ in self.store.list("volume")
                if v.work_package_id in eligible
                and v.kind is VolumeKind.SECURE_DATA
                and v.state is VolumeState.SEALED
            }
            missing = wp.dataset_ids - sealed
            if missing:
                raise GuardError(
                    f"datasets not yet deposited and sealed: {sorted(missing)}"
                )
        elif event is WorkPackageEvent.ACKNOWLEDGE_HALT:
            if not wp.halt_flag:
                raise GuardError("no halt to acknowledge")
        elif event is WorkPackageEvent.RECORD_CONSENSUS:
            record = self._classification_record(wp.id)
            if (
                record.outcome is None
                or record.phase != "full"
                or record.outcome.kind
                not in (ConsensusKind.AGREED, ConsensusKind.PROCEED_AT_MAX)
            ):
                raise GuardError("no agreed consensus is recorded for this work package")
        elif event is WorkPackageEvent.START_ANALYSIS:
            record = self._classification_record(wp.id)
            if record.outcome is None or record.outcome.kind not in (
                ConsensusKind.AGREED,
                ConsensusKind.PROCEED_AT_MAX,
            ):
                raise GuardError("analysis requires a recorded consensus")
            if wp.final_tier is None:
                raise GuardError("analysis requires an agreed tier")
            for dataset_id in sorted(wp.dataset_ids):
                dataset = self._get("dataset", dataset_id)[0]
                if not dataset.sharing_agreement_doc_ref:
                    raise GuardError(
                        f"dataset {dataset_id} has no signed sharing agreement"
                    )
            if wp.personal_data and not wp.dpia_ref:
                raise GuardError(
                    "personal-data work packages require a recorded DPIA before analysis"
                )
        elif event is WorkPackageEvent.CLOSE:
            for request, _ in self.store.list("egress_request"):
                if request.work_package_id == wp.id and not request.resolved:
                    raise GuardError("work package has unresolved egress requests")

    def set_dpia(self, wp_id: str, doc_ref: str, actor: str) -> WorkPackage:
        wp, version, project = self._wp_and_project(wp_id)
        self._require_roles(
            project,
            actor,
            frozenset({Role.PROJECT_MANAGER, Role.PROGRAMME_MANAGER}),
            "recording a DPIA",
        )
        wp = replace(wp, dpia_ref=doc_ref)
        self._put_update(actor, "work_package.dpia", "work_package", wp, version)
        return wp

    def set_ethics_approval(self, wp_id: str, doc_ref: str, actor: str) -> WorkPackage:
        wp, version, project = self._wp_and_project(wp_id)
        self._require_roles(
            project,
            actor,
            frozenset({Role.PROJECT_MANAGER, Role.PROGRAMME_MANAGER}),
            "recording ethics approval",
        )
        wp = replace(wp, ethics_approval_ref=doc_ref)
        self._put_update(actor, "work_package.ethics", "work_package", wp, version)
        return wp

    def supersede_work_package(
        self,
        wp_id: str,
        actor: str,
        *,
        additional_dataset_ids: Iterable[str] = (),
        intended_analysis: str | None = None,
    ) -> tuple[WorkPackage, WorkPackage]:
        """Replace an active work package with a fresh one to be classified.

        Any change of intent or data spawns a new work package; adding a
        pre-declared dataset still goes through classification again.
        """
        old = self.transition_work_package(wp_id, WorkPackageEvent.SUPERSEDE, actor)
        old_version = self._get("work_package", wp_id)[1]
        new = self.create_work_package(
            old.project_id,
            old.dataset_ids | frozenset(additional_dataset_ids),
            intended_analysis or old.intended_analysis,
            actor,
            expected_outputs=old.expected_outputs,
            intended_tools=old.intended_tools,
            pre_approved_outputs=old.pre_approved_outputs,
            supersedes=old.id,
        )
        old = replace(old, superseded_by=new.id)
        self._put_update(
            actor, "work_package.superseded_by", "work_package", old, old_version,
            payload={"successor": new.id},
        )
        return old, new

    # -- classification ---------------------------------------------------------

    def _classification_record(self, wp_id: str) -> ClassificationRecord:
        return self._get("classification_record", wp_id)[0]

    def _classifier_identity(
        self, wp: WorkPackage, project: Project, user_id: str
    ) -> tuple[Role, str | None]:
        roles = self._project_roles(project, user_id)
        if Role.INVESTIGATOR in roles:
            return Role.INVESTIGATOR, None
        providers = self._providers_represented_by(user_id)
        wp_providers = set(self._providers_by_dataset(wp).values())
        represented = providers & wp_providers
        if represented:
            return Role.DATASET_PROVIDER_REPRESENTATIVE, sorted(represented)[0]
        if Role.REFEREE in roles:
            return Role.REFEREE, None
        raise AuthorizationError(
            f"{user_id} is not an eligible classifier for this work package"
        )

    def submit_classification(
        self, wp_id: str, actor: str, answers: QuestionnaireAnswers
    ) -> TierDecision:
        wp, _, project = self._wp_and_project(wp_id)
        if wp.state not in (WorkPackageState.DRAFT, WorkPackageState.FULL_CLASSIFICATION):
            raise GuardError(
                f"classification submissions are not accepted in state {wp.state.value}"
            )
        role, provider_id = self._classifier_identity(wp, project, actor)
        answers, notes = normalize_answers(answers)
        record, version = self._get("classification_record", wp_id)
        if any(d.classifier_user_id == actor for d in record.decisions):
            raise ConflictError(
                "a decision by this classifier exists; withdraw it before resubmitting"
            )
        decision = make_decision(
            wp_id, actor, role, answers, self._now(), provider_id=provider_id
        )
        record = replace(record, decisions=record.decisions + (decision,), outcome=None)
        self.store.put(record, version)
        self._audit(
            actor,
            "classification.submit",
            "work_package",
            wp_id,
            self._get("work_package", wp_id)[1],
            payload={"tier": int(decision.tier), "role": role.value, "notes": list(notes)},
        )
        return decision

    def withdraw_classification(self, wp_id: str, actor: str) -> None:
        record, version = self._get("classification_record", wp_id)
        remaining = tuple(
            d for d in record.decisions if d.classifier_user_id != actor
        )
        if len(remaining) == len(record.decisions):
            raise NotFound(f"no decision by {actor} to withdraw")
        self.store.put(replace(record, decisions=remaining, outcome=None), version)
        self._audit(
            actor,
            "classification.withdraw",
            "work_package",
            wp_id,
            self._get("work_package", wp_id)[1],
        )

    def _required_for_phase(
        self, wp: WorkPackage, phase: str, decisions: tuple[TierDecision, ...]
    ) -> frozenset[RequiredClassifier]:
        providers = self._providers_by_dataset(wp)
        anonymised = any(
            d.answers.personal_data_status is PersonalDataStatus.ANONYMISED
            for d in decisions
        )
        provisional = max((d.tier for d in decisions), default=Tier.TIER_0)
        required = required_classifiers(
            wp, provisional, providers, anonymised_from_personal=anonymised
        )
        if phase == "initial":
            # The referee joins at full classification; initial conversations
            # involve the investigator and the providers.
            required = frozenset(
                r for r in required if r.role is not Role.REFEREE
            )
        return required

    def resolve_work_package_consensus(
        self, wp_id: str, actor: str, *, proceed_without_consensus: bool = False
    ) -> ConsensusOutcome:
        wp, _, project = self._wp_and_project(wp_id)
        self._require_roles(
            project,
            actor,
            lifecycle.EVENT_AUTHORIZED_ROLES[WorkPackageEvent.RECORD_CONSENSUS],
            "consensus resolution",
        )
        if wp.state not in (WorkPackageState.DRAFT, WorkPackageState.FULL_CLASSIFICATION):
            raise GuardError(f"no classification is open in state {wp.state.value}")
        phase = "initial" if wp.state is WorkPackageState.DRAFT else "full"
        record, record_version = self._get("classification_record", wp_id)
        required = self._required_for_phase(wp, phase, record.decisions)
        outcome = resolve_consensus(
            record.decisions,
            required,
            proceed_without_consensus,
            halt_acknowledged=wp.halt_acknowledged,
        )
        self.store.put(replace(record, phase=phase, outcome=outcome), record_version)
        self._audit(
            actor,
            "classification.resolve",
            "work_package",
            wp_id,
            self._get("work_package", wp_id)[1],
            payload={
                "kind": outcome.kind.value,
                "tier": None if outcome.tier is None else int(outcome.tier),
                "phase": phase,
            },
        )

        if outcome.kind is ConsensusKind.TIER4_HALT:
            self.transition_work_package(wp_id, WorkPackageEvent.TIER4_HALT, actor)
            self.notifier.notify(
                [project.programme_manager_id],
                "tier-4 halt",
                f"work package {wp_id} proposed at tier 4; review required",
            )
            return outcome

        if outcome.kind is ConsensusKind.DISAGREEMENT:
            parties = {project.investigator_id}
            for d in record.decisions:
                parties.add(d.classifier_user_id)
            self.notifier.notify(
                sorted(parties),
                "classification disagreement",
                f"work package {wp_id} classifiers have not reached consensus",
            )
            return outcome

        # Agreed or proceed-at-max.
        agreed_tier = outcome.tier
        personal = any(
            d.answers.personal_data_status
            in (PersonalDataStatus.IDENTIFIABLE, PersonalDataStatus.PSEUDONYMISED)
            for d in record.decisions
        )
        anonymised = any(
            d.answers.personal_data_status is PersonalDataStatus.ANONYMISED
            for d in record.decisions
        )
        if phase == "initial":
            wp, version = self._get("work_package", wp_id)
            wp = replace(
                wp,
                preliminary_tier=agreed_tier,
                personal_data=wp.personal_data or personal,
                anonymised_from_personal=wp.anonymised_from_personal or anonymised,
                halt_acknowledged=False,
            )
            self._put_update(
                actor, "work_package.preliminary_tier", "work_package", wp, version,
                payload={"tier": int(agreed_tier)},
            )
            self.transition_work_package(
                wp_id, WorkPackageEvent.RECORD_INITIAL_CLASSIFICATION, actor
            )
        else:
            self.transition_work_package(wp_id, WorkPackageEvent.RECORD_CONSENSUS, actor)
            wp, version = self._get("work_package", wp_id)
            wp = replace(
                wp,
                final_tier=agreed_tier,
                personal_data=wp.personal_data or personal,
                anonymised_from_personal=wp.anonymised_from_personal or anonymised,
                halt_acknowledged=False,
            )
            self._put_update(
                actor, "work_package.final_tier", "work_package", wp, version,
                payload={"tier": int(agreed_tier)},
            )
        return outcome

    def start_full_classification(self, wp_id: str, actor: str) -> WorkPackage:
        """Open the full-classification phase; prior decisions are archived."""
        wp = self.transition_work_package(
            wp_id, WorkPackageEvent.START_FULL_CLASSIFICATION, actor
        )
        record, version = self._get("classification_record", wp_id)
        self.store.put(
            replace(
                record,
                phase="full",
                decisions=(),
                archived_decisions=record.archived_decisions + record.decisions,
                outcome=None,
            ),
            version,
        )
        return wp

    def acknowledge_halt(self, wp_id: str, actor: str) -> WorkPackage:
        return self.transition_work_package(
            wp_id, WorkPackageEvent.ACKNOWLEDGE_HALT, actor
        )

    def work_package_status(self, wp_id: str) -> dict:
        wp, _, project = self._wp_and_project(wp_id)
        record = self._classification_record(wp_id)
        phase = "initial" if wp.state is WorkPackageState.DRAFT else record.phase
        required = self._required_for_phase(wp, phase, record.decisions)
        return {
            "work_package": to_jsonable(wp),
            "state": wp.state.value,
            "phase": phase,
            "decisions": [
                {
                    "classifier_user_id": d.classifier_user_id,
                    "role": d.classifier_role.value,
                    "tier": int(d.tier),
                    "provider_id": d.provider_id,
                }
                for d in record.decisions
            ],
            "required_classifiers": sorted(
                (
                    {"role": r.role.value, "provider_id": r.provider_id}
                    for r in required
                ),
                key=lambda r: (r["role"], r["provider_id"] or ""),
            ),
            "outcome": to_jsonable(record.outcome) if record.outcome else None,
            "halt_flag": wp.halt_flag,
            "project_id": project.id,
        }

    # -- environments -----------------------------------------------------------

    def _environments_of(self, wp_id: str) -> list[Environment]:
        return [
            env for env, _ in self.store.list("environment") if env.work_package_id == wp_id
        ]

    def _store_blueprint(self, bp: Blueprint) -> str:
        record = BlueprintRecord(id=f"bp-{bp.environment_id}", document=blueprint_to_dict(bp))
        existing = self.store.try_get("blueprint", record.id)
        if existing is None:
            self.store.put(record, 0)
        else:
            self.store.put(record, existing[1])
        return record.id

    def _register_environment(
        self, bp: Blueprint, wp: WorkPackage, actor: str,
        credential: ForwardedCredential,
        platform_id: str,
        derived_from_environment_id: str | None = None,
    ) -> Environment:
        if self.store.exists("environment", bp.environment_id):
            raise ConflictError(
                f"environment {bp.environment_id} already exists for this work package"
            )
        self._check_lineage_acyclic(bp.environment_id, derived_from_environment_id)
        blueprint_ref = self._store_blueprint(bp)
        self.driver.provision_environment(bp, credential)
        env = Environment(
            id=bp.environment_id,
            work_package_id=wp.id,
            tier=bp.tier,
            platform_id=platform_id,
            state=EnvironmentState.PROVISIONED,
            blueprint_ref=blueprint_ref,
            derived_from_environment_id=derived_from_environment_id,
        )
        self._put_new(actor, "environment.provision", "environment", env)
        volume_ids = self._create_aux_volumes(env, bp, actor)
        env, version = self._get("environment", env.id)
        env = replace(env, volume_ids=tuple(volume_ids))
        self._put_update(actor, "environment.volumes", "environment", env, version)
        return env

    def _create_aux_volumes(
        self, env: Environment, bp: Blueprint, actor: str
    ) -> list[str]:
        volume_ids = []
        for spec in bp.volumes:
            if spec.kind is VolumeKind.SECURE_DATA:
                if spec.dataset_id is not None:
                    existing = self._sealed_data_volume(env.work_package_id, spec.dataset_id)
                    if existing is not None:
                        volume_ids.append(existing.id)
                        self._mount_volume(existing.id, env.id, actor)
                elif spec.source_volume_id is not None:
                    volume_ids.append(spec.source_volume_id)
                    self._mount_volume(spec.source_volume_id, env.id, actor)
                continue
            volume = Volume(
                id=new_id("vol"),
                kind=spec.kind,
                mode=spec.mode,
                environment_id=env.id,
                state=VolumeState.OPEN,
                work_package_id=env.work_package_id,
                retention_days=spec.retention_days,
            )
            self._put_new(actor, "volume.create", "volume", volume)
            self.store.put(VolumeContents(id=volume.id, files={}), 0)
            volume_ids.append(volume.id)
        return volume_ids

    def write_volume_file(self, volume_id: str, path: str, content: bytes, actor: str) -> None:
        """In-environment write to a read-write volume (simulated analysis)."""
        volume, _ = self._get("volume", volume_id)
        if volume.state is not VolumeState.OPEN or volume.mode is not VolumeMode.READ_WRITE:
            raise GuardError("volume is not writable")
        contents, version = self._get("volume_contents", volume_id)
        files = dict(contents.files)
        files[path] = content.hex()
        self.store.put(VolumeContents(id=volume_id, files=files), version)
        self._audit(actor, "volume.write", "volume", volume_id,
                    self._get("volume", volume_id)[1], payload={"path": path})

    def _sealed_data_volume(self, wp_id: str, dataset_id: str) -> Volume | None:
        for volume, _ in self.store.list("volume"):
            if (
                volume.work_package_id == wp_id
                and volume.dataset_id == dataset_id
                and volume.kind is VolumeKind.SECURE_DATA
                and volume.state is VolumeState.SEALED
            ):
                return volume
        return None

    def _mount_volume(self, volume_id: str, environment_id: str, actor: str) -> Volume:
        volume, version = self._get("volume", volume_id)
        if volume.state is VolumeState.DELETED:
            raise GuardError("deleted volumes are never re-mounted")
        if volume.environment_id == environment_id:
            return volume
        volume = replace(volume, environment_id=environment_id)
        self._put_update(
            actor, "volume.mount", "volume", volume, version,
            payload={"environment_id": environment_id},
        )
        return volume

    def _check_lineage_acyclic(
        self, new_env_id: str, parent_env_id: str | None
    ) -> None:
        seen = {new_env_id}
        current = parent_env_id
        while current is not None:
            if current in seen:
                raise GuardError("environment lineage must remain acyclic")
            seen.add(current)
            parent = self.store.try_get("environment", current)
            current = parent[0].derived_from_environment_id if parent else None

    def lineage_chain(self, environment_id: str) -> list[str]:
        """Walk derivation links from an environment back to its root."""
        chain = []
        current: str | None = environment_id
        while current is not None:
            chain.append(current)
            env = self._get("environment", current)[0]
            current = env.derived_from_environment_id
            if current in chain:
                raise GuardError("environment lineage contains a cycle")
        return chain

    def request_environment(
        self,
        wp_id: str,
        platform_id: str,
        actor: str,
        credential: ForwardedCredential,
        *,
        initial: bool = False,
    ) -> Environment:
        wp, _, project = self._wp_and_project(wp_id)
        if project.state is ProjectState.CLOSED:
            raise GuardError("closed projects accept no mutating events")
        self._require_roles(
            project,
            actor,
            frozenset(
                {Role.INVESTIGATOR, Role.PROJECT_MANAGER, Role.PROGRAMME_MANAGER}
            ),
            "environment request",
        )
        if initial:
            if wp.state not in (
                WorkPackageState.INITIAL_CLASSIFIED,
                WorkPackageState.INGRESSED_TIER3,
            ):
                raise GuardError(
                    "initial environments are created after initial classification"
                )
            bp = plan_environment(
                wp,
                Tier.TIER_3,
                platform_id,
                scratch_retention_days=self.config.scratch_retention_days,
                initial_ingress=True,
            )
            return self._register_environment(bp, wp, actor, credential, platform_id)

        if wp.state not in (
            WorkPackageState.CONSENSUS_REACHED,
            WorkPackageState.ACTIVE,
        ):
            raise GuardError("environments are created once consensus is recorded")
        if wp.final_tier is None:
            raise GuardError("work package has no agreed tier")

        # Idempotence, and tier-3 analysis continuing in the initial
        # ingress environment.
        for env in self._environments_of(wp_id):
            if env.tier is wp.final_tier and env.state is not EnvironmentState.DECOMMISSIONED:
                return env
        if wp.derived_from is not None:
            return self._request_derived_environment(wp, actor, credential, platform_id)
        # A superseding work package at the same tier may adopt its
        # predecessor's environment instead of creating a fresh one.
        if wp.supersedes:
            for env in self._environments_of(wp.supersedes):
                if env.tier is wp.final_tier and env.state is not EnvironmentState.DECOMMISSIONED:
                    return self.adopt_environment(wp_id, env.id, actor)
        bp = plan_environment(
            wp,
            wp.final_tier,
            platform_id,
            scratch_retention_days=self.config.scratch_retention_days,
        )
        return self._register_environment(bp, wp, actor, credential, platform_id)

    def _request_derived_environment(
        self,
        wp: WorkPackage,
        actor: str,
        credential: ForwardedCredential,
        platform_id: str | None = None,
    ) -> Environment:
        source_env = self._get("environment", wp.derived_from.environment_id)[0]
        # The sealed output volume is recorded on the originating egress request.
        output_volume_id = None
        for request, _ in self.store.list("egress_request"):
            if request.derived_work_package_id == wp.id:
                output_volume_id = request.output_volume_id
                break
        if output_volume_id is None:
            raise GuardError("no egress request references this derived work package")
        output_volume = self._get("volume", output_volume_id)[0]
        platform = platform_id or source_env.platform_id
        bp = plan_derived_environment(
            source_env,
            output_volume,
            wp.final_tier,
            wp,
            platform_id=platform,
            scratch_retention_days=self.config.scratch_retention_days,
        )
        return self._register_environment(
            bp, wp, actor, credential, platform,
            derived_from_environment_id=source_env.id,
        )

    def adopt_environment(self, wp_id: str, environment_id: str, actor: str) -> Environment:
        """Re-point a predecessor's same-tier environment at a successor."""
        wp, _, project = self._wp_and_project(wp_id)
        env, version = self._get("environment", environment_id)
        if wp.supersedes != env.work_package_id:
            raise GuardError("only a superseded predecessor's environment can be adopted")
        if wp.final_tier is None or env.tier is not wp.final_tier:
            raise GuardError("environment reuse requires an identical tier")
        env = replace(env, work_package_id=wp_id)
        self._put_update(
            actor, "environment.adopt", "environment", env, version,
            payload={"work_package_id": wp_id},
        )
        return env

    def _activate_environments(self, wp: WorkPackage, actor: str) -> None:
        for env in self._environments_of(wp.id):
            if env.state is EnvironmentState.PROVISIONED and env.tier is wp.final_tier:
                env2, version = self._get("environment", env.id)
                env2 = replace(env2, state=EnvironmentState.ACTIVE)
                self._put_update(actor, "environment.activate", "environment", env2, version)

    def decommission_environment(
        self, environment_id: str, actor: str, credential: ForwardedCredential
    ) -> Environment:
        env, version = self._get("environment", environment_id)
        self.driver.decommission_environment(environment_id, credential)
        env = replace(env, state=EnvironmentState.DECOMMISSIONED)
        self._put_update(actor, "environment.decommission", "environment", env, version)
        return env

    def check_environment_access(
        self,
        environment_id: str,
        device_class: DeviceClass,
        origin_network: NetworkClass,
        second_factor: bool,
    ) -> tuple[str, ...]:
        env = self._get("environment", environment_id)[0]
        return check_access(
            resolve_policy(env.tier), device_class, origin_network, second_factor
        )

    def get_blueprint(self, blueprint_ref: str) -> dict:
        return self._get("blueprint", blueprint_ref)[0].document

    # -- project closure ----------------------------------------------------------

    def close_project(
        self, project_id: str, actor: str, credential: ForwardedCredential
    ) -> dict:
        project, version = self._get("project", project_id)
        self._require_roles(
            project,
            actor,
            frozenset({Role.PROJECT_MANAGER, Role.PROGRAMME_MANAGER}),
            "project closure",
        )
        if project.state is ProjectState.CLOSED:
            raise GuardError("project is already closed")
        open_wps = []
        for wp_id in project.work_package_ids:
            wp = self._get("work_package", wp_id)[0]
            if wp.state not in (WorkPackageState.CLOSED, WorkPackageState.SUPERSEDED):
                open_wps.append(wp_id)
            for request, _ in self.store.list("egress_request"):
                if request.work_package_id == wp_id and not request.resolved:
                    raise GuardError(f"work package {wp_id} has unresolved egress")
        if open_wps:
            raise GuardError(
                f"all work packages must be closed or superseded first: {open_wps}"
            )

        environment_ids: list[str] = []
        volume_ids: list[str] = []
        wp_ids = set(project.work_package_ids)
        for env, env_version in self.store.list("environment"):
            if env.work_package_id not in wp_ids:
                continue
            environment_ids.append(env.id)
            if env.state is not EnvironmentState.DECOMMISSIONED:
                self.driver.decommission_environment(env.id, credential)
                updated = replace(env, state=EnvironmentState.DECOMMISSIONED)
                self._put_update(
                    actor, "environment.decommission", "environment", updated, env_version
                )
        for volume, vol_version in self.store.list("volume"):
            if volume.work_package_id not in wp_ids:
                continue
            volume_ids.append(volume.id)
            if volume.state is not VolumeState.DELETED:
                self.driver.delete_volume(volume.id, credential)
                updated = replace(volume, state=VolumeState.DELETED)
                self._put_update(actor, "volume.delete", "volume", updated, vol_version)
                contents = self.store.try_get("volume_contents", volume.id)
                if contents is not None:
                    self.store.put(
                        VolumeContents(id=volume.id, files={}), contents[1]
                    )

        project = replace(project, state=ProjectState.CLOSED)
        self._put_update(
            actor,
            "project.close",
            "project",
            project,
            version,
            payload={"environments": sorted(environment_ids), "volumes": sorted(volume_ids)},
        )
        return {
            "project_id": project_id,
            "state": project.state.value,
            "environment_ids": sorted(environment_ids),
            "volume_ids": sorted(volume_ids),
        }

    # -- data ingress -------------------------------------------------------------

    def authorize_mount(self, wp_id: str, dataset_id: str, actor: str) -> MountAuthorization:
        wp, _, project = self._wp_and_project(wp_id)
        self._require_roles(
            project, actor, frozenset({Role.INVESTIGATOR}), "mount authorization"
        )
        if dataset_id not in wp.dataset_ids:
            raise NotFound(f"dataset {dataset_id} is not part of this work package")
        auth = MountAuthorization(
            id=f"mount-{wp_id}-{dataset_id}",
            work_package_id=wp_id,
            dataset_id=dataset_id,
            authorized_by=actor,
            timestamp=self._now(),
        )
        existing = self.store.try_get("mount_authorization", auth.id)
        self.store.put(auth, 0 if existing is None else existing[1])
        self._audit(
            actor, "ingress.authorize_mount", "work_package", wp_id,
            self._get("work_package", wp_id)[1], payload={"dataset_id": dataset_id},
        )
        return auth

    def begin_ingress(
        self, dataset_id: str, wp_id: str, actor: str
    ) -> tuple[Volume, IngressToken]:
        """Open an empty write-only deposit volume and issue its token.

        Token details travel only through the management framework; the
        expiry and one-time semantics come from deployment configuration.
        """
        wp, _, project = self._wp_and_project(wp_id)
        self._require_roles(
            project,
            actor,
            frozenset({Role.PROJECT_MANAGER, Role.PROGRAMME_MANAGER}),
            "data ingress",
        )
        if dataset_id not in wp.dataset_ids:
            raise NotFound(f"dataset {dataset_id} is not part of this work package")
        dataset = self._get("dataset", dataset_id)[0]
        if not dataset.sharing_agreement_doc_ref:
            raise GuardError(
                "a signed data sharing agreement must be recorded before ingress"
            )
        if self.store.try_get("mount_authorization", f"mount-{wp_id}-{dataset_id}") is None:
            raise GuardError("the investigator has not authorized mounting this dataset")
        for volume, _ in self.store.list("volume"):
            if (
                volume.work_package_id == wp_id
                and volume.dataset_id == dataset_id
                and volume.kind is VolumeKind.SECURE_DATA
                and volume.state is VolumeState.OPEN
            ):
                raise ConflictError("an open deposit volume already exists for this dataset")
        provider = self._get("dataset_provider", dataset.provider_id)[0]
        volume = Volume(
            id=new_id("vol"),
            kind=VolumeKind.SECURE_DATA,
            mode=VolumeMode.WRITE_ONLY,
            state=VolumeState.OPEN,
            dataset_id=dataset_id,
            work_package_id=wp_id,
        )
        self._put_new(actor, "volume.open_deposit", "volume", volume)
        self.store.put(VolumeContents(id=volume.id, files={}), 0)
        token = IngressToken(
            id=new_id("token"),
            volume_id=volume.id,
            issued_to=provider.representative_user_id,
            expires_at=self._now()
            + timedelta(hours=self.config.ingress_token_lifetime_hours),
            one_time=True,
        )
        self.store.put(token, 0)
        self._audit(
            actor, "ingress.issue_token", "volume", volume.id, 1,
            payload={"issued_to": token.issued_to, "expires_at": token.expires_at},
        )
        return volume, token

    def deposit_file(
        self,
        token_id: str,
        path: str,
        content: bytes,
        *,
        client_digest: str | None = None,
    ) -> dict:
        """Write-only deposit through an ingress token."""
        token_entry = self.store.try_get("ingress_token", token_id)
        if token_entry is None:
            raise TokenAccessError("unknown token")
        token = token_entry[0]
        if not token_active(token, self._now()):
            raise TokenAccessError("token expired, revoked, or already used")
        volume, _ = self._get("volume", token.volume_id)
        if volume.state is not VolumeState.OPEN:
            raise TokenAccessError("deposit volume is not open")
        if not path:
            raise InvalidInputError("a file path is required")
        if client_digest is not None:
            from .canonical import sha256_hex

            if sha256_hex(content) != client_digest.lower():
                raise InvalidInputError(
                    "uploaded content does not match the supplied digest"
                )
        while True:
            contents, version = self._get("volume_contents", token.volume_id)
            files = dict(contents.files)
            files[path] = content.hex()
            try:
                self.store.put(VolumeContents(id=token.volume_id, files=files), version)
                break
            except VersionConflictError:
                continue
        self._audit(
            token.issued_to, "ingress.deposit", "volume", token.volume_id,
            version + 1, payload={"path": path, "bytes": len(content)},
        )
        return {"volume_id": token.volume_id, "path": path, "bytes": len(content)}

    def read_via_token(self, token_id: str, path: str) -> bytes:
        """Tokens grant write-only access; reading always fails."""
        raise TokenAccessError("ingress tokens are write-only; read refused")

    def complete_ingress(self, volume_id: str, actor: str) -> Volume:
        volume, version = self._get("volume", volume_id)
        if volume.state is not VolumeState.OPEN:
            raise GuardError("volume is already sealed")
        token = self._token_for_volume(volume_id)
        if token is None or token.issued_to != actor:
            raise AuthorizationError(
                "transfer completion is indicated by the representative the "
                "token was issued to"
            )
        sealed = replace(volume, state=VolumeState.SEALED, mode=VolumeMode.READ_ONLY)
        self._put_update(actor, "ingress.complete", "volume", sealed, version)
        token_record, token_version = self._get("ingress_token", token.id)
        self.store.put(replace(token_record, used=True, revoked=True), token_version)
        self._audit(actor, "ingress.revoke_token", "ingress_token", token.id, token_version + 1)
        record = IntegrityRecord(
            id=new_id("integrity"),
            volume_id=volume_id,
            computed_hash="",
            provider_hash="",
            verified_at=self._now(),
            status=IntegrityStatus.PENDING,
        )
        self.store.put(record, 0)
        # Mount into the authorized review environment where one exists.
        if sealed.work_package_id is not None:
            for env in self._environments_of(sealed.work_package_id):
                if env.state is EnvironmentState.DECOMMISSIONED:
                    continue
                sealed = self._mount_volume(volume_id, env.id, actor)
                env2, env_version = self._get("environment", env.id)
                if volume_id not in env2.volume_ids:
                    env2 = replace(env2, volume_ids=env2.volume_ids + (volume_id,))
                    self._put_update(
                        actor, "environment.attach_volume", "environment", env2, env_version
                    )
                break
        return sealed

    def _token_for_volume(self, volume_id: str) -> IngressToken | None:
        for token, _ in self.store.list("ingress_token"):
            if token.volume_id == volume_id:
                return token
        return None

    def verify_integrity(
        self,
        volume_id: str,
        provider_hash: str | None = None,
        *,
        actor: str = SCHEDULER_ACTOR_ID,
    ) -> IntegrityRecord:
        """Digest the sealed volume and compare against the provider's hash."""
        volume, _ = self._get("volume", volume_id)
        if volume.state is not VolumeState.SEALED:
            raise GuardError("integrity verification runs on sealed volumes")
        if provider_hash is None:
            if volume.dataset_id is None:
                raise InvalidInputError("no provider hash available for this volume")
            provider_hash = self._get("dataset", volume.dataset_id)[0].provider_hash
        contents = self._get("volume_contents", volume_id)[0]
        computed = compute_volume_digest(
            {path: bytes.fromhex(blob) for path, blob in contents.files.items()}
        )
        status = (
            IntegrityStatus.MATCH
            if computed == provider_hash.lower()
            else IntegrityStatus.MISMATCH
        )
        record = IntegrityRecord(
            id=new_id("integrity"),
            volume_id=volume_id,
            computed_hash=computed,
            provider_hash=provider_hash.lower(),
            verified_at=self._now(),
            status=status,
        )
        self.store.put(record, 0)
        self._audit(
            actor, "integrity.verify", "volume", volume_id,
            self._get("volume", volume_id)[1],
            payload={"status": status.value, "record_id": record.id},
        )
        if status is IntegrityStatus.MISMATCH:
            managers = self._managers_for_volume(volume)
            self.notifier.notify(
                managers,
                "integrity mismatch",
                f"volume {volume_id} failed integrity verification",
            )
            self._audit(
                actor, "integrity.alert", "integrity_record", record.id, 1,
                payload={"volume_id": volume_id, "alerted": sorted(managers)},
            )
        return record

    def integrity_report(self, volume_id: str) -> dict:
        """Signed export of a volume's verification history."""
        import hashlib
        import hmac

        self._get("volume", volume_id)
        records = sorted(
            (
                to_jsonable(record)
                for record, _ in self.store.list("integrity_record")
                if record.volume_id == volume_id
            ),
            key=lambda r: r["verified_at"],
        )
        report = {"volume_id": volume_id, "records": records}
        from .canonical import canonical_bytes

        signature = hmac.new(
            self.config.identity_secret.encode("utf-8"),
            canonical_bytes(report),
            hashlib.sha256,
        ).hexdigest()
        return {"report": report, "signature": signature, "algorithm": "hmac-sha256"}

    def _managers_for_volume(self, volume: Volume) -> list[str]:
        if volume.work_package_id is None:
            return []
        wp = self._get("work_package", volume.work_package_id)[0]
        project = self._get("project", wp.project_id)[0]
        return sorted({project.programme_manager_id, project.project_manager_id})

    def run_scheduled_verifications(self, now: datetime | None = None) -> list[IntegrityRecord]:
        """Re-verify every sealed data volume whose last check is stale."""
        now = now or self._now()
        period = timedelta(hours=self.config.reverification_period_hours)
        last_by_volume: dict[str, datetime] = {}
        for record, _ in self.store.list("integrity_record"):
            if record.status is IntegrityStatus.PENDING:
                continue
            current = last_by_volume.get(record.volume_id)
            if current is None or record.verified_at > current:
                last_by_volume[record.volume_id] = record.verified_at
        results = []
        for volume, _ in self.store.list("volume"):
            if volume.kind is not VolumeKind.SECURE_DATA:
                continue
            if volume.state is not VolumeState.SEALED or volume.dataset_id is None:
                continue
            last = last_by_volume.get(volume.id)
            if last is not None and now - last < period:
                continue
            results.append(self.verify_integrity(volume.id))
        return results

    def tamper_volume(self, volume_id: str, path: str, content: bytes) -> None:
        """Test-harness hook: mutate stored bytes outside the deposit flow."""
        contents, version = self._get("volume_contents", volume_id)
        files = dict(contents.files)
        files[path] = content.hex()
        self.store.put(VolumeContents(id=volume_id, files=files), version)

    def volume_files(self, volume_id: str, actor: str) -> dict[str, bytes]:
        """Read volume contents through the management view (not a token)."""
        volume, _ = self._get("volume", volume_id)
        if volume.state is VolumeState.DELETED:
            raise GuardError("volume contents were deleted")
        contents = self._get("volume_contents", volume_id)[0]
        return {path: bytes.fromhex(blob) for path, blob in contents.files.items()}

    # -- egress ----------------------------------------------------------------

    def seal_volume(self, volume_id: str, actor: str) -> Volume:
        volume, version = self._get("volume", volume_id)
        if volume.state is not VolumeState.OPEN:
            raise GuardError("only open volumes can be sealed")
        wp = self._get("work_package", volume.work_package_id)[0]
        project = self._get("project", wp.project_id)[0]
        self._require_roles(
            project,
            actor,
            frozenset(
                {Role.INVESTIGATOR, Role.PROJECT_MANAGER, Role.PROGRAMME_MANAGER}
            ),
            "sealing a volume",
        )
        sealed = replace(volume, state=VolumeState.SEALED, mode=VolumeMode.READ_ONLY)
        self._put_update(actor, "volume.seal", "volume", sealed, version)
        return sealed

    def request_egress(
        self,
        wp_id: str,
        output_volume_id: str,
        analysis_script_ref: str,
        intent: EgressIntent,
        actor: str,
        *,
        output_descriptor: str | None = None,
    ) -> dict:
        """Classify outputs out of an environment.

        Outputs matching a descriptor pre-approved at classification time
        release under investigator (and, where required, referee) signoff
        without returning to the provider representative; anything else
        becomes a derived work package facing the full classifier set.
        """
        wp, _, project = self._wp_and_project(wp_id)
        if not analysis_script_ref:
            raise GuardError(
                "egress requires the reproducible analysis script reference"
            )
        volume, _ = self._get("volume", output_volume_id)
        if volume.kind is not VolumeKind.OUTPUT:
            raise InvalidInputError("egress runs on the environment's output volume")
        if volume.state is not VolumeState.SEALED:
            raise GuardError("the output volume must be sealed for review first")
        source_env_id = volume.environment_id
        if source_env_id is None:
            raise GuardError("the output volume is not mounted in an environment")

        self.transition_work_package(wp_id, WorkPackageEvent.REQUEST_EGRESS, actor)

        if output_descriptor is not None and output_descriptor in wp.pre_approved_outputs:
            release = PreApprovedRelease(
                id=new_id("release"),
                work_package_id=wp_id,
                output_volume_id=output_volume_id,
                output_descriptor=output_descriptor,
                analysis_script_ref=analysis_script_ref,
                intent=intent,
                referee_required=intent is EgressIntent.FURTHER_ANALYSIS,
            )
            self.store.put(release, 0)
            request = EgressRequest(
                id=new_id("egress"),
                work_package_id=wp_id,
                output_volume_id=output_volume_id,
                analysis_script_ref=analysis_script_ref,
                intent=intent,
                path="pre_approved",
                release_id=release.id,
            )
            self.store.put(request, 0)
            self._audit(
                actor, "egress.request", "work_package", wp_id,
                self._get("work_package", wp_id)[1],
                payload={"path": "pre_approved", "release_id": release.id},
            )
            return {"path": "pre_approved", "release": to_jsonable(release), "egress_request_id": request.id}

        derived = self._create_work_package(
            project.id,
            wp.dataset_ids,
            f"analysis of outputs derived from {wp_id}",
            actor,
            expected_outputs=wp.expected_outputs,
            intended_tools=wp.intended_tools,
            derived_from=DerivationLink(
                work_package_id=wp_id,
                environment_id=source_env_id,
                analysis_script_ref=analysis_script_ref,
            ),
        )
        request = EgressRequest(
            id=new_id("egress"),
            work_package_id=wp_id,
            output_volume_id=output_volume_id,
            analysis_script_ref=analysis_script_ref,
            intent=intent,
            path="derived",
            derived_work_package_id=derived.id,
        )
        self.store.put(request, 0)
        self._audit(
            actor, "egress.request", "work_package", wp_id,
            self._get("work_package", wp_id)[1],
            payload={"path": "derived", "derived_work_package_id": derived.id},
        )
        return {
            "path": "derived",
            "work_package": to_jsonable(derived),
            "egress_request_id": request.id,
        }

    def signoff_release(self, release_id: str, actor: str) -> PreApprovedRelease:
        release, version = self._get("pre_approved_release", release_id)
        wp, _, project = self._wp_and_project(release.work_package_id)
        roles = self._project_roles(project, actor)
        if Role.INVESTIGATOR in roles:
            role = Role.INVESTIGATOR
        elif Role.REFEREE in roles:
            role = Role.REFEREE
        else:
            raise AuthorizationError(
                "pre-approved releases are signed by the investigator and, "
                "where required, an independent referee"
            )
        if any(s.role is role for s in release.signoffs):
            raise ConflictError(f"{role.value} has already signed this release")
        release = replace(
            release,
            signoffs=release.signoffs + (Signoff(role, actor, self._now()),),
        )
        have_roles = {s.role for s in release.signoffs}
        complete = Role.INVESTIGATOR in have_roles and (
            not release.referee_required or Role.REFEREE in have_roles
        )
        if complete:
            release = replace(release, released=True)
        self.store.put(release, version)
        self._audit(
            actor, "egress.release_signoff", "pre_approved_release", release_id,
            version + 1, payload={"role": role.value, "released": release.released},
        )
        if complete:
            self._resolve_egress_for(release.work_package_id, release_id=release_id, actor=actor)
        return release

    def _resolve_egress_for(
        self,
        wp_id: str,
        *,
        actor: str,
        release_id: str | None = None,
        derived_wp_id: str | None = None,
    ) -> None:
        for request, version in self.store.list("egress_request"):
            if request.work_package_id != wp_id or request.resolved:
                continue
            if release_id is not None and request.release_id != release_id:
                continue
            if derived_wp_id is not None and request.derived_work_package_id != derived_wp_id:
                continue
            self.store.put(replace(request, resolved=True), version)
            self.transition_work_package(wp_id, WorkPackageEvent.RESOLVE_EGRESS, actor)

    def resolve_egress(self, wp_id: str, actor: str) -> WorkPackage:
        """Return an egress-pending work package to analysis.

        Valid once the derived work package has a recorded consensus or the
        pre-approved release has been fully signed.
        """
        resolved_any = False
        for request, version in self.store.list("egress_request"):
            if request.work_package_id != wp_id or request.resolved:
                continue
            if request.path == "derived":
                derived = self._get("work_package", request.derived_work_package_id)[0]
                if derived.final_tier is None:
                    raise GuardError(
                        "the derived work package has not recorded consensus yet"
                    )
            else:
                release = self._get("pre_approved_release", request.release_id)[0]
                if not release.released:
                    raise GuardError("the pre-approved release is not fully signed")
            self.store.put(replace(request, resolved=True), version)
            resolved_any = True
        if not resolved_any:
            raise NotFound("no unresolved egress request for this work package")
        return self.transition_work_package(
            wp_id, WorkPackageEvent.RESOLVE_EGRESS, actor
        )

    def publish_egress(
        self, derived_wp_id: str, actor: str, credential: ForwardedCredential
    ) -> PublishAuthorization:
        """Authorize copy-out of a tier 0/1 derived work package."""
        wp, _, project = self._wp_and_project(derived_wp_id)
        self._require_roles(
            project,
            actor,
            frozenset(
                {Role.INVESTIGATOR, Role.PROJECT_MANAGER, Role.PROGRAMME_MANAGER}
            ),
            "publication egress",
        )
        if wp.final_tier is None:
            raise GuardError("the derived work package has no agreed tier")
        if wp.final_tier > Tier.TIER_1:
            raise GuardError(
                "only tier 0/1 work packages publish; higher tiers use a "
                "derived environment"
            )
        auth_id = f"publish-{derived_wp_id}"
        existing = self.store.try_get("publish_authorization", auth_id)
        if existing is not None:
            return existing[0]
        env = self.request_environment(derived_wp_id, "publication", actor, credential)
        auth = PublishAuthorization(
            id=auth_id,
            work_package_id=derived_wp_id,
            environment_id=env.id,
            tier=int(wp.final_tier),
        )
        self.store.put(auth, 0)
        self._audit(
            actor, "egress.publish_authorized", "publish_authorization", auth_id, 1,
            payload={"tier": int(wp.final_tier), "environment_id": env.id},
        )
        return auth

    def authorize_exceptional_release(
        self,
        wp_id: str,
        actor: str,
        ip_range: str,
        duration_hours: int,
        credential: ForwardedCredential | None = None,
    ) -> dict:
        """Record one party's authorization for an exceptional release.

        The release is dual-controlled: a grant appears only when both the
        provider representative and a programme manager have authorized the
        same window.
        """
        wp, _, project = self._wp_and_project(wp_id)
        rep_providers = self._providers_represented_by(actor)
        wp_providers = set(self._providers_by_dataset(wp).values())
        if rep_providers & wp_providers:
            role = Role.DATASET_PROVIDER_REPRESENTATIVE
        elif self._is_programme_manager(actor):
            role = Role.PROGRAMME_MANAGER
        else:
            raise AuthorizationError(
                "exceptional release needs the provider representative and a "
                "programme manager"
            )
        if duration_hours <= 0:
            raise InvalidInputError("the release window must have a positive duration")
        auth = ReleaseAuthorization(
            id=new_id("relauth"),
            work_package_id=wp_id,
            actor_id=actor,
            role=role,
            ip_range=ip_range,
            duration_hours=duration_hours,
            timestamp=self._now(),
        )
        self.store.put(auth, 0)
        self._audit(
            actor, "egress.exceptional_authorize", "work_package", wp_id,
            self._get("work_package", wp_id)[1],
            payload={"role": role.value, "ip_range": ip_range, "duration_hours": duration_hours},
        )
        grant = self._maybe_create_grant(wp_id, ip_range, duration_hours, actor, credential)
        return {
            "authorization": to_jsonable(auth),
            "grant": to_jsonable(grant) if grant else None,
        }

    def _maybe_create_grant(
        self,
        wp_id: str,
        ip_range: str,
        duration_hours: int,
        actor: str,
        credential: ForwardedCredential | None,
    ) -> ReleaseGrant | None:
        roles_present = set()
        rep_id = None
        for auth, _ in self.store.list("release_authorization"):
            if (
                auth.work_package_id == wp_id
                and auth.ip_range == ip_range
                and auth.duration_hours == duration_hours
            ):
                roles_present.add(auth.role)
                if auth.role is Role.DATASET_PROVIDER_REPRESENTATIVE:
                    rep_id = auth.actor_id
        if not (
            Role.DATASET_PROVIDER_REPRESENTATIVE in roles_present
            and Role.PROGRAMME_MANAGER in roles_present
        ):
            return None
        for grant, _ in self.store.list("release_grant"):
            if grant.work_package_id == wp_id and not grant.revoked:
                return grant
        now = self._now()
        volume = Volume(
            id=new_id("vol"),
            kind=VolumeKind.SECURE_DATA,
            mode=VolumeMode.READ_ONLY,
            state=VolumeState.SEALED,
            work_package_id=wp_id,
        )
        self._put_new(actor, "volume.release_copy", "volume", volume)
        self.store.put(VolumeContents(id=volume.id, files={}), 0)
        grant = ReleaseGrant(
            id=new_id("grant"),
            work_package_id=wp_id,
            volume_id=volume.id,
            ip_range=ip_range,
            opens_at=now,
            closes_at=now + timedelta(hours=duration_hours),
            representative_id=rep_id,
        )
        self.store.put(grant, 0)
        self._audit(
            actor, "egress.exceptional_grant", "release_grant", grant.id, 1,
            payload={"ip_range": ip_range, "closes_at": grant.closes_at},
        )
        if credential is not None:
            self.driver.apply_network_window(
                "egress-download", ip_range, str(grant.closes_at), credential
            )
        return grant

    def access_release_grant(
        self, grant_id: str, caller_ip: str, actor: str, now: datetime | None = None
    ) -> dict:
        grant, _ = self._get("release_grant", grant_id)
        allowed, reason = grant_allows(grant, caller_ip, now or self._now())
        if not allowed:
            self._audit(
                actor, "egress.access_denied", "release_grant", grant_id, 1,
                payload={"caller_ip": caller_ip, "reason": reason},
            )
            raise AuthorizationError(f"release access denied: {reason}")
        if actor != grant.representative_id:
            self._audit(
                actor, "egress.access_denied", "release_grant", grant_id, 1,
                payload={"caller_ip": caller_ip, "reason": "not the representative"},
            )
            raise AuthorizationError(
                "the release volume is accessible under the representative's credentials"
            )
        self._audit(
            actor, "egress.access", "release_grant", grant_id, 1,
            payload={"caller_ip": caller_ip},
        )
        contents = self._get("volume_contents", grant.volume_id)[0]
        return {"volume_id": grant.volume_id, "files": sorted(contents.files)}

    def revoke_expired_grants(self, now: datetime | None = None) -> list[str]:
        now = now or self._now()
        revoked = []
        for grant, version in self.store.list("release_grant"):
            if not grant.revoked and now >= grant.closes_at:
                self.store.put(replace(grant, revoked=True), version)
                self._audit(
                    SCHEDULER_ACTOR_ID, "egress.grant_revoked", "release_grant",
                    grant.id, version + 1,
                )
                revoked.append(grant.id)
        return revoked

    # -- software ingress ---------------------------------------------------------

    def register_preapproved_artifact(self, artifact_ref: str, actor: str) -> PreApprovedArtifact:
        if not self._is_programme_manager(actor):
            raise AuthorizationError(
                "the pre-approval registry is writable by programme managers only"
            )
        artifact = PreApprovedArtifact(
            id=f"preapproved-{artifact_ref.replace('/', '_')}",
            artifact_ref=artifact_ref,
            registered_by=actor,
        )
        existing = self.store.try_get("pre_approved_artifact", artifact.id)
        self.store.put(artifact, 0 if existing is None else existing[1])
        self._audit(actor, "software.preapprove", "pre_approved_artifact", artifact.id, 1)
        return artifact

    def _is_preapproved(self, artifact_ref: str) -> bool:
        return self.store.exists(
            "pre_approved_artifact", f"preapproved-{artifact_ref.replace('/', '_')}"
        )

    def request_software_ingress(
        self,
        environment_id: str,
        artifact_ref: str,
        actor: str,
        *,
        requires_admin_install: bool = False,
    ) -> SoftwareIngressRequest:
        env, _ = self._get("environment", environment_id)
        wp, _, project = self._wp_and_project(env.work_package_id)
        if actor not in project.member_ids() and not self._project_roles(project, actor):
            raise AuthorizationError("software is submitted by a project member")
        if env.tier <= Tier.TIER_1:
            raise GuardError(
                "tier 0/1 environments install software directly from the "
                "internet; the airlock applies from tier 2"
            )
        if self._is_preapproved(artifact_ref):
            volume = Volume(
                id=new_id("vol"),
                kind=VolumeKind.SOFTWARE_INGRESS,
                mode=VolumeMode.READ_ONLY,
                environment_id=environment_id,
                state=VolumeState.SEALED,
                work_package_id=env.work_package_id,
            )
            self._put_new(actor, "software.preapproved_attach", "volume", volume)
            self.store.put(VolumeContents(id=volume.id, files={}), 0)
            request = SoftwareIngressRequest(
                id=new_id("swreq"),
                environment_id=environment_id,
                volume_id=volume.id,
                submitted_by=actor,
                artifact_ref=artifact_ref,
                review_state=SoftwareReviewState.APPROVED_INTERNAL,
                requires_admin_install=requires_admin_install,
            )
            self.store.put(request, 0)
            self._audit(
                actor, "software.request", "software_ingress_request", request.id, 1,
                payload={"artifact_ref": artifact_ref, "preapproved": True},
            )
            return request
        volume = Volume(
            id=new_id("vol"),
            kind=VolumeKind.SOFTWARE_INGRESS,
            mode=VolumeMode.WRITE_ONLY,
            environment_id=environment_id,
            state=VolumeState.OPEN,
            work_package_id=env.work_package_id,
        )
        self._put_new(actor, "software.open_airlock", "volume", volume)
        self.store.put(VolumeContents(id=volume.id, files={}), 0)
        request = SoftwareIngressRequest(
            id=new_id("swreq"),
            environment_id=environment_id,
            volume_id=volume.id,
            submitted_by=actor,
            artifact_ref=artifact_ref,
            requires_admin_install=requires_admin_install,
        )
        self.store.put(request, 0)
        self._audit(
            actor, "software.request", "software_ingress_request", request.id, 1,
            payload={"artifact_ref": artifact_ref, "preapproved": False},
        )
        return request

    def submit_software(
        self, request_id: str, files: dict[str, bytes], actor: str
    ) -> SoftwareIngressRequest:
        request, version = self._get("software_ingress_request", request_id)
        if actor != request.submitted_by:
            raise AuthorizationError("only the requesting researcher may submit")
        if request.review_state is not SoftwareReviewState.AWAITING_SUBMISSION:
            raise GuardError("the write-only window has been revoked")
        contents, contents_version = self._get("volume_contents", request.volume_id)
        stored = dict(contents.files)
        for path, content in files.items():
            stored[path] = content.hex()
        self.store.put(VolumeContents(id=request.volume_id, files=stored), contents_version)
        request = replace(request, review_state=SoftwareReviewState.AWAITING_REVIEW)
        self.store.put(request, version)
        self._audit(
            actor, "software.submit", "software_ingress_request", request_id,
            version + 1, payload={"files": sorted(files)},
        )
        return request

    def signoff_software(
        self, request_id: str, actor: str, *, approve: bool = True
    ) -> SoftwareIngressRequest:
        request, version = self._get("software_ingress_request", request_id)
        env = self._get("environment", request.environment_id)[0]
        wp, _, project = self._wp_and_project(env.work_package_id)
        roles = self._project_roles(project, actor)
        if Role.INVESTIGATOR in roles:
            role = Role.INVESTIGATOR
        elif Role.REFEREE in roles:
            role = Role.REFEREE
        else:
            raise AuthorizationError(
                "software review is signed by the investigator or the referee"
            )
        if request.review_state is not SoftwareReviewState.AWAITING_REVIEW:
            raise GuardError(f"request is not awaiting review ({request.review_state.value})")
        if not approve:
            request = replace(request, review_state=SoftwareReviewState.REJECTED)
            self.store.put(request, version)
            self._audit(
                actor, "software.reject", "software_ingress_request", request_id,
                version + 1, payload={"role": role.value},
            )
            return request
        if any(s.role is role for s in request.signoffs):
            raise ConflictError(f"{role.value} has already signed this request")
        request = replace(
            request, signoffs=request.signoffs + (Signoff(role, actor, self._now()),)
        )
        policy = resolve_policy(env.tier)
        if signoffs_satisfy(policy.software_ingress_signoff, request.signoffs):
            request = replace(request, review_state=SoftwareReviewState.APPROVED_INTERNAL)
        self.store.put(request, version)
        self._audit(
            actor, "software.signoff", "software_ingress_request", request_id,
            version + 1,
            payload={"role": role.value, "state": request.review_state.value},
        )
        if request.review_state is SoftwareReviewState.APPROVED_INTERNAL:
            volume, vol_version = self._get("volume", request.volume_id)
            volume = replace(volume, mode=VolumeMode.READ_ONLY, state=VolumeState.SEALED)
            self._put_update(actor, "software.internal_mode", "volume", volume, vol_version)
        return request

    def execute_admin_install(
        self, request_id: str, actor: str, credential: ForwardedCredential
    ) -> dict:
        request, _ = self._get("software_ingress_request", request_id)
        if not self._is_system_manager(actor):
            raise AuthorizationError(
                "administrative installs are executed by a system manager"
            )
        if request.review_state is not SoftwareReviewState.APPROVED_INTERNAL:
            raise GuardError("the request has not passed review")
        if not request.requires_admin_install:
            raise GuardError("this artifact does not need administrative rights")
        ack = self.driver.execute_admin_install(
            request.environment_id, request.artifact_ref, credential
        )
        self._audit(
            actor, "software.admin_install", "software_ingress_request", request_id, 1,
            payload=ack,
        )
        return ack

    # -- exposure windows -----------------------------------------------------------

    def open_exposure_window(
        self,
        view_id: str,
        ip_range: str,
        duration_hours: int,
        actor: str,
        credential: ForwardedCredential | None = None,
    ) -> ExposureWindow:
        """Temporarily expose a whitelisted external view to an IP range.

        Overlapping windows for the same view and range merge into the one
        with the latest close time.
        """
        if view_id not in self.config.external_views:
            raise GuardError(f"view {view_id} is not externally whitelisted")
        self._user(actor)
        is_manager = self._is_programme_manager(actor) or any(
            project.project_manager_id == actor
            for project, _ in self.store.list("project")
        )
        if not is_manager:
            raise AuthorizationError(
                "exposure windows are opened by programme or project managers"
            )
        if duration_hours <= 0:
            raise InvalidInputError("window duration must be positive")
        now = self._now()
        closes_at = now + timedelta(hours=duration_hours)
        for window, version in self.store.list("exposure_window"):
            if (
                window.view_id == view_id
                and window.ip_range == ip_range
                and window.closes_at > now
            ):
                merged = replace(window, closes_at=max(window.closes_at, closes_at))
                self.store.put(merged, version)
                self._audit(
                    actor, "window.extend", "exposure_window", merged.id, version + 1,
                    payload={"closes_at": merged.closes_at},
                )
                return merged
        window = ExposureWindow(
            id=new_id("window"),
            view_id=view_id,
            ip_range=ip_range,
            opens_at=now,
            closes_at=closes_at,
            opened_by=actor,
        )
        self.store.put(window, 0)
        self._audit(
            actor, "window.open", "exposure_window", window.id, 1,
            payload={"view_id": view_id, "ip_range": ip_range, "closes_at": closes_at},
        )
        if credential is not None:
            self.driver.apply_network_window(
                view_id, ip_range, str(closes_at), credential
            )
        return window

    # -- capability probes ------------------------------------------------------

    def _fork_for_probe(self) -> "ManagementFramework":
        """A throwaway copy of the current state for side-effect-free probes."""
        from .store import MemoryKV
        from .audit import MemoryAuditBackend

        backend = MemoryKV()
        for key, raw in self.store._backend.scan(""):
            backend.compare_and_set(key, None, raw)
        audit_backend = MemoryAuditBackend()
        for line in self.audit._backend.lines():
            audit_backend.append_line(line)
        return ManagementFramework(
            store=EntityStore(backend),
            audit_log=AuditLog(audit_backend, clock=self.clock),
            clock=self.clock,
            driver=SimulatorDriver(),
            notifier=CollectingNotifier(),
            config=self.config,
        )

    def probe_capability(self, action: str, actor: str, target: dict) -> dict:
        """Would this action succeed for this actor right now?

        The console renders buttons from these probes instead of deciding
        authorization locally; the probe executes the real operation against
        a discarded copy of the state, so it can never drift from the rules.
        """
        probes: dict[str, Callable[[ManagementFramework], Any]] = {
            "complete_ingress": lambda fw: fw.complete_ingress(
                target["volume_id"], actor
            ),
            "verify_integrity": lambda fw: fw.verify_integrity(
                target["volume_id"], actor=actor
            ),
            "signoff_release": lambda fw: fw.signoff_release(
                target["release_id"], actor
            ),
            "signoff_software": lambda fw: fw.signoff_software(
                target["request_id"], actor
            ),
            "counter_approve_member": lambda fw: fw.counter_approve_member(
                target["project_id"], target["user_id"], actor
            ),
            "acknowledge_halt": lambda fw: fw.acknowledge_halt(
                target["work_package_id"], actor
            ),
            "resolve_consensus": lambda fw: fw.resolve_work_package_consensus(
                target["work_package_id"], actor
            ),
            "submit_classification": lambda fw: fw.submit_classification(
                target["work_package_id"],
                actor,
                QuestionnaireAnswers(
                    personal_data_status=PersonalDataStatus.NONE,
                    deidentification_confidence=(
                        DeidentificationConfidence.NOT_APPLICABLE
                    ),
                    substantial_threat_to_subjects=False,
                    sophisticated_attacker_target=False,
                    commercial_sensitivity=CommercialSensitivity.NONE,
                    publication_intent=PublicationIntent.CONFIDENTIAL,
                ),
            ),
            "seal_volume": lambda fw: fw.seal_volume(target["volume_id"], actor),
        }
        if action not in probes:
            raise InvalidInputError(f"unknown capability {action}")
        fork = self._fork_for_probe()
        try:
            probes[action](fork)
        except SafeHavenError as exc:
            return {"action": action, "allowed": False, "reason": str(exc)}
        except Exception as exc:
            return {"action": action, "allowed": False, "reason": str(exc)}
        return {"action": action, "allowed": True, "reason": None}

    def active_window_for(
        self, view_id: str, caller_ip: str, now: datetime | None = None
    ) -> ExposureWindow | None:
        import ipaddress

        now = now or self._now()
        try:
            address = ipaddress.ip_address(caller_ip)
        except ValueError:
            return None
        for window, _ in self.store.list("exposure_window"):
            if window.view_id != view_id:
                continue
            if not (window.opens_at <= now < window.closes_at):
                continue
            try:
                network = ipaddress.ip_network(window.ip_range, strict=False)
            except ValueError:
                continue
            if address in network:
                return window
        return None

    def list_exposure_windows(self) -> list[dict]:
        return [to_jsonable(w) for w, _ in self.store.list("exposure_window")]
