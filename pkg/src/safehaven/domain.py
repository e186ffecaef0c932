"""Entities and roles for secure data research projects.

All types are frozen value objects; mutation happens by writing a
replaced copy through the versioned entity store. ``validate_entity``
is the single total validation entry point used by persistence and the
API layer.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Any, Mapping

from .canonical import structure, to_jsonable


class Tier(IntEnum):
    """Sensitivity tier; totally ordered, higher is more sensitive."""

    TIER_0 = 0
    TIER_1 = 1
    TIER_2 = 2
    TIER_3 = 3
    TIER_4 = 4

    @classmethod
    def from_level(cls, level: int) -> "Tier":
        try:
            return cls(level)
        except ValueError:
            raise ValueError(f"tier level must be in 0..4, got {level!r}") from None


class Role(str, Enum):
    RESEARCHER = "researcher"
    INVESTIGATOR = "investigator"
    REFEREE = "referee"
    DATASET_PROVIDER_REPRESENTATIVE = "dataset_provider_representative"
    PROGRAMME_MANAGER = "programme_manager"
    PROJECT_MANAGER = "project_manager"
    SYSTEM_MANAGER = "system_manager"


class ProjectState(str, Enum):
    ACTIVE = "active"
    CLOSED = "closed"


class WorkPackageState(str, Enum):
    DRAFT = "draft"
    INITIAL_CLASSIFIED = "initial_classified"
    INGRESSED_TIER3 = "ingressed_tier3"
    FULL_CLASSIFICATION = "full_classification"
    CONSENSUS_REACHED = "consensus_reached"
    ACTIVE = "active"
    EGRESS_PENDING = "egress_pending"
    SUPERSEDED = "superseded"
    CLOSED = "closed"


class EnvironmentState(str, Enum):
    REQUESTED = "requested"
    PROVISIONED = "provisioned"
    ACTIVE = "active"
    DECOMMISSIONED = "decommissioned"


class VolumeKind(str, Enum):
    SECURE_DATA = "secure_data"
    SECURE_DOCUMENT = "secure_document"
    SECURE_SCRATCH = "secure_scratch"
    OUTPUT = "output"
    SOFTWARE = "software"
    HOME = "home"
    SOFTWARE_INGRESS = "software_ingress"


class VolumeMode(str, Enum):
    READ_ONLY = "read_only"
    READ_WRITE = "read_write"
    WRITE_ONLY = "write_only"


class VolumeState(str, Enum):
    OPEN = "open"
    SEALED = "sealed"
    DELETED = "deleted"


class MembershipStatus(str, Enum):
    PENDING_COUNTER_APPROVAL = "pending_counter_approval"
    ACTIVE = "active"


@dataclass(frozen=True)
class User:
    id: str
    display_name: str
    training_certified: bool
    directory_credential_ref: str
    system_roles: frozenset[Role] = frozenset()
    guest: bool = False


@dataclass(frozen=True)
class DatasetProvider:
    id: str
    name: str
    representative_user_id: str


@dataclass(frozen=True)
class Dataset:
    id: str
    provider_id: str
    provider_hash: str
    lawful_basis_certified: bool = False
    contractual_terms: str = ""
    # Reference to the executed (signed) data sharing agreement; must be
    # present before any ingress for the dataset begins.
    sharing_agreement_doc_ref: str | None = None


@dataclass(frozen=True)
class DerivationLink:
    """Provenance of a work package created by egress/reclassification."""

    work_package_id: str
    environment_id: str
    analysis_script_ref: str


@dataclass(frozen=True)
class WorkPackage:
    id: str
    project_id: str
    dataset_ids: frozenset[str]
    intended_analysis: str
    expected_outputs: str
    intended_tools: str
    state: WorkPackageState = WorkPackageState.DRAFT
    derived_from: DerivationLink | None = None
    pre_approved_outputs: tuple[str, ...] = ()
    declared_future_dataset_ids: frozenset[str] = frozenset()
    preliminary_tier: Tier | None = None
    final_tier: Tier | None = None
    dpia_ref: str | None = None
    ethics_approval_ref: str | None = None
    # Derived from recorded questionnaire answers at consensus time.
    personal_data: bool = False
    anonymised_from_personal: bool = False
    halt_flag: bool = False
    halt_acknowledged: bool = False
    supersedes: str | None = None
    superseded_by: str | None = None


@dataclass(frozen=True)
class Membership:
    user_id: str
    role: Role
    status: MembershipStatus


@dataclass(frozen=True)
class Project:
    id: str
    programme_manager_id: str
    project_manager_id: str
    investigator_id: str
    memberships: tuple[Membership, ...] = ()
    state: ProjectState = ProjectState.ACTIVE
    work_package_ids: tuple[str, ...] = ()

    def member_ids(self) -> frozenset[str]:
        active = {
            m.user_id for m in self.memberships if m.status is MembershipStatus.ACTIVE
        }
        active.add(self.investigator_id)
        return frozenset(active)

    def roles_of(self, user_id: str, *, include_pending: bool = False) -> frozenset[Role]:
        roles = set()
        if user_id == self.investigator_id:
            roles.add(Role.INVESTIGATOR)
        if user_id == self.project_manager_id:
            roles.add(Role.PROJECT_MANAGER)
        if user_id == self.programme_manager_id:
            roles.add(Role.PROGRAMME_MANAGER)
        for m in self.memberships:
            if m.user_id == user_id and (
                include_pending or m.status is MembershipStatus.ACTIVE
            ):
                roles.add(m.role)
        return frozenset(roles)


@dataclass(frozen=True)
class Environment:
    id: str
    work_package_id: str
    tier: Tier
    platform_id: str
    state: EnvironmentState = EnvironmentState.REQUESTED
    blueprint_ref: str | None = None
    volume_ids: tuple[str, ...] = ()
    derived_from_environment_id: str | None = None


@dataclass(frozen=True)
class Volume:
    id: str
    kind: VolumeKind
    mode: VolumeMode
    environment_id: str | None = None
    state: VolumeState = VolumeState.OPEN
    dataset_id: str | None = None
    work_package_id: str | None = None
    retention_days: int | None = None


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    def ok(self) -> bool:
        return not self.violations


_RESEARCH_TEAM_ROLES = frozenset({Role.RESEARCHER, Role.INVESTIGATOR})

# States a work package may hold once consensus has been recorded; the
# final tier must never be present outside them.
_POST_CONSENSUS_STATES = frozenset(
    {
        WorkPackageState.CONSENSUS_REACHED,
        WorkPackageState.ACTIVE,
        WorkPackageState.EGRESS_PENDING,
        WorkPackageState.SUPERSEDED,
        WorkPackageState.CLOSED,
    }
)


def validate_entity(entity: Any) -> ValidationReport:
    """Check every type invariant; total, deterministic, side-effect free."""
    problems: list[str] = []
    if isinstance(entity, (Tier, bool)):
        pass
    elif isinstance(entity, int):
        # Raw tier levels arrive from external input before Tier construction.
        if entity not in (0, 1, 2, 3, 4):
            problems.append(f"tier level must be in 0..4, got {entity}")
    elif isinstance(entity, User):
        _validate_user(entity, problems)
    elif isinstance(entity, DatasetProvider):
        _validate_provider(entity, problems)
    elif isinstance(entity, Dataset):
        _validate_dataset(entity, problems)
    elif isinstance(entity, WorkPackage):
        _validate_work_package(entity, problems)
    elif isinstance(entity, Project):
        _validate_project(entity, problems)
    elif isinstance(entity, Environment):
        _validate_environment(entity, problems)
    elif isinstance(entity, Volume):
        _validate_volume(entity, problems)
    return ValidationReport(tuple(problems))


def _validate_user(user: User, problems: list[str]) -> None:
    if not user.id:
        problems.append("user id must be non-empty")
    if not user.display_name:
        problems.append("user display_name must be non-empty")


def _validate_provider(provider: DatasetProvider, problems: list[str]) -> None:
    if not provider.representative_user_id:
        problems.append("provider must have exactly one current representative")
    if not provider.name:
        problems.append("provider name must be non-empty")


def _validate_dataset(dataset: Dataset, problems: list[str]) -> None:
    if not dataset.provider_id:
        problems.append("dataset must reference a provider")
    if dataset.provider_hash and not _is_hex(dataset.provider_hash):
        problems.append("dataset provider_hash must be a hex digest")


def _validate_work_package(wp: WorkPackage, problems: list[str]) -> None:
    if not wp.dataset_ids:
        problems.append("work package dataset_ids must be a non-empty set")
    if wp.final_tier is not None and wp.state not in _POST_CONSENSUS_STATES:
        problems.append("final_tier is set only after consensus is recorded")
    if wp.derived_from is not None:
        link = wp.derived_from
        if not (link.work_package_id and link.environment_id and link.analysis_script_ref):
            problems.append("derived_from must carry source work package, environment and script")
    if (
        wp.personal_data
        and wp.state is WorkPackageState.ACTIVE
        and not wp.dpia_ref
    ):
        problems.append("personal-data work package requires dpia_ref before Active")


def _validate_project(project: Project, problems: list[str]) -> None:
    if not project.investigator_id:
        problems.append("project must have exactly one accountable investigator")
    if not project.project_manager_id:
        problems.append("project must have a project manager")
    seen: set[tuple[str, Role]] = set()
    team = {project.investigator_id}
    team.update(
        m.user_id for m in project.memberships if m.role in _RESEARCH_TEAM_ROLES
    )
    for m in project.memberships:
        key = (m.user_id, m.role)
        if key in seen:
            problems.append(f"duplicate membership for {m.user_id} as {m.role.value}")
        seen.add(key)
        if m.role is Role.REFEREE and m.user_id in team:
            problems.append(
                f"referee {m.user_id} must not be a member of the project's research team"
            )


def _validate_environment(env: Environment, problems: list[str]) -> None:
    if not env.work_package_id:
        problems.append("environment must belong to a work package")
    if not env.platform_id:
        problems.append("environment must name a platform")


# Expected mode per volume kind while mounted in an environment and open.
_MOUNTED_OPEN_MODES: Mapping[VolumeKind, VolumeMode] = {
    VolumeKind.SECURE_DATA: VolumeMode.READ_ONLY,
    VolumeKind.SECURE_DOCUMENT: VolumeMode.READ_ONLY,
    VolumeKind.SOFTWARE: VolumeMode.READ_ONLY,
    VolumeKind.SECURE_SCRATCH: VolumeMode.READ_WRITE,
    VolumeKind.OUTPUT: VolumeMode.READ_WRITE,
    VolumeKind.HOME: VolumeMode.READ_WRITE,
}


def _validate_volume(volume: Volume, problems: list[str]) -> None:
    if volume.kind is VolumeKind.SOFTWARE_INGRESS:
        if volume.mode is VolumeMode.READ_WRITE:
            problems.append(
                "software ingress volume alternates write-only (external) and "
                "read-only (internal); read-write is never valid"
            )
        return
    if volume.state is VolumeState.DELETED:
        return
    if volume.state is VolumeState.SEALED:
        if volume.mode is not VolumeMode.READ_ONLY:
            problems.append(f"sealed {volume.kind.value} volume must be read-only")
        return
    if volume.environment_id is not None:
        expected = _MOUNTED_OPEN_MODES[volume.kind]
        if volume.mode is not expected:
            problems.append(
                f"{volume.kind.value} volume mounted in an environment must be "
                f"{expected.value}, got {volume.mode.value}"
            )


def _is_hex(value: str) -> bool:
    try:
        int(value, 16)
    except ValueError:
        return False
    return True


# Canonical (de)serialization registry -------------------------------------

ENTITY_TYPES: Mapping[str, type] = {
    "user": User,
    "dataset_provider": DatasetProvider,
    "dataset": Dataset,
    "work_package": WorkPackage,
    "project": Project,
    "environment": Environment,
    "volume": Volume,
}

_TYPE_NAMES = {cls: name for name, cls in ENTITY_TYPES.items()}


def entity_type_name(entity: Any) -> str:
    return _TYPE_NAMES[type(entity)]


def entity_to_dict(entity: Any) -> dict:
    return to_jsonable(entity)


def entity_from_dict(type_name: str, data: Mapping[str, Any]) -> Any:
    return structure(ENTITY_TYPES[type_name], dict(data))


_REFERENCE_FIELDS = {
    "dataset": (("provider_id", "dataset_provider"),),
    "work_package": (("project_id", "project"),),
    "volume": (("environment_id", "environment"), ("dataset_id", "dataset")),
    "environment": (("work_package_id", "work_package"),),
    "dataset_provider": (("representative_user_id", "user"),),
}


def check_referential_integrity(
    snapshot: Mapping[str, Mapping[str, Any]]
) -> tuple[str, ...]:
    """Find references to ids that do not exist in a store snapshot.

    ``snapshot`` maps entity type name to {id: entity}.
    """
    problems: list[str] = []

    def exists(type_name: str, entity_id: str) -> bool:
        return entity_id in snapshot.get(type_name, {})

    for type_name, entities in snapshot.items():
        for entity_id, entity in entities.items():
            for field_name, target_type in _REFERENCE_FIELDS.get(type_name, ()):
                ref = getattr(entity, field_name, None)
                if ref is not None and not exists(target_type, ref):
                    problems.append(
                        f"{type_name} {entity_id}: {field_name} -> missing {target_type} {ref}"
                    )
            if type_name == "work_package":
                for dataset_id in entity.dataset_ids:
                    if not exists("dataset", dataset_id):
                        problems.append(
                            f"work_package {entity_id}: dataset_ids -> missing dataset {dataset_id}"
                        )
            if type_name == "project":
                for wp_id in entity.work_package_ids:
                    if not exists("work_package", wp_id):
                        problems.append(
                            f"project {entity_id}: work_package_ids -> missing work_package {wp_id}"
                        )
    return tuple(problems)
