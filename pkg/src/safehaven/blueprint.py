"""Declarative environment blueprints.

Blueprints are documents, never executed by this package; a platform
driver accepts one and returns a provisioning acknowledgement. Planning
is deterministic so that semantically equal plans serialize to identical
bytes, which also pins the file format with golden documents.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .canonical import canonical_json, structure, to_jsonable
from .domain import (
    Environment,
    EnvironmentState,
    Tier,
    Volume,
    VolumeKind,
    VolumeMode,
    VolumeState,
    WorkPackage,
    WorkPackageState,
)
from .policy import (
    ConnectionPolicy,
    CopyPastePolicy,
    DeviceClass,
    DevicePolicy,
    MirrorMode,
    OutboundNetwork,
    PhysicalSecurity,
    SoftwareIngressSignoff,
    resolve_policy,
)

BLUEPRINT_SCHEMA_VERSION = "1.0"

DEFAULT_SCRATCH_RETENTION_DAYS = 7
DEFAULT_TOOL_MANIFEST_REF = "tool-manifests/core-data-science"
DEFAULT_WHITELIST_REF = "package-whitelists/approved"

# Local substitutes for public services, present whenever the environment
# cannot reach the internet.
ISOLATED_INTERNAL_SERVICES = (
    "collaborative-authoring",
    "relational-database",
    "version-control",
)


class AccessProtocol(str, Enum):
    REMOTE_DESKTOP = "remote_desktop"
    SSH = "ssh"
    BOTH = "both"


@dataclass(frozen=True)
class NetworkPlan:
    inbound_sources: tuple[str, ...]
    outbound: OutboundNetwork
    internal_isolated: bool


@dataclass(frozen=True)
class AccessNodePlan:
    protocol: AccessProtocol
    mfa_required: bool
    clipboard_sharing: bool
    disk_sharing: bool
    allowed_devices: tuple[DeviceClass, ...]
    physical_security: PhysicalSecurity


@dataclass(frozen=True)
class MirrorConfig:
    mode: MirrorMode
    max_lag_days: int | None = None
    whitelist_ref: str | None = None
    fast_track_security: bool = False


@dataclass(frozen=True)
class VolumeSpec:
    kind: VolumeKind
    mode: VolumeMode
    dataset_id: str | None = None
    source_volume_id: str | None = None
    retention_days: int | None = None


@dataclass(frozen=True)
class GovernancePlan:
    copy_paste: CopyPastePolicy
    software_ingress_signoff: SoftwareIngressSignoff
    referee_required: bool
    provider_counter_approval: bool


@dataclass(frozen=True)
class ComputePlan:
    node_count: int = 1
    many_core: bool = False


@dataclass(frozen=True)
class Lineage:
    derived_from_environment_id: str
    analysis_script_ref: str


@dataclass(frozen=True)
class Blueprint:
    schema_version: str
    environment_id: str
    tier: Tier
    network: NetworkPlan
    access_node: AccessNodePlan
    mirror_config: MirrorConfig
    volumes: tuple[VolumeSpec, ...]
    internal_services: tuple[str, ...]
    compute: ComputePlan
    governance: GovernancePlan
    tool_manifest_ref: str
    lineage: Lineage | None = None


class PlanningError(ValueError):
    """Blueprint planning preconditions not met."""


def environment_id_for(wp_id: str, platform_id: str, tier: Tier) -> str:
    # Deterministic by construction: one environment per work package per
    # tier decision, so the triple is unique and planning stays pure.
    return f"env-{wp_id}-{platform_id}-t{int(tier)}"


def _aux_volume_specs(retention_days: int) -> list[VolumeSpec]:
    return [
        VolumeSpec(VolumeKind.HOME, VolumeMode.READ_WRITE),
        VolumeSpec(VolumeKind.OUTPUT, VolumeMode.READ_WRITE),
        VolumeSpec(VolumeKind.SECURE_DOCUMENT, VolumeMode.READ_ONLY),
        VolumeSpec(
            VolumeKind.SECURE_SCRATCH, VolumeMode.READ_WRITE, retention_days=retention_days
        ),
        VolumeSpec(VolumeKind.SOFTWARE, VolumeMode.READ_ONLY),
    ]


def _sorted_volumes(specs: list[VolumeSpec]) -> tuple[VolumeSpec, ...]:
    return tuple(
        sorted(
            specs,
            key=lambda s: (s.kind.value, s.dataset_id or "", s.source_volume_id or ""),
        )
    )


def _plan_common(
    environment_id: str,
    tier: Tier,
    data_specs: list[VolumeSpec],
    compute: ComputePlan,
    retention_days: int,
    lineage: Lineage | None,
) -> Blueprint:
    policy = resolve_policy(tier)
    isolated = policy.outbound_network is OutboundNetwork.ISOLATED
    open_tier = tier <= Tier.TIER_1

    if policy.package_mirror.mode is MirrorMode.FULL_MIRROR:
        mirror = MirrorConfig(
            mode=MirrorMode.FULL_MIRROR,
            max_lag_days=policy.package_mirror.max_lag_days,
            fast_track_security=True,
        )
    elif policy.package_mirror.mode is MirrorMode.WHITELIST_MIRROR:
        mirror = MirrorConfig(
            mode=MirrorMode.WHITELIST_MIRROR, whitelist_ref=DEFAULT_WHITELIST_REF
        )
    else:
        mirror = MirrorConfig(mode=MirrorMode.DIRECT_FROM_INTERNET)

    if policy.device_policy is DevicePolicy.MANAGED_ONLY:
        allowed_devices: tuple[DeviceClass, ...] = (DeviceClass.MANAGED,)
    else:
        allowed_devices = (DeviceClass.MANAGED, DeviceClass.OPEN)

    return Blueprint(
        schema_version=BLUEPRINT_SCHEMA_VERSION,
        environment_id=environment_id,
        tier=tier,
        network=NetworkPlan(
            inbound_sources=(policy.inbound_network.value,),
            outbound=policy.outbound_network,
            internal_isolated=isolated,
        ),
        access_node=AccessNodePlan(
            protocol=AccessProtocol.BOTH
            if policy.connection is ConnectionPolicy.SSH_AND_DESKTOP
            else AccessProtocol.REMOTE_DESKTOP,
            mfa_required=True,
            clipboard_sharing=open_tier,
            disk_sharing=open_tier,
            allowed_devices=allowed_devices,
            physical_security=policy.physical_security,
        ),
        mirror_config=mirror,
        volumes=_sorted_volumes(data_specs + _aux_volume_specs(retention_days)),
        internal_services=ISOLATED_INTERNAL_SERVICES if isolated else (),
        compute=compute,
        governance=GovernancePlan(
            copy_paste=policy.copy_paste,
            software_ingress_signoff=policy.software_ingress_signoff,
            referee_required=policy.referee_required,
            provider_counter_approval=policy.provider_counter_approval,
        ),
        tool_manifest_ref=DEFAULT_TOOL_MANIFEST_REF,
        lineage=lineage,
    )


def plan_environment(
    wp: WorkPackage,
    tier: Tier,
    platform_id: str,
    *,
    compute: ComputePlan | None = None,
    scratch_retention_days: int = DEFAULT_SCRATCH_RETENTION_DAYS,
    initial_ingress: bool = False,
) -> Blueprint:
    """Plan the environment for a work package at its agreed tier.

    ``initial_ingress`` plans the tier-3 review environment used before a
    final classification exists.
    """
    tier = Tier(tier)
    if initial_ingress:
        if tier is not Tier.TIER_3:
            raise PlanningError("initial ingress environments are planned at tier 3")
    elif wp.final_tier is None:
        raise PlanningError("work package has no agreed tier")
    elif wp.final_tier is not tier:
        raise PlanningError(
            f"work package agreed tier is {int(wp.final_tier)}, requested {int(tier)}"
        )
    if not platform_id:
        raise PlanningError("unknown platform")

    data_specs = [
        VolumeSpec(VolumeKind.SECURE_DATA, VolumeMode.READ_ONLY, dataset_id=dataset_id)
        for dataset_id in sorted(wp.dataset_ids)
    ]
    return _plan_common(
        environment_id=environment_id_for(wp.id, platform_id, tier),
        tier=tier,
        data_specs=data_specs,
        compute=compute or ComputePlan(),
        retention_days=scratch_retention_days,
        lineage=None,
    )


def plan_derived_environment(
    source_env: Environment,
    output_volume: Volume,
    new_tier: Tier,
    derived_wp: WorkPackage,
    *,
    platform_id: str | None = None,
    compute: ComputePlan | None = None,
    scratch_retention_days: int = DEFAULT_SCRATCH_RETENTION_DAYS,
) -> Blueprint:
    """Plan an environment whose secure data is a sealed egress volume."""
    new_tier = Tier(new_tier)
    if source_env.state not in (EnvironmentState.PROVISIONED, EnvironmentState.ACTIVE):
        raise PlanningError("source environment is not active")
    if output_volume.state is not VolumeState.SEALED:
        raise PlanningError("output volume must be sealed before derivation")
    if derived_wp.derived_from is None:
        raise PlanningError("work package is not a derived work package")
    if derived_wp.final_tier is None or derived_wp.state not in (
        WorkPackageState.CONSENSUS_REACHED,
        WorkPackageState.ACTIVE,
    ):
        raise PlanningError("derived work package consensus has not been recorded")
    if derived_wp.final_tier is not new_tier:
        raise PlanningError(
            f"derived work package agreed tier is {int(derived_wp.final_tier)}, "
            f"requested {int(new_tier)}"
        )

    platform = platform_id or source_env.platform_id
    data_specs = [
        VolumeSpec(
            VolumeKind.SECURE_DATA,
            VolumeMode.READ_ONLY,
            source_volume_id=output_volume.id,
        )
    ]
    return _plan_common(
        environment_id=environment_id_for(derived_wp.id, platform, new_tier),
        tier=new_tier,
        data_specs=data_specs,
        compute=compute or ComputePlan(),
        retention_days=scratch_retention_days,
        lineage=Lineage(
            derived_from_environment_id=source_env.id,
            analysis_script_ref=derived_wp.derived_from.analysis_script_ref,
        ),
    )


def blueprint_to_dict(bp: Blueprint) -> dict:
    return to_jsonable(bp)


def blueprint_to_json(bp: Blueprint) -> str:
    return canonical_json(bp)


def blueprint_from_dict(data: dict) -> Blueprint:
    return structure(Blueprint, data)
