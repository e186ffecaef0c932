"""Per-tier control matrix and blueprint conformance checking.

``resolve_policy`` is the single authority for what each tier permits;
``validate_blueprint`` checks that a declarative environment plan
reproduces its tier's controls exactly, reporting one violation per
mismatched control element.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Mapping

from .domain import Tier

if TYPE_CHECKING:
    from .blueprint import Blueprint

POLICY_MATRIX_VERSION = "1.0"

FULL_MIRROR_MAX_LAG_DAYS = 42


class MirrorMode(str, Enum):
    DIRECT_FROM_INTERNET = "direct_from_internet"
    FULL_MIRROR = "full_mirror"
    WHITELIST_MIRROR = "whitelist_mirror"


class NetworkClass(str, Enum):
    INTERNET = "internet"
    INSTITUTIONAL = "institutional"
    RESTRICTED = "restricted"


class OutboundNetwork(str, Enum):
    INTERNET = "internet"
    ISOLATED = "isolated"


class DevicePolicy(str, Enum):
    OPEN_ALLOWED = "open_allowed"
    MANAGED_ONLY = "managed_only"


class DeviceClass(str, Enum):
    OPEN = "open"
    MANAGED = "managed"


class PhysicalSecurity(str, Enum):
    OPEN = "open"
    MEDIUM = "medium"
    HIGH = "high"


class ConnectionPolicy(str, Enum):
    SSH_AND_DESKTOP = "ssh_and_desktop"
    REMOTE_DESKTOP_ONLY = "remote_desktop_only"


class CopyPastePolicy(str, Enum):
    ALLOWED_WITH_APPROVAL = "allowed_with_approval"
    FORBIDDEN_BY_POLICY_ONLY = "forbidden_by_policy_only"
    DISABLED_TECHNICALLY = "disabled_technically"


class SoftwareIngressSignoff(str, Enum):
    USER_DIRECT = "user_direct"
    INVESTIGATOR_SIGNOFF = "investigator_signoff"
    INVESTIGATOR_PLUS_REFEREE = "investigator_plus_referee"


@dataclass(frozen=True)
class MirrorPolicy:
    mode: MirrorMode
    max_lag_days: int | None = None

    def __post_init__(self) -> None:
        if (self.mode is MirrorMode.FULL_MIRROR) != (self.max_lag_days is not None):
            raise ValueError("max_lag_days is present iff mode is full_mirror")


@dataclass(frozen=True)
class EnvironmentPolicy:
    package_mirror: MirrorPolicy
    inbound_network: NetworkClass
    outbound_network: OutboundNetwork
    device_policy: DevicePolicy
    physical_security: PhysicalSecurity
    connection: ConnectionPolicy
    copy_paste: CopyPastePolicy
    software_ingress_signoff: SoftwareIngressSignoff
    referee_required: bool
    provider_counter_approval: bool


_OPEN_TIER_POLICY = EnvironmentPolicy(
    package_mirror=MirrorPolicy(MirrorMode.DIRECT_FROM_INTERNET),
    inbound_network=NetworkClass.INTERNET,
    outbound_network=OutboundNetwork.INTERNET,
    device_policy=DevicePolicy.OPEN_ALLOWED,
    physical_security=PhysicalSecurity.OPEN,
    connection=ConnectionPolicy.SSH_AND_DESKTOP,
    copy_paste=CopyPastePolicy.ALLOWED_WITH_APPROVAL,
    software_ingress_signoff=SoftwareIngressSignoff.USER_DIRECT,
    referee_required=False,
    provider_counter_approval=False,
)

_TIER_2_POLICY = EnvironmentPolicy(
    package_mirror=MirrorPolicy(MirrorMode.FULL_MIRROR, FULL_MIRROR_MAX_LAG_DAYS),
    inbound_network=NetworkClass.INSTITUTIONAL,
    outbound_network=OutboundNetwork.ISOLATED,
    device_policy=DevicePolicy.OPEN_ALLOWED,
    physical_security=PhysicalSecurity.OPEN,
    connection=ConnectionPolicy.REMOTE_DESKTOP_ONLY,
    copy_paste=CopyPastePolicy.FORBIDDEN_BY_POLICY_ONLY,
    software_ingress_signoff=SoftwareIngressSignoff.INVESTIGATOR_SIGNOFF,
    referee_required=True,
    provider_counter_approval=False,
)

_TIER_3_POLICY = EnvironmentPolicy(
    package_mirror=MirrorPolicy(MirrorMode.WHITELIST_MIRROR),
    inbound_network=NetworkClass.RESTRICTED,
    outbound_network=OutboundNetwork.ISOLATED,
    device_policy=DevicePolicy.MANAGED_ONLY,
    physical_security=PhysicalSecurity.MEDIUM,
    connection=ConnectionPolicy.REMOTE_DESKTOP_ONLY,
    copy_paste=CopyPastePolicy.DISABLED_TECHNICALLY,
    software_ingress_signoff=SoftwareIngressSignoff.INVESTIGATOR_PLUS_REFEREE,
    referee_required=True,
    provider_counter_approval=True,
)

_TIER_4_POLICY = EnvironmentPolicy(
    package_mirror=MirrorPolicy(MirrorMode.WHITELIST_MIRROR),
    inbound_network=NetworkClass.RESTRICTED,
    outbound_network=OutboundNetwork.ISOLATED,
    device_policy=DevicePolicy.MANAGED_ONLY,
    physical_security=PhysicalSecurity.HIGH,
    connection=ConnectionPolicy.REMOTE_DESKTOP_ONLY,
    copy_paste=CopyPastePolicy.DISABLED_TECHNICALLY,
    software_ingress_signoff=SoftwareIngressSignoff.INVESTIGATOR_PLUS_REFEREE,
    referee_required=True,
    provider_counter_approval=True,
)

_POLICIES: Mapping[Tier, EnvironmentPolicy] = {
    Tier.TIER_0: _OPEN_TIER_POLICY,
    Tier.TIER_1: _OPEN_TIER_POLICY,
    Tier.TIER_2: _TIER_2_POLICY,
    Tier.TIER_3: _TIER_3_POLICY,
    Tier.TIER_4: _TIER_4_POLICY,
}

CONTROL_NAMES = (
    "package_mirror",
    "inbound_network",
    "outbound_network",
    "device_policy",
    "physical_security",
    "connection",
    "copy_paste",
    "software_ingress_signoff",
    "referee_required",
    "provider_counter_approval",
)

# Restrictiveness orders (least to most restrictive) backing the control
# monotonicity property across tiers.
RESTRICTIVENESS_ORDERS: Mapping[str, tuple] = {
    "package_mirror": (
        MirrorMode.DIRECT_FROM_INTERNET,
        MirrorMode.FULL_MIRROR,
        MirrorMode.WHITELIST_MIRROR,
    ),
    "inbound_network": (
        NetworkClass.INTERNET,
        NetworkClass.INSTITUTIONAL,
        NetworkClass.RESTRICTED,
    ),
    "outbound_network": (OutboundNetwork.INTERNET, OutboundNetwork.ISOLATED),
    "device_policy": (DevicePolicy.OPEN_ALLOWED, DevicePolicy.MANAGED_ONLY),
    "physical_security": (
        PhysicalSecurity.OPEN,
        PhysicalSecurity.MEDIUM,
        PhysicalSecurity.HIGH,
    ),
    "connection": (
        ConnectionPolicy.SSH_AND_DESKTOP,
        ConnectionPolicy.REMOTE_DESKTOP_ONLY,
    ),
    "copy_paste": (
        CopyPastePolicy.ALLOWED_WITH_APPROVAL,
        CopyPastePolicy.FORBIDDEN_BY_POLICY_ONLY,
        CopyPastePolicy.DISABLED_TECHNICALLY,
    ),
    "software_ingress_signoff": (
        SoftwareIngressSignoff.USER_DIRECT,
        SoftwareIngressSignoff.INVESTIGATOR_SIGNOFF,
        SoftwareIngressSignoff.INVESTIGATOR_PLUS_REFEREE,
    ),
    "referee_required": (False, True),
    "provider_counter_approval": (False, True),
}


def resolve_policy(tier: Tier) -> EnvironmentPolicy:
    """Resolve a tier into its full control set."""
    return _POLICIES[Tier(tier)]


def control_value(policy: EnvironmentPolicy, control: str):
    value = getattr(policy, control)
    if control == "package_mirror":
        return value.mode
    return value


def policy_matrix_document() -> dict:
    """Export the whole matrix as a versioned table document."""
    rows = []
    for tier in Tier:
        policy = resolve_policy(tier)
        row: dict = {"tier": int(tier)}
        for control in CONTROL_NAMES:
            value = getattr(policy, control)
            if control == "package_mirror":
                row[control] = {
                    "mode": value.mode.value,
                    "max_lag_days": value.max_lag_days,
                }
            elif isinstance(value, Enum):
                row[control] = value.value
            else:
                row[control] = value
        rows.append(row)
    return {"schema_version": POLICY_MATRIX_VERSION, "controls": list(CONTROL_NAMES), "tiers": rows}


@dataclass(frozen=True)
class ControlViolation:
    control: str
    element: str
    message: str


@dataclass(frozen=True)
class ConformanceReport:
    violations: tuple[ControlViolation, ...] = ()

    def ok(self) -> bool:
        return not self.violations


_EXPECTED_PROTOCOL = {
    ConnectionPolicy.SSH_AND_DESKTOP: "both",
    ConnectionPolicy.REMOTE_DESKTOP_ONLY: "remote_desktop",
}

_EXPECTED_DEVICES = {
    DevicePolicy.OPEN_ALLOWED: (DeviceClass.MANAGED, DeviceClass.OPEN),
    DevicePolicy.MANAGED_ONLY: (DeviceClass.MANAGED,),
}


def validate_blueprint(bp: "Blueprint", policy: EnvironmentPolicy) -> ConformanceReport:
    """Check a blueprint against a resolved policy, control by control."""
    violations: list[ControlViolation] = []

    def bad(control: str, element: str, message: str) -> None:
        violations.append(ControlViolation(control, element, message))

    mirror = bp.mirror_config
    if mirror.mode is not policy.package_mirror.mode:
        bad(
            "package_mirror",
            "mirror_config.mode",
            f"expected {policy.package_mirror.mode.value}, got {mirror.mode.value}",
        )
    else:
        if policy.package_mirror.mode is MirrorMode.FULL_MIRROR:
            if mirror.max_lag_days is None or mirror.max_lag_days > policy.package_mirror.max_lag_days:
                bad(
                    "package_mirror",
                    "mirror_config.max_lag_days",
                    f"full mirror must lag at most {policy.package_mirror.max_lag_days} days",
                )
        if policy.package_mirror.mode is MirrorMode.WHITELIST_MIRROR and not mirror.whitelist_ref:
            bad(
                "package_mirror",
                "mirror_config.whitelist_ref",
                "whitelist mirror requires a whitelist reference",
            )

    expected_sources = (policy.inbound_network.value,)
    if tuple(bp.network.inbound_sources) != expected_sources:
        bad(
            "inbound_network",
            "network.inbound_sources",
            f"expected {list(expected_sources)}, got {list(bp.network.inbound_sources)}",
        )

    if bp.network.outbound is not policy.outbound_network:
        bad(
            "outbound_network",
            "network.outbound",
            f"expected {policy.outbound_network.value}, got {bp.network.outbound.value}",
        )
    elif bp.network.internal_isolated != (policy.outbound_network is OutboundNetwork.ISOLATED):
        bad(
            "outbound_network",
            "network.internal_isolated",
            "internal isolation flag inconsistent with outbound policy",
        )

    if tuple(bp.access_node.allowed_devices) != _EXPECTED_DEVICES[policy.device_policy]:
        bad(
            "device_policy",
            "access_node.allowed_devices",
            f"expected {[d.value for d in _EXPECTED_DEVICES[policy.device_policy]]}, "
            f"got {[d.value for d in bp.access_node.allowed_devices]}",
        )

    if bp.access_node.physical_security is not policy.physical_security:
        bad(
            "physical_security",
            "access_node.physical_security",
            f"expected {policy.physical_security.value}, got {bp.access_node.physical_security.value}",
        )

    if bp.access_node.protocol.value != _EXPECTED_PROTOCOL[policy.connection]:
        bad(
            "connection",
            "access_node.protocol",
            f"expected {_EXPECTED_PROTOCOL[policy.connection]}, got {bp.access_node.protocol.value}",
        )

    if bp.governance.copy_paste is not policy.copy_paste:
        bad(
            "copy_paste",
            "governance.copy_paste",
            f"expected {policy.copy_paste.value}, got {bp.governance.copy_paste.value}",
        )
    elif policy.copy_paste is not CopyPastePolicy.ALLOWED_WITH_APPROVAL and (
        bp.access_node.clipboard_sharing or bp.access_node.disk_sharing
    ):
        bad(
            "copy_paste",
            "access_node.clipboard_sharing",
            "clipboard and disk sharing must be off when copy-out is not permitted",
        )

    if bp.governance.software_ingress_signoff is not policy.software_ingress_signoff:
        bad(
            "software_ingress_signoff",
            "governance.software_ingress_signoff",
            f"expected {policy.software_ingress_signoff.value}, "
            f"got {bp.governance.software_ingress_signoff.value}",
        )

    if bp.governance.referee_required != policy.referee_required:
        bad(
            "referee_required",
            "governance.referee_required",
            f"expected {policy.referee_required}",
        )

    if bp.governance.provider_counter_approval != policy.provider_counter_approval:
        bad(
            "provider_counter_approval",
            "governance.provider_counter_approval",
            f"expected {policy.provider_counter_approval}",
        )

    return ConformanceReport(tuple(violations))


def check_access(
    policy: EnvironmentPolicy,
    device_class: DeviceClass,
    origin_network: NetworkClass,
    second_factor: bool,
) -> tuple[str, ...]:
    """Denial reasons for a connection attempt, combining device and network.

    A managed laptop roaming away from the restricted network carries its
    device class but not the network origin, so both must pass.
    """
    reasons: list[str] = []
    if policy.device_policy is DevicePolicy.MANAGED_ONLY and device_class is not DeviceClass.MANAGED:
        reasons.append("only managed devices may connect at this tier")
    order = RESTRICTIVENESS_ORDERS["inbound_network"]
    if order.index(origin_network) < order.index(policy.inbound_network):
        reasons.append(
            f"connections must originate from the {policy.inbound_network.value} network"
        )
    if not second_factor:
        reasons.append("two-factor authentication is mandatory")
    return tuple(reasons)
