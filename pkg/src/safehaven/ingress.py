"""Data and software transfer primitives: tokens, digests, airlocks.

Write-only deposit tokens, reproducible volume digests, the software
ingress review ladder and timed exceptional-release grants. Stateful
orchestration lives in the framework; everything here is checkable in
isolation.
"""

from __future__ import annotations

import hashlib
import ipaddress
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from typing import Mapping

from .domain import Role
from .policy import SoftwareIngressSignoff


class TokenAccessError(PermissionError):
    """Deposit token used outside its grant (expired, revoked, or read)."""


class EgressIntent(str, Enum):
    PUBLISH = "publish"
    FURTHER_ANALYSIS = "further_analysis"
    RETURN_TO_PROVIDER = "return_to_provider"


@dataclass(frozen=True)
class IngressToken:
    id: str
    volume_id: str
    issued_to: str
    expires_at: datetime
    one_time: bool = True
    delivered_via: str = "management-framework"
    revoked: bool = False
    used: bool = False

    @property
    def mode(self) -> str:
        return "write_only"


def token_active(token: IngressToken, now: datetime) -> bool:
    if token.revoked or (token.one_time and token.used):
        return False
    return now < token.expires_at


class IntegrityStatus(str, Enum):
    MATCH = "match"
    MISMATCH = "mismatch"
    PENDING = "pending"


@dataclass(frozen=True)
class IntegrityRecord:
    id: str
    volume_id: str
    computed_hash: str
    provider_hash: str
    verified_at: datetime
    status: IntegrityStatus


def compute_volume_digest(files: Mapping[str, bytes]) -> str:
    """SHA-256 over files in sorted path order.

    Each entry contributes (path length, path, content length, content),
    lengths as 8-byte big-endian integers, so the digest is reproducible
    byte for byte regardless of deposit order.
    """
    digest = hashlib.sha256()
    for path in sorted(files):
        encoded = path.encode("utf-8")
        content = files[path]
        digest.update(len(encoded).to_bytes(8, "big"))
        digest.update(encoded)
        digest.update(len(content).to_bytes(8, "big"))
        digest.update(content)
    return digest.hexdigest()


class SoftwareReviewState(str, Enum):
    AWAITING_SUBMISSION = "awaiting_submission"
    AWAITING_REVIEW = "awaiting_review"
    APPROVED_INTERNAL = "approved_internal"
    REJECTED = "rejected"


@dataclass(frozen=True)
class Signoff:
    role: Role
    user_id: str
    timestamp: datetime


@dataclass(frozen=True)
class SoftwareIngressRequest:
    id: str
    environment_id: str
    volume_id: str
    submitted_by: str
    artifact_ref: str
    review_state: SoftwareReviewState = SoftwareReviewState.AWAITING_SUBMISSION
    signoffs: tuple[Signoff, ...] = ()
    requires_admin_install: bool = False


def signoffs_satisfy(
    required: SoftwareIngressSignoff, signoffs: tuple[Signoff, ...]
) -> bool:
    roles = {s.role for s in signoffs}
    if required is SoftwareIngressSignoff.USER_DIRECT:
        return True
    if required is SoftwareIngressSignoff.INVESTIGATOR_SIGNOFF:
        return Role.INVESTIGATOR in roles
    return Role.INVESTIGATOR in roles and Role.REFEREE in roles


@dataclass(frozen=True)
class ReleaseAuthorization:
    """One party's half of a dual-controlled exceptional release."""

    id: str
    work_package_id: str
    actor_id: str
    role: Role
    ip_range: str
    duration_hours: int
    timestamp: datetime


@dataclass(frozen=True)
class ReleaseGrant:
    id: str
    work_package_id: str
    volume_id: str
    ip_range: str
    opens_at: datetime
    closes_at: datetime
    representative_id: str
    revoked: bool = False


def grant_allows(grant: ReleaseGrant, caller_ip: str, now: datetime) -> tuple[bool, str]:
    """Whether an access attempt falls inside the grant's window and range."""
    if grant.revoked:
        return False, "grant revoked"
    if not (grant.opens_at <= now < grant.closes_at):
        return False, "outside the authorized time window"
    try:
        network = ipaddress.ip_network(grant.ip_range, strict=False)
        address = ipaddress.ip_address(caller_ip)
    except ValueError as exc:
        return False, f"bad address: {exc}"
    if address not in network:
        return False, "caller address outside the declared range"
    return True, ""


@dataclass(frozen=True)
class PreApprovedRelease:
    """Release of outputs matching a descriptor agreed at classification."""

    id: str
    work_package_id: str
    output_volume_id: str
    output_descriptor: str
    analysis_script_ref: str
    intent: EgressIntent
    signoffs: tuple[Signoff, ...] = ()
    referee_required: bool = True
    released: bool = False


@dataclass(frozen=True)
class PublishAuthorization:
    id: str
    work_package_id: str
    environment_id: str
    tier: int
    protocol: str = "scp"
