"""Platform driver interface and the bundled in-memory simulator.

The management service holds no standing infrastructure credentials:
every platform-affecting call must carry a credential forwarded from the
logged-in user, and infrastructure-level credentials are never accepted
for in-environment administration or vice versa.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Protocol

from .blueprint import Blueprint


class CredentialScope(str, Enum):
    INFRASTRUCTURE = "infrastructure"
    ENVIRONMENT = "environment"


@dataclass(frozen=True)
class ForwardedCredential:
    user_id: str
    token: str
    scope: CredentialScope = CredentialScope.INFRASTRUCTURE


class MissingCredentialError(PermissionError):
    """A platform call was attempted without a forwarded user credential."""


class CredentialScopeError(PermissionError):
    """Infrastructure and in-environment credentials must not be mixed."""


class PlatformDriver(Protocol):
    def provision_environment(
        self, blueprint: Blueprint, credential: ForwardedCredential
    ) -> dict: ...

    def decommission_environment(
        self, environment_id: str, credential: ForwardedCredential
    ) -> dict: ...

    def delete_volume(self, volume_id: str, credential: ForwardedCredential) -> dict: ...

    def apply_network_window(
        self, view_id: str, ip_range: str, closes_at: str, credential: ForwardedCredential
    ) -> dict: ...

    def execute_admin_install(
        self, environment_id: str, artifact_ref: str, credential: ForwardedCredential
    ) -> dict: ...


@dataclass(frozen=True)
class DriverInvocation:
    op: str
    target: str
    credential_user: str
    scope: CredentialScope


class SimulatorDriver:
    """Records every call; enforces credential presence and scope."""

    def __init__(self) -> None:
        self.invocations: list[DriverInvocation] = []

    def _require(
        self, credential: ForwardedCredential, scope: CredentialScope, op: str, target: str
    ) -> None:
        if credential is None or not credential.token or not credential.user_id:
            raise MissingCredentialError(
                f"{op}: platform calls require a forwarded user credential"
            )
        if credential.scope is not scope:
            raise CredentialScopeError(
                f"{op}: requires a {scope.value} credential, got {credential.scope.value}"
            )
        self.invocations.append(
            DriverInvocation(op, target, credential.user_id, credential.scope)
        )

    def provision_environment(
        self, blueprint: Blueprint, credential: ForwardedCredential
    ) -> dict:
        self._require(
            credential, CredentialScope.INFRASTRUCTURE, "provision_environment",
            blueprint.environment_id,
        )
        return {"status": "provisioned", "environment_id": blueprint.environment_id}

    def decommission_environment(
        self, environment_id: str, credential: ForwardedCredential
    ) -> dict:
        self._require(
            credential, CredentialScope.INFRASTRUCTURE, "decommission_environment",
            environment_id,
        )
        return {"status": "decommissioned", "environment_id": environment_id}

    def delete_volume(self, volume_id: str, credential: ForwardedCredential) -> dict:
        self._require(credential, CredentialScope.INFRASTRUCTURE, "delete_volume", volume_id)
        return {"status": "deleted", "volume_id": volume_id}

    def apply_network_window(
        self, view_id: str, ip_range: str, closes_at: str, credential: ForwardedCredential
    ) -> dict:
        self._require(
            credential, CredentialScope.INFRASTRUCTURE, "apply_network_window", view_id
        )
        return {"status": "applied", "view_id": view_id, "closes_at": closes_at}

    def execute_admin_install(
        self, environment_id: str, artifact_ref: str, credential: ForwardedCredential
    ) -> dict:
        self._require(
            credential, CredentialScope.ENVIRONMENT, "execute_admin_install", environment_id
        )
        return {"status": "installed", "artifact_ref": artifact_ref}
