"""Session authentication and the restricted-proxy view gate.

Authentication is delegated to a pluggable identity provider; the bundled
implementation signs claims with an HMAC secret, which is enough for
tests and local deployments. The service never stores credentials: the
bearer token itself is forwarded to the platform layer on the user's
behalf.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import json
from dataclasses import dataclass
from typing import Protocol

from ..policy import DeviceClass, NetworkClass


@dataclass(frozen=True)
class IdentityClaims:
    user_id: str
    second_factor: bool = False
    guest: bool = False


class IdentityProvider(Protocol):
    def issue(self, user_id: str, *, second_factor: bool = True, guest: bool = False) -> str: ...

    def authenticate(self, token: str) -> IdentityClaims | None: ...


class SignedTokenIdentityProvider:
    def __init__(self, secret: str) -> None:
        self._secret = secret.encode("utf-8")

    def _sign(self, payload: bytes) -> str:
        return hmac.new(self._secret, payload, hashlib.sha256).hexdigest()

    def issue(self, user_id: str, *, second_factor: bool = True, guest: bool = False) -> str:
        payload = json.dumps(
            {"user_id": user_id, "second_factor": second_factor, "guest": guest},
            sort_keys=True,
        ).encode("utf-8")
        body = base64.urlsafe_b64encode(payload).decode("ascii")
        return f"{body}.{self._sign(payload)}"

    def authenticate(self, token: str) -> IdentityClaims | None:
        body, _, signature = token.partition(".")
        if not body or not signature:
            return None
        try:
            payload = base64.urlsafe_b64decode(body.encode("ascii"))
        except Exception:
            return None
        if not hmac.compare_digest(self._sign(payload), signature):
            return None
        claims = json.loads(payload)
        return IdentityClaims(
            user_id=claims["user_id"],
            second_factor=bool(claims.get("second_factor", False)),
            guest=bool(claims.get("guest", False)),
        )


@dataclass(frozen=True)
class SessionContext:
    user_id: str
    forwarded_credential: str
    origin_network: NetworkClass
    device_class: DeviceClass
    second_factor: bool
