"""Single versioned configuration document for a deployment."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

from .canonical import structure, to_jsonable
from .policy import NetworkClass

CONFIG_SCHEMA_VERSION = "1.0"

# Views that may ever be exposed outside the secure network.
EXTERNAL_VIEW_WHITELIST = ("ingress-deposit", "ingress-complete", "egress-download")


@dataclass(frozen=True)
class ServiceConfig:
    schema_version: str = CONFIG_SCHEMA_VERSION
    internal_view_networks: tuple[NetworkClass, ...] = (
        NetworkClass.INSTITUTIONAL,
        NetworkClass.RESTRICTED,
    )
    external_views: tuple[str, ...] = EXTERNAL_VIEW_WHITELIST
    ingress_token_lifetime_hours: int = 72
    reverification_period_hours: int = 24
    full_mirror_max_lag_days: int = 42
    scratch_retention_days: int = 7
    identity_secret: str = "insecure-dev-secret"
    dev_identity_enabled: bool = False
    data_dir: str | None = None


def load_config(path: str | Path) -> ServiceConfig:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return structure(ServiceConfig, data)


def config_document(config: ServiceConfig) -> dict:
    doc = to_jsonable(config)
    doc.pop("identity_secret")
    return doc


def with_overrides(config: ServiceConfig, **overrides) -> ServiceConfig:
    return replace(config, **overrides)
