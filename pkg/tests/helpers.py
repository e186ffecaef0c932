"""Shared scenario builders for the test suite."""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

from safehaven.classification import (
    CommercialSensitivity,
    DeidentificationConfidence,
    PersonalDataStatus,
    PublicationIntent,
    QuestionnaireAnswers,
    TierDecision,
    decide_tier,
)
from safehaven.domain import Role, Tier
from safehaven.framework import ManagementFramework
from safehaven.ingress import compute_volume_digest
from safehaven.lifecycle import WorkPackageEvent
from safehaven.platform_driver import ForwardedCredential

EPOCH = datetime(2024, 3, 1, 12, 0, 0, tzinfo=timezone.utc)


class FakeClock:
    """Deterministic clock advancing one second per reading."""

    def __init__(self, start: datetime = EPOCH, step_seconds: float = 1.0) -> None:
        self.now = start
        self.step = timedelta(seconds=step_seconds)

    def __call__(self) -> datetime:
        current = self.now
        self.now = self.now + self.step
        return current

    def advance(self, **kwargs) -> None:
        self.now = self.now + timedelta(**kwargs)


def answers(
    status: str = "none",
    confidence: str | None = None,
    threat: bool = False,
    attacker: bool = False,
    commercial: str = "none",
    publication: str = "confidential",
) -> QuestionnaireAnswers:
    if confidence is None:
        confidence = (
            "not_applicable" if status in ("none", "identifiable") else "strong"
        )
        if status == "anonymised":
            confidence = "absolute"
    return QuestionnaireAnswers(
        personal_data_status=PersonalDataStatus(status),
        deidentification_confidence=DeidentificationConfidence(confidence),
        substantial_threat_to_subjects=threat,
        sophisticated_attacker_target=attacker,
        commercial_sensitivity=CommercialSensitivity(commercial),
        publication_intent=PublicationIntent(publication),
    )


# One canonical answer tuple per tier, used to fabricate decisions.
ANSWERS_FOR_TIER = {
    Tier.TIER_0: answers(publication="ready_for_publication"),
    Tier.TIER_1: answers(publication="eventual_publication"),
    Tier.TIER_2: answers(status="pseudonymised", confidence="strong"),
    Tier.TIER_3: answers(status="identifiable"),
    Tier.TIER_4: answers(status="identifiable", threat=True),
}


def decision_for_tier(
    tier: Tier,
    wp_id: str = "wp-x",
    user_id: str = "user-x",
    role: Role = Role.INVESTIGATOR,
    provider_id: str | None = None,
    timestamp: datetime = EPOCH,
) -> TierDecision:
    chosen = ANSWERS_FOR_TIER[tier]
    assert decide_tier(chosen) is tier
    return TierDecision(
        work_package_id=wp_id,
        classifier_user_id=user_id,
        classifier_role=role,
        answers=chosen,
        tier=tier,
        timestamp=timestamp,
        provider_id=provider_id,
    )


DATASET_FILES = {
    "records/cohort.csv": b"id,value\n1,10\n2,20\n",
    "README.txt": b"curated extract for analysis\n",
}

DATASET_DIGEST = compute_volume_digest(DATASET_FILES)


class Cast:
    """A small populated deployment: one project, one provider, one dataset."""

    def __init__(self, fw: ManagementFramework, personal_data: bool = True) -> None:
        self.fw = fw
        self.pgm = "user-bootstrap-programme-manager"
        self.investigator = fw.register_user(
            self.pgm, "Ivy Investigator", training_certified=True
        ).id
        self.pm = fw.register_user(
            self.pgm, "Petra Manager", training_certified=True
        ).id
        self.researcher = fw.register_user(
            self.pgm, "Ray Researcher", training_certified=True
        ).id
        self.referee = fw.register_user(
            self.pgm, "Rhea Referee", training_certified=True
        ).id
        self.rep = fw.register_user(
            self.pgm, "Pat Provider-Rep", training_certified=True, guest=True
        ).id
        self.system_manager = fw.register_user(
            self.pgm, "Sid Sysadmin", training_certified=True,
            system_roles=[Role.SYSTEM_MANAGER],
        ).id
        self.provider = fw.register_provider(self.pgm, "Data Trust Ltd", self.rep).id
        self.dataset = fw.register_dataset(
            self.pgm, self.provider, DATASET_DIGEST
        ).id
        self.project = fw.create_project(self.pgm, self.investigator, self.pm).id
        fw.assign_user(self.project, self.referee, Role.REFEREE, self.pm)
        fw.assign_user(self.project, self.researcher, Role.RESEARCHER, self.pm)
        self.personal_data = personal_data

    def credential(self, user_id: str) -> ForwardedCredential:
        return ForwardedCredential(user_id=user_id, token=f"token-{user_id}")

    @property
    def tier_answers(self) -> QuestionnaireAnswers:
        if self.personal_data:
            return ANSWERS_FOR_TIER[Tier.TIER_3]
        return ANSWERS_FOR_TIER[Tier.TIER_2]

    def create_wp(self, **kwargs):
        return self.fw.create_work_package(
            self.project,
            [self.dataset],
            "combine and summarise the cohort",
            self.pm,
            **kwargs,
        )

    def initial_classify(self, wp_id: str) -> None:
        self.fw.submit_classification(wp_id, self.investigator, self.tier_answers)
        self.fw.submit_classification(wp_id, self.rep, self.tier_answers)
        self.fw.resolve_work_package_consensus(wp_id, self.pm)

    def sign_agreement(self) -> None:
        self.fw.record_sharing_agreement(self.dataset, "agreements/executed-1", self.rep)

    def ingress(self, wp_id: str, files=None) -> str:
        """Run deposit through sealing + verification; returns the volume id."""
        files = files if files is not None else DATASET_FILES
        self.fw.request_environment(
            wp_id, "platform-a", self.investigator,
            self.credential(self.investigator), initial=True,
        )
        self.fw.authorize_mount(wp_id, self.dataset, self.investigator)
        volume, token = self.fw.begin_ingress(self.dataset, wp_id, self.pm)
        for path, content in files.items():
            self.fw.deposit_file(token.id, path, content)
        self.fw.complete_ingress(volume.id, self.rep)
        self.fw.verify_integrity(volume.id, actor=self.rep)
        self.fw.transition_work_package(
            wp_id, WorkPackageEvent.DATA_INGRESSED, self.pm
        )
        return volume.id

    def full_classify(self, wp_id: str) -> None:
        self.fw.start_full_classification(wp_id, self.investigator)
        self.fw.submit_classification(wp_id, self.investigator, self.tier_answers)
        self.fw.submit_classification(wp_id, self.rep, self.tier_answers)
        self.fw.submit_classification(wp_id, self.referee, self.tier_answers)
        self.fw.resolve_work_package_consensus(wp_id, self.pm)

    def activate(self, wp_id: str) -> None:
        wp = self.fw.store.get("work_package", wp_id)[0]
        if wp.personal_data:
            self.fw.set_dpia(wp_id, "dpia/final-1", self.pm)
        self.fw.transition_work_package(
            wp_id, WorkPackageEvent.START_ANALYSIS, self.investigator
        )

    def drive_to_active(self, wp_id: str | None = None) -> str:
        if wp_id is None:
            wp_id = self.create_wp().id
        self.initial_classify(wp_id)
        self.sign_agreement()
        self.ingress(wp_id)
        self.full_classify(wp_id)
        self.activate(wp_id)
        return wp_id


def mutate_blueprint_control(bp, control: str):
    """One nonconforming mutant of a planned blueprint per control name."""
    from dataclasses import replace as _replace

    from safehaven.blueprint import AccessProtocol, MirrorConfig
    from safehaven.policy import (
        ConnectionPolicy,
        CopyPastePolicy,
        DeviceClass,
        DevicePolicy,
        MirrorMode,
        OutboundNetwork,
        PhysicalSecurity,
        SoftwareIngressSignoff,
    )

    def other(enum_cls, current):
        return next(v for v in enum_cls if v != current)

    if control == "package_mirror":
        wrong_mode = other(MirrorMode, bp.mirror_config.mode)
        config = MirrorConfig(mode=wrong_mode)
        if wrong_mode is MirrorMode.FULL_MIRROR:
            config = MirrorConfig(mode=wrong_mode, max_lag_days=42)
        if wrong_mode is MirrorMode.WHITELIST_MIRROR:
            config = MirrorConfig(mode=wrong_mode, whitelist_ref="x")
        return _replace(bp, mirror_config=config)
    if control == "inbound_network":
        wrong = "internet" if bp.network.inbound_sources != ("internet",) else "restricted"
        return _replace(bp, network=_replace(bp.network, inbound_sources=(wrong,)))
    if control == "outbound_network":
        return _replace(
            bp,
            network=_replace(
                bp.network, outbound=other(OutboundNetwork, bp.network.outbound)
            ),
        )
    if control == "device_policy":
        wrong = (
            (DeviceClass.MANAGED,)
            if len(bp.access_node.allowed_devices) > 1
            else (DeviceClass.MANAGED, DeviceClass.OPEN)
        )
        return _replace(bp, access_node=_replace(bp.access_node, allowed_devices=wrong))
    if control == "physical_security":
        wrong = other(PhysicalSecurity, bp.access_node.physical_security)
        return _replace(bp, access_node=_replace(bp.access_node, physical_security=wrong))
    if control == "connection":
        wrong = (
            AccessProtocol.REMOTE_DESKTOP
            if bp.access_node.protocol is AccessProtocol.BOTH
            else AccessProtocol.BOTH
        )
        return _replace(bp, access_node=_replace(bp.access_node, protocol=wrong))
    if control == "copy_paste":
        wrong = other(CopyPastePolicy, bp.governance.copy_paste)
        return _replace(bp, governance=_replace(bp.governance, copy_paste=wrong))
    if control == "software_ingress_signoff":
        wrong = other(SoftwareIngressSignoff, bp.governance.software_ingress_signoff)
        return _replace(
            bp, governance=_replace(bp.governance, software_ingress_signoff=wrong)
        )
    if control == "referee_required":
        return _replace(
            bp,
            governance=_replace(
                bp.governance, referee_required=not bp.governance.referee_required
            ),
        )
    if control == "provider_counter_approval":
        return _replace(
            bp,
            governance=_replace(
                bp.governance,
                provider_counter_approval=not bp.governance.provider_counter_approval,
            ),
        )
    raise ValueError(f"unknown control {control}")


class ApiError(AssertionError):
    def __init__(self, status: int, payload):
        super().__init__(f"API error {status}: {payload}")
        self.status = status
        self.payload = payload


class ApiSession:
    """One authenticated caller against the test app."""

    def __init__(self, client, token: str, origin: str = "institutional",
                 device: str = "managed", ip: str | None = None):
        self.client = client
        self.token = token
        self.origin = origin
        self.device = device
        self.ip = ip

    def headers(self) -> dict:
        headers = {
            "authorization": f"Bearer {self.token}",
            "x-origin-network": self.origin,
            "x-device-class": self.device,
        }
        if self.ip:
            headers["x-client-ip"] = self.ip
        return headers

    def call(self, method: str, path: str, **kwargs):
        response = self.client.request(method, path, headers=self.headers(), **kwargs)
        if response.status_code >= 400:
            try:
                payload = response.json()
            except Exception:
                payload = response.text
            raise ApiError(response.status_code, payload)
        if response.headers.get("content-type", "").startswith("application/x-ndjson"):
            return response.text
        return response.json()


class ApiCast:
    """The Cast scenario, driven end to end over HTTP."""

    def __init__(self, client, personal_data: bool = True):
        self.client = client
        self.personal_data = personal_data
        self.pgm = "user-bootstrap-programme-manager"
        boot = self.session(self.pgm)
        self.investigator = boot.call(
            "POST", "/users",
            json={"display_name": "Ivy Investigator", "training_certified": True},
        )["id"]
        self.pm = boot.call(
            "POST", "/users",
            json={"display_name": "Petra Manager", "training_certified": True},
        )["id"]
        self.researcher = boot.call(
            "POST", "/users",
            json={"display_name": "Ray Researcher", "training_certified": True},
        )["id"]
        self.referee = boot.call(
            "POST", "/users",
            json={"display_name": "Rhea Referee", "training_certified": True},
        )["id"]
        self.rep = boot.call(
            "POST", "/users",
            json={"display_name": "Pat Provider-Rep", "training_certified": True, "guest": True},
        )["id"]
        self.provider = boot.call(
            "POST", "/providers",
            json={"name": "Data Trust Ltd", "representative_user_id": self.rep},
        )["id"]
        self.dataset = boot.call(
            "POST", "/datasets",
            json={"provider_id": self.provider, "provider_hash": DATASET_DIGEST},
        )["id"]
        self.project = boot.call(
            "POST", "/projects",
            json={"investigator_id": self.investigator, "project_manager_id": self.pm},
        )["id"]
        pm = self.session(self.pm)
        pm.call("POST", f"/projects/{self.project}/members",
                json={"user_id": self.referee, "role": "referee"})
        pm.call("POST", f"/projects/{self.project}/members",
                json={"user_id": self.researcher, "role": "researcher"})

    def token_for(self, user_id: str, second_factor: bool = True) -> str:
        response = self.client.post(
            "/auth/dev-token", json={"user_id": user_id, "second_factor": second_factor}
        )
        assert response.status_code == 200, response.text
        return response.json()["token"]

    def session(self, user_id: str, **kwargs) -> ApiSession:
        return ApiSession(self.client, self.token_for(user_id), **kwargs)

    @property
    def answers_payload(self) -> dict:
        from safehaven.canonical import to_jsonable

        tier = 3 if self.personal_data else 2
        from safehaven.domain import Tier as _Tier

        return to_jsonable(ANSWERS_FOR_TIER[_Tier(tier)])

    def create_wp(self, **extra) -> str:
        pm = self.session(self.pm)
        body = {
            "project_id": self.project,
            "dataset_ids": [self.dataset],
            "intended_analysis": "combine and summarise the cohort",
        }
        body.update(extra)
        return pm.call("POST", "/work-packages", json=body)["id"]

    def classify_round(self, wp_id: str, include_referee: bool) -> dict:
        payload = {"answers": self.answers_payload}
        self.session(self.investigator).call(
            "POST", f"/work-packages/{wp_id}/classification", json=payload
        )
        self.session(self.rep).call(
            "POST", f"/work-packages/{wp_id}/classification", json=payload
        )
        if include_referee:
            self.session(self.referee).call(
                "POST", f"/work-packages/{wp_id}/classification", json=payload
            )
        return self.session(self.pm).call(
            "POST", f"/work-packages/{wp_id}/consensus",
            json={"proceed_without_consensus": False},
        )

    def drive_to_active(self, wp_id: str | None = None) -> str:
        if wp_id is None:
            wp_id = self.create_wp()
        inv = self.session(self.investigator)
        pm = self.session(self.pm)
        rep = self.session(self.rep)
        self.classify_round(wp_id, include_referee=False)
        rep.call(
            "POST", f"/datasets/{self.dataset}/sharing-agreement",
            json={"doc_ref": "agreements/executed-1"},
        )
        inv.call(
            "POST", f"/work-packages/{wp_id}/environment",
            json={"platform_id": "platform-a", "initial": True},
        )
        inv.call(
            "POST", f"/work-packages/{wp_id}/ingress/authorize-mount",
            json={"dataset_id": self.dataset},
        )
        begun = pm.call(
            "POST", f"/work-packages/{wp_id}/ingress/begin",
            json={"dataset_id": self.dataset},
        )
        volume_id = begun["volume"]["id"]
        token = begun["token"]["id"]
        for path, content in DATASET_FILES.items():
            from safehaven.canonical import sha256_hex

            rep.call(
                "POST", "/ingress/deposit",
                params={"token": token, "path": path, "digest": sha256_hex(content)},
                content=content,
            )
        rep.call("POST", f"/volumes/{volume_id}/complete")
        rep.call("POST", f"/volumes/{volume_id}/verify", json={"provider_hash": None})
        pm.call("POST", f"/work-packages/{wp_id}/transition",
                json={"event": "data_ingressed"})
        inv.call("POST", f"/work-packages/{wp_id}/start-full-classification")
        self.classify_round(wp_id, include_referee=True)
        status = self.session(self.pm).call("GET", f"/work-packages/{wp_id}/status")
        if status["work_package"]["personal_data"]:
            pm.call("POST", f"/work-packages/{wp_id}/dpia",
                    json={"doc_ref": "dpia/final-1"})
        inv.call("POST", f"/work-packages/{wp_id}/transition",
                 json={"event": "start_analysis"})
        return volume_id and wp_id
