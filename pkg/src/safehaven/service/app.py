"""HTTP API exposing the governance workflows.

Internal views are reachable only from the configured secure networks;
a small whitelist of views (deposit, transfer completion, lower-tier
egress download) may additionally be reached from outside while an
exposure window covering the caller's address is open. Every response
on an authenticated session is audited.
"""

from __future__ import annotations

from typing import Callable

from fastapi import Depends, FastAPI, Request, Response
from fastapi.responses import JSONResponse, PlainTextResponse

from .. import questionnaire
from ..audit import AuditLog, EntityRef, FileAuditBackend
from ..blueprint import PlanningError, blueprint_from_dict, blueprint_to_dict, plan_environment
from ..canonical import to_jsonable
from ..classification import (
    CommercialSensitivity,
    DeidentificationConfidence,
    InvalidAnswersError,
    PersonalDataStatus,
    PublicationIntent,
    QuestionnaireAnswers,
    decide_tier,
    normalize_answers,
)
from ..config import ServiceConfig, config_document
from ..domain import Role, Tier, validate_entity
from ..errors import (
    AuthorizationError,
    ConflictError,
    GuardError,
    InvalidInputError,
    NotFound,
    SafeHavenError,
)
from ..framework import ManagementFramework
from ..ingress import EgressIntent, TokenAccessError
from ..lifecycle import IllegalTransitionError, WorkPackageEvent, transition_matrix_document
from ..platform_driver import (
    CredentialScope,
    CredentialScopeError,
    ForwardedCredential,
    MissingCredentialError,
)
from ..policy import (
    DeviceClass,
    NetworkClass,
    policy_matrix_document,
    resolve_policy,
    validate_blueprint,
)
from ..store import EntityStore, FileKV, VersionConflictError
from . import schemas
from .security import SessionContext, SignedTokenIdentityProvider

_ERROR_STATUS: list[tuple[type[Exception], int]] = [
    (AuthorizationError, 403),
    (TokenAccessError, 403),
    (MissingCredentialError, 403),
    (CredentialScopeError, 403),
    (NotFound, 404),
    (ConflictError, 409),
    (VersionConflictError, 409),
    (IllegalTransitionError, 409),
    (GuardError, 409),
    (InvalidAnswersError, 422),
    (PlanningError, 422),
    (InvalidInputError, 422),
    (ValueError, 422),
]


def _status_for(exc: Exception) -> int:
    for exc_type, status in _ERROR_STATUS:
        if isinstance(exc, exc_type):
            return status
    return 500


def _answers_from_model(model: schemas.AnswersModel) -> QuestionnaireAnswers:
    return QuestionnaireAnswers(
        personal_data_status=PersonalDataStatus(model.personal_data_status),
        deidentification_confidence=DeidentificationConfidence(
            model.deidentification_confidence
        ),
        substantial_threat_to_subjects=model.substantial_threat_to_subjects,
        sophisticated_attacker_target=model.sophisticated_attacker_target,
        commercial_sensitivity=CommercialSensitivity(model.commercial_sensitivity),
        publication_intent=PublicationIntent(model.publication_intent),
    )


def create_app(
    config: ServiceConfig | None = None,
    framework: ManagementFramework | None = None,
) -> FastAPI:
    config = config or ServiceConfig()
    if framework is None:
        if config.data_dir:
            framework = ManagementFramework(
                store=EntityStore(FileKV(f"{config.data_dir}/entities")),
                audit_log=AuditLog(FileAuditBackend(f"{config.data_dir}/audit.ndjson")),
                config=config,
            )
        else:
            framework = ManagementFramework(config=config)
    identity = SignedTokenIdentityProvider(config.identity_secret)

    app = FastAPI(title="safehaven", version="0.1.0")
    app.state.framework = framework
    app.state.identity = identity
    app.state.config = config

    fw = framework

    # -- session and view gating ------------------------------------------

    def _client_ip(request: Request) -> str:
        header = request.headers.get("x-client-ip")
        if header:
            return header
        return request.client.host if request.client else "0.0.0.0"

    def get_session(request: Request) -> SessionContext:
        auth = request.headers.get("authorization", "")
        if not auth.lower().startswith("bearer "):
            raise _HTTPError(401, "unauthenticated", "bearer token required")
        token = auth[7:].strip()
        claims = identity.authenticate(token)
        if claims is None:
            raise _HTTPError(401, "unauthenticated", "invalid token")
        if not fw.store.exists("user", claims.user_id):
            raise _HTTPError(401, "unauthenticated", "unknown user")
        try:
            origin = NetworkClass(request.headers.get("x-origin-network", "internet"))
        except ValueError:
            origin = NetworkClass.INTERNET
        try:
            device = DeviceClass(request.headers.get("x-device-class", "open"))
        except ValueError:
            device = DeviceClass.OPEN
        session = SessionContext(
            user_id=claims.user_id,
            forwarded_credential=token,
            origin_network=origin,
            device_class=device,
            second_factor=claims.second_factor,
        )
        request.state.session = session
        return session

    def view(view_id: str) -> Callable:
        def dependency(
            request: Request, session: SessionContext = Depends(get_session)
        ) -> SessionContext:
            request.state.view = view_id
            if session.origin_network is NetworkClass.RESTRICTED and not session.second_factor:
                raise _HTTPError(
                    403, "forbidden", "two-factor authentication required on the restricted network"
                )
            if session.origin_network in config.internal_view_networks:
                return session
            if view_id in config.external_views:
                window = fw.active_window_for(view_id, _client_ip(request))
                if window is not None:
                    return session
                raise _HTTPError(
                    403, "forbidden", "no open exposure window covers this address"
                )
            raise _HTTPError(
                403, "forbidden", "this view is accessible only within the secure network"
            )

        return dependency

    def credential(session: SessionContext) -> ForwardedCredential:
        return ForwardedCredential(
            user_id=session.user_id, token=session.forwarded_credential
        )

    class _HTTPError(Exception):
        def __init__(self, status: int, code: str, message: str) -> None:
            self.status = status
            self.code = code
            self.message = message

    @app.exception_handler(_HTTPError)
    async def _http_error_handler(request: Request, exc: _HTTPError) -> JSONResponse:
        return JSONResponse(
            status_code=exc.status,
            content={"error": {"code": exc.code, "message": exc.message}},
        )

    @app.exception_handler(Exception)
    async def _error_handler(request: Request, exc: Exception) -> JSONResponse:
        status = _status_for(exc)
        code = getattr(exc, "code", None) or type(exc).__name__.lower()
        return JSONResponse(
            status_code=status,
            content={"error": {"code": code, "message": str(exc)}},
        )

    for exc_type, _ in _ERROR_STATUS:
        app.add_exception_handler(exc_type, _error_handler)
    app.add_exception_handler(SafeHavenError, _error_handler)

    @app.middleware("http")
    async def _audit_responses(request: Request, call_next) -> Response:
        response = await call_next(request)
        session = getattr(request.state, "session", None)
        if session is not None:
            fw.audit.append(
                session.user_id,
                "api.request",
                EntityRef("api_view", getattr(request.state, "view", request.url.path), 0),
                payload={
                    "method": request.method,
                    "path": request.url.path,
                    "status": response.status_code,
                },
            )
        return response

    # -- open endpoints -----------------------------------------------------

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    if config.dev_identity_enabled:

        @app.post("/auth/dev-token")
        def dev_token(body: schemas.DevTokenRequest) -> dict:
            return {
                "token": identity.issue(
                    body.user_id, second_factor=body.second_factor, guest=body.guest
                )
            }

    # -- reference documents -------------------------------------------------

    @app.get("/config")
    def get_config(session: SessionContext = Depends(view("config"))) -> dict:
        return config_document(config)

    @app.get("/policies")
    def get_policies(session: SessionContext = Depends(view("policy"))) -> dict:
        return policy_matrix_document()

    @app.get("/policies/{tier}")
    def get_policy(tier: int, session: SessionContext = Depends(view("policy"))) -> dict:
        report = validate_entity(tier)
        if not report.ok():
            raise InvalidInputError("; ".join(report.violations))
        return to_jsonable(resolve_policy(Tier.from_level(tier)))

    @app.get("/classification/questionnaire")
    def get_questionnaire(
        session: SessionContext = Depends(view("classification")),
    ) -> dict:
        return questionnaire.questionnaire_definition()

    @app.get("/lifecycle/transitions")
    def get_transitions(
        session: SessionContext = Depends(view("policy")),
    ) -> dict:
        return transition_matrix_document()

    @app.post("/classification/preview")
    def preview_tier(
        body: schemas.SubmitClassificationRequest,
        session: SessionContext = Depends(view("classification")),
    ) -> dict:
        answers, notes = normalize_answers(_answers_from_model(body.answers))
        return {"tier": int(decide_tier(answers)), "normalization_notes": list(notes)}

    @app.post("/capabilities")
    def probe_capability(
        body: schemas.CapabilityProbeRequest,
        session: SessionContext = Depends(view("capabilities")),
    ) -> dict:
        return fw.probe_capability(body.action, session.user_id, body.target)

    # -- users / providers / datasets ----------------------------------------

    @app.post("/users", status_code=201)
    def register_user(
        body: schemas.RegisterUserRequest,
        session: SessionContext = Depends(view("user-admin")),
    ) -> dict:
        user = fw.register_user(
            session.user_id,
            body.display_name,
            training_certified=body.training_certified,
            system_roles=[Role(r) for r in body.system_roles],
            guest=body.guest,
        )
        return to_jsonable(user)

    @app.post("/users/{user_id}/certify-training")
    def certify_training(
        user_id: str, session: SessionContext = Depends(view("user-admin"))
    ) -> dict:
        return to_jsonable(fw.certify_training(user_id, session.user_id))

    @app.get("/users/{user_id}")
    def get_user(
        user_id: str, session: SessionContext = Depends(view("user-admin"))
    ) -> dict:
        user, _ = fw.store.get("user", user_id)
        return to_jsonable(user)

    @app.post("/providers", status_code=201)
    def register_provider(
        body: schemas.RegisterProviderRequest,
        session: SessionContext = Depends(view("provider-admin")),
    ) -> dict:
        return to_jsonable(
            fw.register_provider(session.user_id, body.name, body.representative_user_id)
        )

    @app.post("/providers/{provider_id}/representative")
    def change_representative(
        provider_id: str,
        body: schemas.ChangeRepresentativeRequest,
        session: SessionContext = Depends(view("provider-admin")),
    ) -> dict:
        return to_jsonable(
            fw.change_provider_representative(
                provider_id, body.representative_user_id, session.user_id
            )
        )

    @app.post("/datasets", status_code=201)
    def register_dataset(
        body: schemas.RegisterDatasetRequest,
        session: SessionContext = Depends(view("dataset-admin")),
    ) -> dict:
        return to_jsonable(
            fw.register_dataset(
                session.user_id,
                body.provider_id,
                body.provider_hash,
                contractual_terms=body.contractual_terms,
                lawful_basis_certified=body.lawful_basis_certified,
            )
        )

    @app.post("/datasets/{dataset_id}/sharing-agreement")
    def sharing_agreement(
        dataset_id: str,
        body: schemas.SharingAgreementRequest,
        session: SessionContext = Depends(view("dataset-admin")),
    ) -> dict:
        return to_jsonable(
            fw.record_sharing_agreement(dataset_id, body.doc_ref, session.user_id)
        )

    @app.post("/datasets/{dataset_id}/certify-lawful-basis")
    def certify_lawful_basis(
        dataset_id: str, session: SessionContext = Depends(view("dataset-admin"))
    ) -> dict:
        return to_jsonable(fw.certify_lawful_basis(dataset_id, session.user_id))

    # -- projects --------------------------------------------------------------

    @app.post("/projects", status_code=201)
    def create_project(
        body: schemas.CreateProjectRequest,
        session: SessionContext = Depends(view("project-admin")),
    ) -> dict:
        return to_jsonable(
            fw.create_project(session.user_id, body.investigator_id, body.project_manager_id)
        )

    @app.get("/projects/{project_id}")
    def get_project(
        project_id: str, session: SessionContext = Depends(view("project-admin"))
    ) -> dict:
        project, _ = fw.store.get("project", project_id)
        return to_jsonable(project)

    @app.post("/projects/{project_id}/members", status_code=201)
    def assign_member(
        project_id: str,
        body: schemas.AssignUserRequest,
        session: SessionContext = Depends(view("project-admin")),
    ) -> dict:
        return to_jsonable(
            fw.assign_user(project_id, body.user_id, Role(body.role), session.user_id)
        )

    @app.post("/projects/{project_id}/members/{user_id}/counter-approve")
    def counter_approve(
        project_id: str,
        user_id: str,
        session: SessionContext = Depends(view("project-admin")),
    ) -> dict:
        return to_jsonable(fw.counter_approve_member(project_id, user_id, session.user_id))

    @app.post("/projects/{project_id}/close")
    def close_project(
        project_id: str, session: SessionContext = Depends(view("project-admin"))
    ) -> dict:
        return fw.close_project(project_id, session.user_id, credential(session))

    # -- work packages -----------------------------------------------------------

    @app.post("/work-packages", status_code=201)
    def create_work_package(
        body: schemas.CreateWorkPackageRequest,
        session: SessionContext = Depends(view("work-package")),
    ) -> dict:
        wp = fw.create_work_package(
            body.project_id,
            body.dataset_ids,
            body.intended_analysis,
            session.user_id,
            expected_outputs=body.expected_outputs,
            intended_tools=body.intended_tools,
            declared_future_dataset_ids=body.declared_future_dataset_ids,
            pre_approved_outputs=body.pre_approved_outputs,
        )
        return to_jsonable(wp)

    @app.get("/work-packages/{wp_id}")
    def get_work_package(
        wp_id: str, session: SessionContext = Depends(view("work-package"))
    ) -> dict:
        wp, _ = fw.store.get("work_package", wp_id)
        return to_jsonable(wp)

    @app.get("/work-packages/{wp_id}/status")
    def work_package_status(
        wp_id: str, session: SessionContext = Depends(view("work-package"))
    ) -> dict:
        return fw.work_package_status(wp_id)

    @app.post("/work-packages/{wp_id}/classification", status_code=201)
    def submit_classification(
        wp_id: str,
        body: schemas.SubmitClassificationRequest,
        session: SessionContext = Depends(view("classification")),
    ) -> dict:
        decision = fw.submit_classification(
            wp_id, session.user_id, _answers_from_model(body.answers)
        )
        return to_jsonable(decision)

    @app.delete("/work-packages/{wp_id}/classification")
    def withdraw_classification(
        wp_id: str, session: SessionContext = Depends(view("classification"))
    ) -> dict:
        fw.withdraw_classification(wp_id, session.user_id)
        return {"withdrawn": True}

    @app.post("/work-packages/{wp_id}/consensus")
    def resolve_consensus(
        wp_id: str,
        body: schemas.ResolveConsensusRequest,
        session: SessionContext = Depends(view("classification")),
    ) -> dict:
        outcome = fw.resolve_work_package_consensus(
            wp_id,
            session.user_id,
            proceed_without_consensus=body.proceed_without_consensus,
        )
        return to_jsonable(outcome)

    @app.post("/work-packages/{wp_id}/start-full-classification")
    def start_full_classification(
        wp_id: str, session: SessionContext = Depends(view("classification"))
    ) -> dict:
        return to_jsonable(fw.start_full_classification(wp_id, session.user_id))

    @app.post("/work-packages/{wp_id}/acknowledge-halt")
    def acknowledge_halt(
        wp_id: str, session: SessionContext = Depends(view("classification"))
    ) -> dict:
        return to_jsonable(fw.acknowledge_halt(wp_id, session.user_id))

    @app.post("/work-packages/{wp_id}/transition")
    def transition(
        wp_id: str,
        body: schemas.TransitionRequest,
        session: SessionContext = Depends(view("work-package")),
    ) -> dict:
        wp = fw.transition_work_package(
            wp_id,
            WorkPackageEvent(body.event),
            session.user_id,
            credential=credential(session),
        )
        return to_jsonable(wp)

    @app.post("/work-packages/{wp_id}/supersede", status_code=201)
    def supersede(
        wp_id: str,
        body: schemas.SupersedeRequest,
        session: SessionContext = Depends(view("work-package")),
    ) -> dict:
        old, new = fw.supersede_work_package(
            wp_id,
            session.user_id,
            additional_dataset_ids=body.additional_dataset_ids,
            intended_analysis=body.intended_analysis,
        )
        return {"superseded": to_jsonable(old), "successor": to_jsonable(new)}

    @app.post("/work-packages/{wp_id}/dpia")
    def set_dpia(
        wp_id: str,
        body: schemas.DocumentRefRequest,
        session: SessionContext = Depends(view("work-package")),
    ) -> dict:
        return to_jsonable(fw.set_dpia(wp_id, body.doc_ref, session.user_id))

    @app.post("/work-packages/{wp_id}/ethics-approval")
    def set_ethics(
        wp_id: str,
        body: schemas.DocumentRefRequest,
        session: SessionContext = Depends(view("work-package")),
    ) -> dict:
        return to_jsonable(fw.set_ethics_approval(wp_id, body.doc_ref, session.user_id))

    # -- environments -------------------------------------------------------------

    @app.post("/work-packages/{wp_id}/environment", status_code=201)
    def request_environment(
        wp_id: str,
        body: schemas.RequestEnvironmentRequest,
        session: SessionContext = Depends(view("environment")),
    ) -> dict:
        env = fw.request_environment(
            wp_id,
            body.platform_id,
            session.user_id,
            credential(session),
            initial=body.initial,
        )
        return to_jsonable(env)

    @app.get("/environments/{env_id}")
    def get_environment(
        env_id: str, session: SessionContext = Depends(view("environment"))
    ) -> dict:
        env, _ = fw.store.get("environment", env_id)
        return to_jsonable(env)

    @app.get("/environments/{env_id}/blueprint")
    def get_environment_blueprint(
        env_id: str, session: SessionContext = Depends(view("environment"))
    ) -> dict:
        env, _ = fw.store.get("environment", env_id)
        return fw.get_blueprint(env.blueprint_ref)

    @app.get("/environments/{env_id}/lineage")
    def get_environment_lineage(
        env_id: str, session: SessionContext = Depends(view("environment"))
    ) -> dict:
        return {"chain": fw.lineage_chain(env_id)}

    @app.post("/environments/{env_id}/access-check")
    def access_check(
        env_id: str,
        body: schemas.AccessCheckRequest,
        session: SessionContext = Depends(view("environment")),
    ) -> dict:
        reasons = fw.check_environment_access(
            env_id,
            DeviceClass(body.device_class),
            NetworkClass(body.origin_network),
            body.second_factor,
        )
        return {"allowed": not reasons, "denial_reasons": list(reasons)}

    @app.post("/environments/{env_id}/decommission")
    def decommission(
        env_id: str, session: SessionContext = Depends(view("environment"))
    ) -> dict:
        return to_jsonable(
            fw.decommission_environment(env_id, session.user_id, credential(session))
        )

    # -- blueprints ----------------------------------------------------------------

    @app.post("/blueprints/plan")
    def plan_blueprint(
        body: schemas.PlanBlueprintRequest,
        session: SessionContext = Depends(view("environment")),
    ) -> dict:
        wp, _ = fw.store.get("work_package", body.work_package_id)
        bp = plan_environment(
            wp,
            Tier.from_level(body.tier),
            body.platform_id,
            initial_ingress=body.initial_ingress,
        )
        return blueprint_to_dict(bp)

    @app.post("/blueprints/validate")
    def validate_blueprint_route(
        body: schemas.ValidateBlueprintRequest,
        session: SessionContext = Depends(view("environment")),
    ) -> dict:
        bp = blueprint_from_dict(body.blueprint)
        tier = Tier.from_level(body.tier) if body.tier is not None else bp.tier
        report = validate_blueprint(bp, resolve_policy(tier))
        return {"conforms": report.ok(), "violations": to_jsonable(report.violations)}

    # -- data ingress ---------------------------------------------------------------

    @app.post("/work-packages/{wp_id}/ingress/authorize-mount")
    def authorize_mount(
        wp_id: str,
        body: schemas.AuthorizeMountRequest,
        session: SessionContext = Depends(view("ingress-admin")),
    ) -> dict:
        return to_jsonable(fw.authorize_mount(wp_id, body.dataset_id, session.user_id))

    @app.post("/work-packages/{wp_id}/ingress/begin", status_code=201)
    def begin_ingress(
        wp_id: str,
        body: schemas.BeginIngressRequest,
        session: SessionContext = Depends(view("ingress-admin")),
    ) -> dict:
        volume, token = fw.begin_ingress(body.dataset_id, wp_id, session.user_id)
        return {"volume": to_jsonable(volume), "token": to_jsonable(token)}

    @app.post("/ingress/deposit")
    async def deposit(
        request: Request,
        token: str,
        path: str,
        digest: str | None = None,
        session: SessionContext = Depends(view("ingress-deposit")),
    ) -> dict:
        content = await request.body()
        return fw.deposit_file(token, path, content, client_digest=digest)

    @app.get("/ingress/deposit")
    def deposit_read(
        token: str,
        path: str = "",
        session: SessionContext = Depends(view("ingress-deposit")),
    ) -> dict:
        fw.read_via_token(token, path)
        return {}

    @app.post("/volumes/{volume_id}/complete")
    def complete_ingress(
        volume_id: str, session: SessionContext = Depends(view("ingress-complete"))
    ) -> dict:
        return to_jsonable(fw.complete_ingress(volume_id, session.user_id))

    @app.post("/volumes/{volume_id}/verify")
    def verify_integrity(
        volume_id: str,
        body: schemas.VerifyIntegrityRequest,
        session: SessionContext = Depends(view("ingress-complete")),
    ) -> dict:
        record = fw.verify_integrity(
            volume_id, body.provider_hash, actor=session.user_id
        )
        return to_jsonable(record)

    @app.post("/volumes/{volume_id}/seal")
    def seal_volume(
        volume_id: str, session: SessionContext = Depends(view("egress"))
    ) -> dict:
        return to_jsonable(fw.seal_volume(volume_id, session.user_id))

    @app.get("/volumes/{volume_id}")
    def get_volume(
        volume_id: str, session: SessionContext = Depends(view("ingress-admin"))
    ) -> dict:
        volume, _ = fw.store.get("volume", volume_id)
        return to_jsonable(volume)

    @app.get("/volumes/{volume_id}/integrity-report")
    def integrity_report(
        volume_id: str, session: SessionContext = Depends(view("ingress-admin"))
    ) -> dict:
        return fw.integrity_report(volume_id)

    @app.post("/maintenance/run-verifications")
    def run_verifications(
        session: SessionContext = Depends(view("ingress-admin")),
    ) -> dict:
        records = fw.run_scheduled_verifications()
        return {"verified": [to_jsonable(r) for r in records]}

    @app.post("/maintenance/revoke-expired-grants")
    def revoke_expired(
        session: SessionContext = Depends(view("egress")),
    ) -> dict:
        return {"revoked": fw.revoke_expired_grants()}

    # -- egress ----------------------------------------------------------------------

    @app.post("/work-packages/{wp_id}/egress/request", status_code=201)
    def request_egress(
        wp_id: str,
        body: schemas.RequestEgressRequest,
        session: SessionContext = Depends(view("egress")),
    ) -> dict:
        return fw.request_egress(
            wp_id,
            body.output_volume_id,
            body.analysis_script_ref,
            EgressIntent(body.intent),
            session.user_id,
            output_descriptor=body.output_descriptor,
        )

    @app.post("/work-packages/{wp_id}/egress/resolve")
    def resolve_egress(
        wp_id: str, session: SessionContext = Depends(view("egress"))
    ) -> dict:
        return to_jsonable(fw.resolve_egress(wp_id, session.user_id))

    @app.post("/releases/{release_id}/signoff")
    def signoff_release(
        release_id: str, session: SessionContext = Depends(view("egress"))
    ) -> dict:
        return to_jsonable(fw.signoff_release(release_id, session.user_id))

    @app.get("/releases/{release_id}")
    def get_release(
        release_id: str, session: SessionContext = Depends(view("egress"))
    ) -> dict:
        release, _ = fw.store.get("pre_approved_release", release_id)
        return to_jsonable(release)

    @app.post("/work-packages/{wp_id}/publish")
    def publish(
        wp_id: str, session: SessionContext = Depends(view("egress"))
    ) -> dict:
        return to_jsonable(
            fw.publish_egress(wp_id, session.user_id, credential(session))
        )

    @app.post("/work-packages/{wp_id}/exceptional-release/authorize")
    def exceptional_release(
        wp_id: str,
        body: schemas.ExceptionalReleaseRequest,
        session: SessionContext = Depends(view("egress")),
    ) -> dict:
        return fw.authorize_exceptional_release(
            wp_id,
            session.user_id,
            body.ip_range,
            body.duration_hours,
            credential(session),
        )

    @app.get("/release-grants/{grant_id}/access")
    def access_grant(
        grant_id: str,
        request: Request,
        session: SessionContext = Depends(view("egress-download")),
    ) -> dict:
        return fw.access_release_grant(grant_id, _client_ip(request), session.user_id)

    # -- software ingress ---------------------------------------------------------

    @app.post("/environments/{env_id}/software-ingress", status_code=201)
    def software_ingress(
        env_id: str,
        body: schemas.SoftwareIngressRequestModel,
        session: SessionContext = Depends(view("software")),
    ) -> dict:
        return to_jsonable(
            fw.request_software_ingress(
                env_id,
                body.artifact_ref,
                session.user_id,
                requires_admin_install=body.requires_admin_install,
            )
        )

    @app.post("/software-ingress/{request_id}/submit")
    def submit_software(
        request_id: str,
        body: schemas.SubmitSoftwareRequest,
        session: SessionContext = Depends(view("software")),
    ) -> dict:
        files = {path: bytes.fromhex(blob) for path, blob in body.files.items()}
        return to_jsonable(fw.submit_software(request_id, files, session.user_id))

    @app.post("/software-ingress/{request_id}/signoff")
    def signoff_software(
        request_id: str,
        body: schemas.SoftwareSignoffRequest,
        session: SessionContext = Depends(view("software")),
    ) -> dict:
        return to_jsonable(
            fw.signoff_software(request_id, session.user_id, approve=body.approve)
        )

    @app.get("/software-ingress/{request_id}")
    def get_software_request(
        request_id: str, session: SessionContext = Depends(view("software"))
    ) -> dict:
        req, _ = fw.store.get("software_ingress_request", request_id)
        return to_jsonable(req)

    @app.post("/software-ingress/{request_id}/admin-install")
    def admin_install(
        request_id: str, session: SessionContext = Depends(view("software"))
    ) -> dict:
        env_credential = ForwardedCredential(
            user_id=session.user_id,
            token=session.forwarded_credential,
            scope=CredentialScope.ENVIRONMENT,
        )
        return fw.execute_admin_install(request_id, session.user_id, env_credential)

    @app.post("/preapproved-artifacts", status_code=201)
    def preapprove_artifact(
        body: schemas.PreApproveArtifactRequest,
        session: SessionContext = Depends(view("software")),
    ) -> dict:
        return to_jsonable(
            fw.register_preapproved_artifact(body.artifact_ref, session.user_id)
        )

    # -- exposure windows -----------------------------------------------------------

    @app.post("/exposure-windows", status_code=201)
    def open_window(
        body: schemas.OpenWindowRequest,
        session: SessionContext = Depends(view("windows")),
    ) -> dict:
        return to_jsonable(
            fw.open_exposure_window(
                body.view_id,
                body.ip_range,
                body.duration_hours,
                session.user_id,
                credential(session),
            )
        )

    @app.get("/exposure-windows")
    def list_windows(session: SessionContext = Depends(view("windows"))) -> dict:
        return {"windows": fw.list_exposure_windows()}

    # -- audit ------------------------------------------------------------------------

    @app.get("/audit/events")
    def audit_events(
        start: int = 1,
        end: int | None = None,
        session: SessionContext = Depends(view("audit")),
    ) -> dict:
        return {"events": [to_jsonable(e) for e in fw.audit.events(start, end)]}

    @app.get("/audit/verify")
    def audit_verify(session: SessionContext = Depends(view("audit"))) -> dict:
        return to_jsonable(fw.audit.verify())

    @app.get("/audit/export")
    def audit_export(session: SessionContext = Depends(view("audit"))) -> Response:
        return PlainTextResponse(
            fw.audit.export_ndjson(), media_type="application/x-ndjson"
        )

    return app
