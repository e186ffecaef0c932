"""Pydantic request models for the HTTP API."""

from __future__ import annotations

from pydantic import BaseModel, Field


class RegisterUserRequest(BaseModel):
    display_name: str
    training_certified: bool = False
    system_roles: list[str] = Field(default_factory=list)
    guest: bool = False


class RegisterProviderRequest(BaseModel):
    name: str
    representative_user_id: str


class ChangeRepresentativeRequest(BaseModel):
    representative_user_id: str


class RegisterDatasetRequest(BaseModel):
    provider_id: str
    provider_hash: str = ""
    contractual_terms: str = ""
    lawful_basis_certified: bool = False


class SharingAgreementRequest(BaseModel):
    doc_ref: str


class CreateProjectRequest(BaseModel):
    investigator_id: str
    project_manager_id: str


class AssignUserRequest(BaseModel):
    user_id: str
    role: str


class CreateWorkPackageRequest(BaseModel):
    project_id: str
    dataset_ids: list[str]
    intended_analysis: str
    expected_outputs: str = ""
    intended_tools: str = ""
    declared_future_dataset_ids: list[str] = Field(default_factory=list)
    pre_approved_outputs: list[str] = Field(default_factory=list)


class AnswersModel(BaseModel):
    personal_data_status: str
    deidentification_confidence: str
    substantial_threat_to_subjects: bool
    sophisticated_attacker_target: bool
    commercial_sensitivity: str
    publication_intent: str


class SubmitClassificationRequest(BaseModel):
    answers: AnswersModel


class ResolveConsensusRequest(BaseModel):
    proceed_without_consensus: bool = False


class TransitionRequest(BaseModel):
    event: str


class SupersedeRequest(BaseModel):
    additional_dataset_ids: list[str] = Field(default_factory=list)
    intended_analysis: str | None = None


class DocumentRefRequest(BaseModel):
    doc_ref: str


class RequestEnvironmentRequest(BaseModel):
    platform_id: str
    initial: bool = False


class PlanBlueprintRequest(BaseModel):
    work_package_id: str
    tier: int
    platform_id: str
    initial_ingress: bool = False


class ValidateBlueprintRequest(BaseModel):
    blueprint: dict
    tier: int | None = None


class AuthorizeMountRequest(BaseModel):
    dataset_id: str


class BeginIngressRequest(BaseModel):
    dataset_id: str


class VerifyIntegrityRequest(BaseModel):
    provider_hash: str | None = None


class RequestEgressRequest(BaseModel):
    output_volume_id: str
    analysis_script_ref: str
    intent: str
    output_descriptor: str | None = None


class ExceptionalReleaseRequest(BaseModel):
    ip_range: str
    duration_hours: int


class SoftwareIngressRequestModel(BaseModel):
    artifact_ref: str
    requires_admin_install: bool = False


class SubmitSoftwareRequest(BaseModel):
    files: dict[str, str]  # path -> hex content


class SoftwareSignoffRequest(BaseModel):
    approve: bool = True


class PreApproveArtifactRequest(BaseModel):
    artifact_ref: str


class OpenWindowRequest(BaseModel):
    view_id: str
    ip_range: str
    duration_hours: int


class DevTokenRequest(BaseModel):
    user_id: str
    second_factor: bool = True
    guest: bool = False


class CapabilityProbeRequest(BaseModel):
    action: str
    target: dict = Field(default_factory=dict)


class AccessCheckRequest(BaseModel):
    device_class: str
    origin_network: str
    second_factor: bool
