"""Administrative command line, a thin client over the HTTP API.

Every command maps onto an API call with identical authorization; the
only offline capability is verification of an exported audit log, which
needs no running service by design.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import httpx

from .audit import import_and_verify
from .canonical import sha256_hex

DEFAULT_API_URL = "http://127.0.0.1:8000"


def _make_client(api_url: str, token: str | None, origin: str, device: str) -> httpx.Client:
    headers = {"x-origin-network": origin, "x-device-class": device}
    if token:
        headers["authorization"] = f"Bearer {token}"
    return httpx.Client(base_url=api_url, headers=headers, timeout=30.0)


class Context:
    def __init__(self, api_url: str, token: str | None, origin: str, device: str, as_json: bool):
        self.api_url = api_url
        self.token = token
        self.origin = origin
        self.device = device
        self.as_json = as_json
        self._client: httpx.Client | None = None

    @property
    def client(self) -> httpx.Client:
        if self._client is None:
            self._client = _make_client(self.api_url, self.token, self.origin, self.device)
        return self._client

    def call(self, method: str, path: str, **kwargs) -> dict:
        try:
            response = self.client.request(method, path, **kwargs)
        except httpx.HTTPError as exc:
            click.echo(f"error: cannot reach API at {self.api_url}: {exc}", err=True)
            sys.exit(2)
        if response.status_code >= 400:
            try:
                detail = response.json().get("error", {})
                message = detail.get("message", response.text)
            except Exception:
                message = response.text
            click.echo(f"error ({response.status_code}): {message}", err=True)
            sys.exit(1)
        if response.headers.get("content-type", "").startswith("application/x-ndjson"):
            return {"_raw": response.text}
        return response.json()

    def emit(self, data: dict, human: str | None = None) -> None:
        if self.as_json or human is None:
            click.echo(json.dumps(data, indent=2, sort_keys=True))
        else:
            click.echo(human)


@click.group()
@click.option("--api-url", envvar="SAFEHAVEN_API_URL", default=DEFAULT_API_URL, show_default=True)
@click.option("--token", envvar="SAFEHAVEN_TOKEN", default=None, help="bearer token")
@click.option("--origin-network", envvar="SAFEHAVEN_ORIGIN", default="institutional")
@click.option("--device-class", envvar="SAFEHAVEN_DEVICE", default="managed")
@click.option("--json", "as_json", is_flag=True, help="machine-readable output")
@click.pass_context
def main(ctx, api_url, token, origin_network, device_class, as_json):
    """Management client for secure research environments."""
    ctx.obj = Context(api_url, token, origin_network, device_class, as_json)


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
@click.option("--data-dir", default=None)
@click.option("--dev-identity", is_flag=True, help="enable the dev token endpoint")
@click.option("--identity-secret", default=None)
def serve(host, port, data_dir, dev_identity, identity_secret):
    """Run the API service."""
    import uvicorn

    from .config import ServiceConfig, with_overrides
    from .service import create_app

    config = ServiceConfig()
    overrides = {"dev_identity_enabled": dev_identity}
    if data_dir:
        overrides["data_dir"] = data_dir
    if identity_secret:
        overrides["identity_secret"] = identity_secret
    config = with_overrides(config, **overrides)
    uvicorn.run(create_app(config), host=host, port=port, log_level="warning")


@main.group()
def token():
    """Dev token helpers."""


@token.command("issue")
@click.option("--user", "user_id", required=True)
@click.option("--no-second-factor", is_flag=True)
@click.pass_obj
def token_issue(ctx: Context, user_id, no_second_factor):
    data = ctx.call(
        "POST",
        "/auth/dev-token",
        json={"user_id": user_id, "second_factor": not no_second_factor},
    )
    ctx.emit(data, data["token"])


@main.group()
def project():
    """Project administration."""


@project.command("create")
@click.option("--investigator", required=True)
@click.option("--manager", "project_manager", required=True)
@click.pass_obj
def project_create(ctx: Context, investigator, project_manager):
    data = ctx.call(
        "POST",
        "/projects",
        json={"investigator_id": investigator, "project_manager_id": project_manager},
    )
    ctx.emit(data, f"project {data['id']} created")


@project.command("close")
@click.argument("project_id")
@click.pass_obj
def project_close(ctx: Context, project_id):
    data = ctx.call("POST", f"/projects/{project_id}/close")
    ctx.emit(
        data,
        f"project {project_id} closed; "
        f"{len(data['volume_ids'])} volumes deleted, metadata retained",
    )


@project.command("show")
@click.argument("project_id")
@click.pass_obj
def project_show(ctx: Context, project_id):
    ctx.emit(ctx.call("GET", f"/projects/{project_id}"))


@project.command("counter-approve")
@click.argument("project_id")
@click.argument("user_id")
@click.pass_obj
def project_counter_approve(ctx: Context, project_id, user_id):
    data = ctx.call(
        "POST", f"/projects/{project_id}/members/{user_id}/counter-approve"
    )
    ctx.emit(data, f"membership of {user_id} counter-approved ({data['status']})")


@main.group()
def wp():
    """Work package workflows."""


@wp.command("create")
@click.option("--project", "project_id", required=True)
@click.option("--dataset", "datasets", multiple=True, required=True)
@click.option("--analysis", default="")
@click.option("--outputs", default="")
@click.option("--tools", default="")
@click.option("--pre-approved-output", "pre_approved", multiple=True)
@click.pass_obj
def wp_create(ctx: Context, project_id, datasets, analysis, outputs, tools, pre_approved):
    data = ctx.call(
        "POST",
        "/work-packages",
        json={
            "project_id": project_id,
            "dataset_ids": list(datasets),
            "intended_analysis": analysis,
            "expected_outputs": outputs,
            "intended_tools": tools,
            "pre_approved_outputs": list(pre_approved),
        },
    )
    ctx.emit(data, f"work package {data['id']} created (draft)")


@wp.command("classify")
@click.argument("wp_id")
@click.option("--answers", "answers_file", required=True, help="answers JSON file, or - for stdin")
@click.pass_obj
def wp_classify(ctx: Context, wp_id, answers_file):
    if answers_file == "-":
        answers = json.load(sys.stdin)
    else:
        answers = json.loads(Path(answers_file).read_text(encoding="utf-8"))
    data = ctx.call(
        "POST", f"/work-packages/{wp_id}/classification", json={"answers": answers}
    )
    ctx.emit(data, f"decision recorded: tier {data['tier']}")


@wp.command("status")
@click.argument("wp_id")
@click.pass_obj
def wp_status(ctx: Context, wp_id):
    data = ctx.call("GET", f"/work-packages/{wp_id}/status")
    if ctx.as_json:
        ctx.emit(data)
        return
    lines = [f"state: {data['state']}  (phase: {data['phase']})"]
    for decision in data["decisions"]:
        lines.append(
            f"  decision: tier {decision['tier']} by {decision['classifier_user_id']}"
            f" ({decision['role']})"
        )
    for required in data["required_classifiers"]:
        suffix = f" for {required['provider_id']}" if required["provider_id"] else ""
        lines.append(f"  required: {required['role']}{suffix}")
    outcome = data["outcome"]
    if outcome:
        tier = outcome.get("tier")
        lines.append(
            f"consensus: {outcome['kind']}" + (f" at tier {tier}" if tier is not None else "")
        )
    if data["halt_flag"]:
        lines.append("HALTED pending programme manager review")
    click.echo("\n".join(lines))


@wp.command("consensus")
@click.argument("wp_id")
@click.option("--proceed", is_flag=True, help="proceed at the highest proposed tier")
@click.pass_obj
def wp_consensus(ctx: Context, wp_id, proceed):
    data = ctx.call(
        "POST",
        f"/work-packages/{wp_id}/consensus",
        json={"proceed_without_consensus": proceed},
    )
    tier = data.get("tier")
    ctx.emit(data, f"consensus: {data['kind']}" + (f" at tier {tier}" if tier is not None else ""))


@wp.command("transition")
@click.argument("wp_id")
@click.argument("event")
@click.pass_obj
def wp_transition(ctx: Context, wp_id, event):
    data = ctx.call("POST", f"/work-packages/{wp_id}/transition", json={"event": event})
    ctx.emit(data, f"state: {data['state']}")


@main.group()
def ingress():
    """Data ingress workflow."""


@ingress.command("authorize-mount")
@click.option("--wp", "wp_id", required=True)
@click.option("--dataset", required=True)
@click.pass_obj
def ingress_authorize(ctx: Context, wp_id, dataset):
    data = ctx.call(
        "POST",
        f"/work-packages/{wp_id}/ingress/authorize-mount",
        json={"dataset_id": dataset},
    )
    ctx.emit(data, "mount authorized")


@ingress.command("begin")
@click.option("--wp", "wp_id", required=True)
@click.option("--dataset", required=True)
@click.pass_obj
def ingress_begin(ctx: Context, wp_id, dataset):
    data = ctx.call(
        "POST", f"/work-packages/{wp_id}/ingress/begin", json={"dataset_id": dataset}
    )
    ctx.emit(
        data,
        f"volume {data['volume']['id']} open for deposit\n"
        f"token {data['token']['id']} (write-only, expires {data['token']['expires_at']})",
    )


@ingress.command("deposit")
@click.option("--token", "deposit_token", required=True)
@click.option("--file", "file_path", required=True, type=click.Path(exists=True))
@click.option("--dest", default=None, help="path inside the volume")
@click.pass_obj
def ingress_deposit(ctx: Context, deposit_token, file_path, dest):
    content = Path(file_path).read_bytes()
    digest = sha256_hex(content)
    data = ctx.call(
        "POST",
        "/ingress/deposit",
        params={
            "token": deposit_token,
            "path": dest or Path(file_path).name,
            "digest": digest,
        },
        content=content,
        headers={"content-type": "application/octet-stream"},
    )
    ctx.emit(data, f"deposited {data['path']} ({data['bytes']} bytes)")


@ingress.command("complete")
@click.argument("volume_id")
@click.pass_obj
def ingress_complete(ctx: Context, volume_id):
    data = ctx.call("POST", f"/volumes/{volume_id}/complete")
    ctx.emit(data, f"volume {volume_id} sealed; deposit access revoked")


@ingress.command("verify")
@click.argument("volume_id")
@click.option("--provider-hash", default=None)
@click.pass_obj
def ingress_verify(ctx: Context, volume_id, provider_hash):
    data = ctx.call(
        "POST",
        f"/volumes/{volume_id}/verify",
        json={"provider_hash": provider_hash},
    )
    ctx.emit(data, f"integrity: {data['status']}")
    if data["status"] != "match":
        sys.exit(1)


@main.group()
def egress():
    """Egress and reclassification workflow."""


@egress.command("request")
@click.option("--wp", "wp_id", required=True)
@click.option("--volume", "volume_id", required=True)
@click.option("--script", "script_ref", required=True)
@click.option(
    "--intent",
    type=click.Choice(["publish", "further_analysis", "return_to_provider"]),
    default="publish",
)
@click.option("--descriptor", default=None, help="pre-approved output descriptor")
@click.pass_obj
def egress_request(ctx: Context, wp_id, volume_id, script_ref, intent, descriptor):
    data = ctx.call(
        "POST",
        f"/work-packages/{wp_id}/egress/request",
        json={
            "output_volume_id": volume_id,
            "analysis_script_ref": script_ref,
            "intent": intent,
            "output_descriptor": descriptor,
        },
    )
    if data["path"] == "pre_approved":
        ctx.emit(data, f"pre-approved release {data['release']['id']} awaiting signoff")
    else:
        ctx.emit(
            data,
            f"derived work package {data['work_package']['id']} created; "
            "full classification required",
        )


@egress.command("approve")
@click.argument("release_id")
@click.pass_obj
def egress_approve(ctx: Context, release_id):
    data = ctx.call("POST", f"/releases/{release_id}/signoff")
    state = "released" if data["released"] else "awaiting further signoff"
    ctx.emit(data, f"release {release_id}: {state}")


@main.group()
def software():
    """Software ingress review."""


@software.command("signoff")
@click.argument("request_id")
@click.option("--reject", is_flag=True)
@click.pass_obj
def software_signoff(ctx: Context, request_id, reject):
    data = ctx.call(
        "POST", f"/software-ingress/{request_id}/signoff",
        json={"approve": not reject},
    )
    ctx.emit(data, f"software request {request_id}: {data['review_state']}")


@main.group()
def policy():
    """Per-tier control matrix."""


@policy.command("show")
@click.argument("tier", type=int)
@click.pass_obj
def policy_show(ctx: Context, tier):
    data = ctx.call("GET", f"/policies/{tier}")
    if ctx.as_json:
        ctx.emit(data)
        return
    lines = [f"tier {tier} controls:"]
    for control, value in sorted(data.items()):
        lines.append(f"  {control}: {json.dumps(value)}")
    click.echo("\n".join(lines))


@main.group()
def blueprint():
    """Environment blueprints."""


@blueprint.command("plan")
@click.option("--wp", "wp_id", required=True)
@click.option("--tier", type=int, required=True)
@click.option("--platform", default="default-platform")
@click.option("--initial-ingress", is_flag=True)
@click.option("-o", "--output", default=None, type=click.Path())
@click.pass_obj
def blueprint_plan(ctx: Context, wp_id, tier, platform, initial_ingress, output):
    data = ctx.call(
        "POST",
        "/blueprints/plan",
        json={
            "work_package_id": wp_id,
            "tier": tier,
            "platform_id": platform,
            "initial_ingress": initial_ingress,
        },
    )
    if output:
        Path(output).write_text(json.dumps(data, indent=2, sort_keys=True), encoding="utf-8")
        click.echo(f"blueprint written to {output}")
    else:
        ctx.emit(data)


@blueprint.command("validate")
@click.option("--file", "file_path", required=True, type=click.Path(exists=True))
@click.option("--tier", type=int, default=None)
@click.pass_obj
def blueprint_validate(ctx: Context, file_path, tier):
    document = json.loads(Path(file_path).read_text(encoding="utf-8"))
    data = ctx.call(
        "POST", "/blueprints/validate", json={"blueprint": document, "tier": tier}
    )
    if data["conforms"]:
        ctx.emit(data, "blueprint conforms to policy")
    else:
        ctx.emit(data, "violations:\n" + "\n".join(
            f"  {v['control']}: {v['message']}" for v in data["violations"]
        ))
        sys.exit(1)


@main.group()
def audit():
    """Audit log access and verification."""


@audit.command("verify")
@click.option("--file", "file_path", default=None, type=click.Path(exists=True),
              help="verify an exported log offline")
@click.pass_obj
def audit_verify(ctx: Context, file_path):
    if file_path:
        result = import_and_verify(Path(file_path).read_text(encoding="utf-8"))
        data = {
            "valid": result.valid,
            "checked": result.checked,
            "divergence_seq": result.divergence_seq,
            "note": result.note,
        }
    else:
        data = ctx.call("GET", "/audit/verify")
    if data["valid"]:
        ctx.emit(data, f"audit chain valid ({data['checked']} events)")
    else:
        ctx.emit(
            data,
            f"audit chain INVALID at seq {data['divergence_seq']}: {data['note']}",
        )
        sys.exit(1)


@audit.command("export")
@click.option("-o", "--output", default=None, type=click.Path())
@click.pass_obj
def audit_export(ctx: Context, output):
    data = ctx.call("GET", "/audit/export")
    text = data["_raw"]
    if output:
        Path(output).write_text(text, encoding="utf-8")
        click.echo(f"exported {len(text.splitlines())} events to {output}")
    else:
        click.echo(text, nl=False)


if __name__ == "__main__":
    main()
