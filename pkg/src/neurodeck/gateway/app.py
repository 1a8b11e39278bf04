"""HTTP surface of the care gateway.

Every endpoint except /healthz and /auth/token requires a bearer token.
Recordings are validated by the codec before storage and stored
content-addressed; responses are validated against their questionnaire
and scored server-side; analyses run from a pluggable registry. Live
sessions stream decimated frames over a websocket.
"""

from __future__ import annotations

import asyncio
import datetime
import json
import uuid
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path

import yaml
from fastapi import Body, Depends, FastAPI, HTTPException, Request, Response, WebSocket
from fastapi.middleware.cors import CORSMiddleware
from starlette.websockets import WebSocketDisconnect

from neurodeck import edf, screening
from neurodeck.gateway import analyzers
from neurodeck.gateway.auth import Authenticator
from neurodeck.gateway.sessions import LiveSession, SessionManager, SessionRequest
from neurodeck.gateway.storage import BlobStore, DocumentStore
from neurodeck.session import PatientIdentity
from neurodeck.simulate import DeviceClient, DeviceError


@dataclass
class DeviceEndpoint:
    name: str
    host: str
    port: int


@dataclass
class GatewayConfig:
    data_dir: Path
    providers: dict[str, str] = dataclass_field(default_factory=dict)
    static_tokens: dict[str, str] = dataclass_field(default_factory=dict)
    devices: list[DeviceEndpoint] = dataclass_field(default_factory=list)
    token_ttl: float = 24 * 3600.0


def load_config(path: str | Path) -> GatewayConfig:
    raw = yaml.safe_load(Path(path).read_text()) or {}
    return GatewayConfig(
        data_dir=Path(raw.get("data_dir", "gateway-data")),
        providers={p["id"]: str(p["secret"]) for p in raw.get("providers", [])},
        static_tokens={str(t): str(p) for t, p in raw.get("static_tokens", {}).items()},
        devices=[
            DeviceEndpoint(d["name"], d.get("host", "127.0.0.1"), int(d["port"]))
            for d in raw.get("devices", [])
        ],
        token_ttl=float(raw.get("token_ttl", 24 * 3600.0)),
    )


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


def _parse_date(text: str, field_name: str) -> datetime.date:
    try:
        return datetime.date.fromisoformat(text)
    except ValueError:
        raise HTTPException(422, f"{field_name} must be an ISO date, got {text!r}")


def create_app(config: GatewayConfig) -> FastAPI:
    app = FastAPI(title="neurodeck gateway", docs_url=None, redoc_url=None, openapi_url=None)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    blobs = BlobStore(config.data_dir / "blobs")
    docs = DocumentStore(config.data_dir / "documents")
    authenticator = Authenticator(
        providers=dict(config.providers),
        static_tokens=dict(config.static_tokens),
        token_ttl=config.token_ttl,
    )
    sessions = SessionManager()
    questionnaires: dict[str, screening.QuestionnaireModel] = {}
    for bundled in ("mchat_rf", "mchat_rf_followup"):
        model = screening.load_bundled(bundled)
        questionnaires[model.canonical_id] = model

    app.state.blobs = blobs
    app.state.documents = docs
    app.state.authenticator = authenticator
    app.state.sessions = sessions
    app.state.questionnaires = questionnaires

    # -- auth ---------------------------------------------------------------

    def principal_of(token: str | None) -> str:
        provider = authenticator.principal(token) if token else None
        if provider is None:
            raise HTTPException(
                401,
                "valid bearer token required",
                headers={"WWW-Authenticate": "Bearer"},
            )
        return provider

    def require_principal(request: Request) -> str:
        header = request.headers.get("Authorization", "")
        token = header.removeprefix("Bearer ").strip() if header.startswith("Bearer ") else None
        return principal_of(token)

    Principal = Depends(require_principal)

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/auth/token")
    def issue_token(body: dict = Body(...)):
        token = authenticator.issue(
            str(body.get("provider_id", "")), str(body.get("secret", ""))
        )
        if token is None:
            raise HTTPException(401, "unknown provider or wrong secret")
        return {
            "access_token": token,
            "token_type": "bearer",
            "expires_in": config.token_ttl,
        }

    # -- patients -------------------------------------------------------------

    def get_patient_or_404(patient_id: str) -> dict:
        patient = docs.get("patients", patient_id)
        if patient is None:
            raise HTTPException(404, f"no patient {patient_id}")
        return patient

    @app.get("/patients")
    def list_patients(q: str | None = None, _: str = Principal):
        patients = [p for p in docs.list("patients") if not p.get("archived")]
        if q:
            needle = q.lower()
            patients = [
                p
                for p in patients
                if p["patient_id"] == q or p.get("name", "").lower().startswith(needle)
            ]
        return {"patients": patients}

    @app.post("/patients", status_code=201)
    def create_patient(body: dict = Body(...), _: str = Principal):
        patient_id = str(body.get("patient_id") or f"p-{uuid.uuid4().hex[:10]}")
        if docs.get("patients", patient_id) is not None:
            raise HTTPException(409, f"patient {patient_id} already exists")
        name = str(body.get("name", ""))
        if not name:
            raise HTTPException(422, "patient needs a name")
        dob = None
        if body.get("date_of_birth"):
            dob = _parse_date(str(body["date_of_birth"]), "date_of_birth")
            if dob > datetime.date.today():
                raise HTTPException(422, "date_of_birth cannot be in the future")
        patient = {
            "patient_id": patient_id,
            "name": name,
            "date_of_birth": dob.isoformat() if dob else None,
            "sex_at_birth": body.get("sex_at_birth"),
            "created_at": _now(),
            "archived": False,
        }
        docs.put("patients", patient_id, patient)
        return patient

    @app.get("/patients/{patient_id}")
    def get_patient(patient_id: str, _: str = Principal):
        return get_patient_or_404(patient_id)

    @app.patch("/patients/{patient_id}")
    def update_patient(patient_id: str, body: dict = Body(...), _: str = Principal):
        get_patient_or_404(patient_id)
        if "patient_id" in body and str(body["patient_id"]) != patient_id:
            raise HTTPException(422, "patient_id is immutable")
        if body.get("date_of_birth"):
            dob = _parse_date(str(body["date_of_birth"]), "date_of_birth")
            if dob > datetime.date.today():
                raise HTTPException(422, "date_of_birth cannot be in the future")

        def apply(current: dict) -> dict:
            for key in ("name", "date_of_birth", "sex_at_birth"):
                if key in body:
                    current[key] = body[key]
            return current

        return docs.mutate("patients", patient_id, apply)

    def patient_artifacts(patient_id: str) -> list[dict]:
        return [a for a in docs.list("artifacts") if a["patient"] == patient_id]

    @app.delete("/patients/{patient_id}")
    def delete_patient(patient_id: str, _: str = Principal):
        get_patient_or_404(patient_id)
        if patient_artifacts(patient_id):
            archived = docs.mutate(
                "patients", patient_id, lambda p: {**p, "archived": True}
            )
            return {"deleted": False, "archived": True, "patient": archived}
        docs.delete("patients", patient_id)
        return {"deleted": True, "archived": False}

    @app.get("/patients/{patient_id}/artifacts")
    def list_artifacts(patient_id: str, _: str = Principal):
        get_patient_or_404(patient_id)
        return {"artifacts": patient_artifacts(patient_id)}

    # -- recordings ---------------------------------------------------------------

    def store_artifact(
        patient_id: str, kind: str, content: bytes, metadata: dict
    ) -> dict:
        digest = blobs.put(content)
        artifact = {
            "artifact_id": f"a-{uuid.uuid4().hex[:12]}",
            "patient": patient_id,
            "kind": kind,
            "content_hash": digest,
            "byte_size": len(content),
            "created_at": _now(),
            "metadata": metadata,
        }
        docs.put("artifacts", artifact["artifact_id"], artifact)
        return artifact

    async def read_body(request: Request) -> bytes:
        return await request.body()

    @app.post("/patients/{patient_id}/recordings", status_code=201)
    async def upload_recording(
        patient_id: str, request: Request, _: str = Principal
    ):
        get_patient_or_404(patient_id)
        content = await read_body(request)
        try:
            model = edf.decode_file(content)
        except edf.DecodeError as exc:
            raise HTTPException(422, f"recording rejected: {exc}")
        report = edf.validate(model)
        if not report.ok:
            raise HTTPException(
                422,
                {
                    "message": "recording fails validation",
                    "findings": [str(f) for f in report.findings],
                },
            )
        metadata = {
            "format": model.header.format.value,
            "signals": [s.header.label for s in model.signals],
            "record_count": model.header.record_count,
            "record_duration": model.header.record_duration,
            "duration_seconds": model.duration_seconds,
            "annotation_count": len(model.annotations),
        }
        artifact = store_artifact(patient_id, "recording", content, metadata)
        return artifact

    def get_artifact_or_404(artifact_id: str, kind: str | None = None) -> dict:
        artifact = docs.get("artifacts", artifact_id)
        if artifact is None or (kind is not None and artifact["kind"] != kind):
            raise HTTPException(404, f"no {kind or 'artifact'} {artifact_id}")
        return artifact

    @app.get("/recordings/{artifact_id}")
    def download_recording(artifact_id: str, _: str = Principal):
        artifact = get_artifact_or_404(artifact_id, "recording")
        content = blobs.get(artifact["content_hash"])
        return Response(content=content, media_type="application/octet-stream")

    # -- questionnaires and responses -----------------------------------------------

    @app.get("/questionnaires")
    def list_questionnaires(_: str = Principal):
        return {
            "questionnaires": [
                {"canonical_id": model.canonical_id, "title": model.title}
                for model in questionnaires.values()
            ]
        }

    @app.get("/questionnaires/{canonical_id:path}")
    def get_questionnaire(canonical_id: str, _: str = Principal):
        model = questionnaires.get(canonical_id)
        if model is None:
            raise HTTPException(404, f"no questionnaire {canonical_id}")
        return screening.serialize_questionnaire(model)

    @app.post("/patients/{patient_id}/responses", status_code=201)
    def store_response(patient_id: str, body: dict = Body(...), _: str = Principal):
        get_patient_or_404(patient_id)
        try:
            response = screening.parse_response(body)
        except screening.ResponseError as exc:
            raise HTTPException(422, str(exc))
        model = questionnaires.get(response.questionnaire)
        if model is None:
            raise HTTPException(404, f"unknown questionnaire {response.questionnaire}")
        stage = (
            "follow-up" if response.questionnaire.endswith("-followup") else "initial"
        )
        try:
            screening.validate_response(model, response)
            risk = screening.score_mchat(model, response, stage=stage)
        except screening.ResponseError as exc:
            raise HTTPException(422, str(exc))
        content = json.dumps(
            screening.serialize_response(response), sort_keys=True
        ).encode("utf-8")
        artifact = store_artifact(
            patient_id,
            "response",
            content,
            {
                "questionnaire": response.questionnaire,
                "authored": response.authored,
                "risk": risk.to_dict(),
            },
        )
        return {"artifact": artifact, "risk": risk.to_dict()}

    @app.get("/responses/{artifact_id}")
    def get_response(artifact_id: str, _: str = Principal):
        artifact = get_artifact_or_404(artifact_id, "response")
        content = blobs.get(artifact["content_hash"])
        return Response(content=content, media_type="application/fhir+json")

    # -- analyses ---------------------------------------------------------------

    @app.get("/analyzers")
    def list_analyzers(_: str = Principal):
        return {"analyzers": analyzers.available()}

    @app.post("/recordings/{artifact_id}/analyses/{analyzer_id}", status_code=201)
    def run_analysis(artifact_id: str, analyzer_id: str, _: str = Principal):
        artifact = get_artifact_or_404(artifact_id, "recording")
        content = blobs.get(artifact["content_hash"])
        try:
            model = edf.decode_file(content)
        except edf.DecodeError as exc:
            raise HTTPException(422, f"stored recording is undecodable: {exc}")
        try:
            version, channels = analyzers.run(analyzer_id, model)
        except analyzers.AnalyzerError as exc:
            raise HTTPException(404, str(exc))
        report = {
            "report_id": f"r-{uuid.uuid4().hex[:12]}",
            "recording": artifact_id,
            "patient": artifact["patient"],
            "analyzer": analyzer_id,
            "analyzer_version": version,
            "produced_at": _now(),
            "channels": channels,
        }
        docs.put("reports", report["report_id"], report)
        store_artifact(
            artifact["patient"],
            "report",
            json.dumps(report, sort_keys=True).encode("utf-8"),
            {"report_id": report["report_id"], "analyzer": analyzer_id},
        )
        return report

    @app.get("/reports/{report_id}")
    def get_report(report_id: str, _: str = Principal):
        report = docs.get("reports", report_id)
        if report is None:
            raise HTTPException(404, f"no report {report_id}")
        return report

    # -- devices and live sessions ---------------------------------------------------

    @app.get("/devices")
    def list_devices(_: str = Principal):
        found = []
        for endpoint in config.devices:
            entry: dict = {
                "name": endpoint.name,
                "host": endpoint.host,
                "port": endpoint.port,
            }
            try:
                client = DeviceClient(
                    endpoint.host, endpoint.port, connect_timeout=1.0
                ).connect()
                try:
                    entry["profile"] = client.discover().to_dict()
                    entry["online"] = True
                finally:
                    client.close()
            except DeviceError:
                entry["online"] = False
            found.append(entry)
        return {"devices": found}

    def resolve_device(body: dict) -> tuple[str, int]:
        if body.get("device"):
            for endpoint in config.devices:
                if endpoint.name == body["device"]:
                    return endpoint.host, endpoint.port
            raise HTTPException(404, f"no configured device named {body['device']}")
        if body.get("host") and body.get("port"):
            return str(body["host"]), int(body["port"])
        raise HTTPException(422, "specify a configured device name or host and port")

    @app.post("/sessions", status_code=201)
    def create_session(body: dict = Body(...), _: str = Principal):
        patient = get_patient_or_404(str(body.get("patient_id", "")))
        host, port = resolve_device(body)
        identity = PatientIdentity(
            code=patient["patient_id"],
            name=patient.get("name"),
            sex=patient.get("sex_at_birth"),
            birthdate=(
                datetime.date.fromisoformat(patient["date_of_birth"])
                if patient.get("date_of_birth")
                else None
            ),
        )
        request = SessionRequest(
            patient=identity,
            host=host,
            port=port,
            rate=body.get("rate"),
            channels=tuple(body.get("channels", ())),
            duration=body.get("duration"),
            anonymize=bool(body.get("anonymize", False)),
        )

        def on_complete(live: LiveSession, data: bytes, metadata: dict) -> str:
            artifact = store_artifact(
                identity.code, "recording", data, {"session": live.id, **metadata}
            )
            return artifact["artifact_id"]

        live = sessions.create(request, on_complete=on_complete)
        return live.status()

    @app.get("/sessions/{session_id}")
    def session_status(session_id: str, _: str = Principal):
        live = sessions.get(session_id)
        if live is None:
            raise HTTPException(404, f"no session {session_id}")
        return live.status()

    @app.post("/sessions/{session_id}/stop")
    def stop_session(session_id: str, _: str = Principal):
        live = sessions.get(session_id)
        if live is None:
            raise HTTPException(404, f"no session {session_id}")
        live.request_stop()
        live.wait(timeout=30.0)
        return live.status()

    @app.websocket("/sessions/{session_id}/live")
    async def live_stream(websocket: WebSocket, session_id: str):
        token = websocket.query_params.get("token")
        if authenticator.principal(token or "") is None:
            await websocket.close(code=1008, reason="valid token required")
            return
        live = sessions.get(session_id)
        if live is None:
            await websocket.close(code=1008, reason=f"no session {session_id}")
            return
        await websocket.accept()
        subscription = live.subscribe()
        try:
            while True:
                message = await asyncio.to_thread(subscription.get)
                if message is None:
                    break
                await websocket.send_json(message)
        except WebSocketDisconnect:
            pass
        finally:
            live.unsubscribe(subscription)
            try:
                await websocket.close()
            except RuntimeError:
                pass

    return app
