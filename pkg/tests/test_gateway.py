"""Gateway tests: auth, patients, artifact integrity, scoring, analyzers, live."""

from __future__ import annotations

import datetime
import random

import pytest
from fastapi.testclient import TestClient

from neurodeck import edf
from neurodeck.gateway import GatewayConfig, create_app
from neurodeck.gateway.app import DeviceEndpoint
from neurodeck.protocol import builtin_profiles
from neurodeck.screening import build_response, load_bundled, serialize_response
from neurodeck.signals import Component, SignalSpec
from neurodeck.simulate import FaultModel, run_virtual_device
from support import random_model

TOKEN = "test-static-token"
AUTH = {"Authorization": f"Bearer {TOKEN}"}
MCHAT = load_bundled("mchat_rf")


@pytest.fixture()
def client(tmp_path):
    config = GatewayConfig(
        data_dir=tmp_path / "gw",
        providers={"alice": "wonderland"},
        static_tokens={TOKEN: "alice"},
    )
    app = create_app(config)
    with TestClient(app) as test_client:
        test_client.app_config = config
        yield test_client


def create_patient(client, **overrides) -> dict:
    body = {"name": "Leland Palmer", "date_of_birth": "2023-05-01", "sex_at_birth": "M"}
    body.update(overrides)
    response = client.post("/patients", json=body, headers=AUTH)
    assert response.status_code == 201, response.text
    return response.json()


def small_recording(seed=1) -> bytes:
    return edf.encode_file(random_model(random.Random(seed)))


def mchat_response_doc(subject: str, at_risk: int = 0) -> dict:
    answers = {i.link_id: (i.scoring == "at-risk-if-no") for i in MCHAT.items}
    for link_id in list(answers)[:at_risk]:
        answers[link_id] = not answers[link_id]
    response = build_response(MCHAT, answers, subject, "2025-06-02T10:00:00Z")
    return serialize_response(response)


class TestAuth:
    def test_healthz_is_public(self, client):
        assert client.get("/healthz").json() == {"status": "ok"}

    def test_token_exchange(self, client):
        got = client.post(
            "/auth/token", json={"provider_id": "alice", "secret": "wonderland"}
        )
        assert got.status_code == 200
        token = got.json()["access_token"]
        check = client.get("/patients", headers={"Authorization": f"Bearer {token}"})
        assert check.status_code == 200

    def test_wrong_secret_rejected(self, client):
        got = client.post(
            "/auth/token", json={"provider_id": "alice", "secret": "nope"}
        )
        assert got.status_code == 401

    def test_garbage_token_rejected(self, client):
        got = client.get("/patients", headers={"Authorization": "Bearer garbage"})
        assert got.status_code == 401

    def test_missing_header_rejected_with_challenge(self, client):
        got = client.get("/patients")
        assert got.status_code == 401
        assert got.headers.get("WWW-Authenticate") == "Bearer"

    def test_every_data_route_rejects_unauthenticated(self, client):
        public = {"/healthz", "/auth/token"}
        for route in client.app.routes:
            path = getattr(route, "path", None)
            methods = getattr(route, "methods", None)
            if path is None or methods is None or path in public:
                continue
            concrete = path.replace("{patient_id}", "px").replace(
                "{artifact_id}", "ax"
            ).replace("{analyzer_id}", "zx").replace("{report_id}", "rx").replace(
                "{session_id}", "sx"
            ).replace("{canonical_id:path}", "qx")
            for method in methods - {"HEAD", "OPTIONS"}:
                got = client.request(method, concrete)
                assert got.status_code == 401, (method, concrete, got.status_code)


class TestPatients:
    def test_create_then_get_identical(self, client):
        created = create_patient(client)
        got = client.get(f"/patients/{created['patient_id']}", headers=AUTH)
        assert got.status_code == 200
        assert got.json() == created

    def test_search_prefix_case_insensitive(self, client):
        created = create_patient(client, name="Leland Palmer")
        create_patient(client, name="Bobby Briggs")
        got = client.get("/patients", params={"q": "le"}, headers=AUTH)
        names = [p["name"] for p in got.json()["patients"]]
        assert names == ["Leland Palmer"]
        by_id = client.get(
            "/patients", params={"q": created["patient_id"]}, headers=AUTH
        )
        assert [p["patient_id"] for p in by_id.json()["patients"]] == [
            created["patient_id"]
        ]

    def test_future_birthdate_rejected(self, client):
        future = (datetime.date.today() + datetime.timedelta(days=30)).isoformat()
        got = client.post(
            "/patients", json={"name": "X", "date_of_birth": future}, headers=AUTH
        )
        assert got.status_code == 422
        created = create_patient(client)
        patched = client.patch(
            f"/patients/{created['patient_id']}",
            json={"date_of_birth": future},
            headers=AUTH,
        )
        assert patched.status_code == 422

    def test_duplicate_external_id_conflict(self, client):
        create_patient(client, patient_id="mrn-1")
        got = client.post(
            "/patients", json={"name": "Two", "patient_id": "mrn-1"}, headers=AUTH
        )
        assert got.status_code == 409

    def test_patient_id_immutable(self, client):
        created = create_patient(client)
        got = client.patch(
            f"/patients/{created['patient_id']}",
            json={"patient_id": "other"},
            headers=AUTH,
        )
        assert got.status_code == 422

    def test_delete_refused_into_archive_when_artifacts_exist(self, client):
        created = create_patient(client)
        upload = client.post(
            f"/patients/{created['patient_id']}/recordings",
            content=small_recording(),
            headers=AUTH,
        )
        assert upload.status_code == 201
        deleted = client.delete(f"/patients/{created['patient_id']}", headers=AUTH)
        assert deleted.json()["archived"] is True
        # archived patients drop out of the default listing but stay resolvable
        listing = client.get("/patients", headers=AUTH).json()["patients"]
        assert created["patient_id"] not in [p["patient_id"] for p in listing]
        assert client.get(f"/patients/{created['patient_id']}", headers=AUTH).status_code == 200

    def test_delete_without_artifacts_is_hard(self, client):
        created = create_patient(client)
        deleted = client.delete(f"/patients/{created['patient_id']}", headers=AUTH)
        assert deleted.json() == {"deleted": True, "archived": False}
        assert client.get(f"/patients/{created['patient_id']}", headers=AUTH).status_code == 404


class TestRecordings:
    def test_upload_then_download_byte_identical(self, client):
        patient = create_patient(client)
        content = small_recording(seed=42)
        upload = client.post(
            f"/patients/{patient['patient_id']}/recordings", content=content, headers=AUTH
        )
        assert upload.status_code == 201
        artifact = upload.json()
        download = client.get(f"/recordings/{artifact['artifact_id']}", headers=AUTH)
        assert download.content == content

    def test_corrupt_header_rejected_with_findings(self, client):
        patient = create_patient(client)
        broken = bytearray(small_recording())
        broken[252:256] = b"zzzz"  # signal count field
        got = client.post(
            f"/patients/{patient['patient_id']}/recordings",
            content=bytes(broken),
            headers=AUTH,
        )
        assert got.status_code == 422
        assert "signal_count" in str(got.json()["detail"])

    def test_same_bytes_twice_same_hash_two_artifacts(self, client):
        patient = create_patient(client)
        content = small_recording(seed=7)
        first = client.post(
            f"/patients/{patient['patient_id']}/recordings", content=content, headers=AUTH
        ).json()
        second = client.post(
            f"/patients/{patient['patient_id']}/recordings", content=content, headers=AUTH
        ).json()
        assert first["content_hash"] == second["content_hash"]
        assert first["artifact_id"] != second["artifact_id"]
        listed = client.get(
            f"/patients/{patient['patient_id']}/artifacts", headers=AUTH
        ).json()["artifacts"]
        assert len(listed) == 2

    def test_unknown_patient_rejected(self, client):
        got = client.post(
            "/patients/ghost/recordings", content=small_recording(), headers=AUTH
        )
        assert got.status_code == 404


class TestResponses:
    def test_all_pass_scores_low_and_round_trips(self, client):
        patient = create_patient(client)
        doc = mchat_response_doc(patient["patient_id"])
        got = client.post(
            f"/patients/{patient['patient_id']}/responses", json=doc, headers=AUTH
        )
        assert got.status_code == 201
        body = got.json()
        assert body["risk"] == {
            "stage": "initial",
            "score": 0,
            "tier": "low",
            "action": "rescreen-later",
        }
        fetched = client.get(
            f"/responses/{body['artifact']['artifact_id']}", headers=AUTH
        )
        assert fetched.json() == doc

    def test_unknown_questionnaire_rejected(self, client):
        patient = create_patient(client)
        doc = mchat_response_doc(patient["patient_id"])
        doc["questionnaire"] = "urn:something:else"
        got = client.post(
            f"/patients/{patient['patient_id']}/responses", json=doc, headers=AUTH
        )
        assert got.status_code == 404

    def test_incomplete_response_rejected(self, client):
        patient = create_patient(client)
        doc = mchat_response_doc(patient["patient_id"])
        doc["item"] = doc["item"][:5]
        got = client.post(
            f"/patients/{patient['patient_id']}/responses", json=doc, headers=AUTH
        )
        assert got.status_code == 422
        assert "q06" in got.json()["detail"]

    def test_medium_risk_scored_server_side(self, client):
        patient = create_patient(client)
        doc = mchat_response_doc(patient["patient_id"], at_risk=5)
        got = client.post(
            f"/patients/{patient['patient_id']}/responses", json=doc, headers=AUTH
        )
        assert got.json()["risk"]["tier"] == "medium"
        assert got.json()["risk"]["action"] == "administer-follow-up"

    def test_answer_to_unknown_item_rejected(self, client):
        patient = create_patient(client)
        doc = mchat_response_doc(patient["patient_id"])
        doc["item"].append({"linkId": "q99", "answer": [{"valueBoolean": True}]})
        got = client.post(
            f"/patients/{patient['patient_id']}/responses", json=doc, headers=AUTH
        )
        assert got.status_code == 422
        assert "q99" in got.json()["detail"]

    def test_questionnaire_fetch(self, client):
        got = client.get(
            "/questionnaires/urn:neurodeck:questionnaire:mchat-rf", headers=AUTH
        )
        assert got.status_code == 200
        assert len(got.json()["item"]) == 20


class TestAnalyses:
    def make_sine_recording(self, amplitude=100.0) -> bytes:
        rate, seconds = 256, 4
        header = edf.FileHeader(
            format=edf.FileFormat.BDF,
            continuity=edf.Continuity.CONTINUOUS,
            record_count=seconds,
            record_duration=1.0,
        )
        cal = builtin_profiles()["muse-like"].calibration("EEG TP9", rate)
        import numpy as np

        t = np.arange(rate * seconds) / rate
        physical = amplitude * np.sin(2 * np.pi * 10 * t)
        digital = edf.phys_to_dig_array(physical, cal).tolist()
        model = edf.SignalFile(header=header, signals=[edf.Signal(cal, digital)])
        return edf.encode_file(model)

    def test_channel_stats_rms_matches_analytic(self, client):
        patient = create_patient(client)
        upload = client.post(
            f"/patients/{patient['patient_id']}/recordings",
            content=self.make_sine_recording(),
            headers=AUTH,
        ).json()
        report = client.post(
            f"/recordings/{upload['artifact_id']}/analyses/channel-stats", headers=AUTH
        )
        assert report.status_code == 201
        stats = report.json()["channels"]["EEG TP9"]
        assert stats["rms"]["value"] == pytest.approx(100 / 2**0.5, rel=0.01)
        assert stats["rms"]["units"] == "uV"
        assert stats["mean"]["value"] == pytest.approx(0.0, abs=0.5)
        fetched = client.get(f"/reports/{report.json()['report_id']}", headers=AUTH)
        assert fetched.json() == report.json()

    def test_constant_zero_channel_has_zero_mean_and_rms(self, client):
        # calibration whose lattice hits 0 uV exactly: [-1000, 1000] over [-2000, 2000]
        cal = edf.SignalHeader(
            label="EEG FLAT", physical_min=-1000.0, physical_max=1000.0,
            digital_min=-2000, digital_max=2000, samples_per_record=256,
            physical_dimension="uV",
        )
        model = edf.SignalFile(
            header=edf.FileHeader(
                format=edf.FileFormat.BDF,
                continuity=edf.Continuity.CONTINUOUS,
                record_count=2,
            ),
            signals=[edf.Signal(cal, [0] * 512)],
        )
        patient = create_patient(client)
        upload = client.post(
            f"/patients/{patient['patient_id']}/recordings",
            content=edf.encode_file(model),
            headers=AUTH,
        ).json()
        report = client.post(
            f"/recordings/{upload['artifact_id']}/analyses/channel-stats", headers=AUTH
        ).json()
        stats = report["channels"]["EEG FLAT"]
        assert stats["mean"]["value"] == 0.0
        assert stats["rms"]["value"] == 0.0

    def test_unknown_analyzer_404(self, client):
        patient = create_patient(client)
        upload = client.post(
            f"/patients/{patient['patient_id']}/recordings",
            content=self.make_sine_recording(),
            headers=AUTH,
        ).json()
        got = client.post(
            f"/recordings/{upload['artifact_id']}/analyses/does-not-exist", headers=AUTH
        )
        assert got.status_code == 404


class TestLiveSessions:
    @pytest.fixture()
    def device(self):
        profile = builtin_profiles()["muse-like"]
        spec = SignalSpec.uniform(
            [Component("sine", 60.0, frequency=10.0), Component("white-noise", 8.0)],
            profile.channel_count,
            seed=4,
        )
        dev = run_virtual_device(profile, spec, FaultModel(), duration=2.0, pace=0.0)
        yield dev
        dev.stop()

    @pytest.fixture()
    def live_client(self, tmp_path, device):
        config = GatewayConfig(
            data_dir=tmp_path / "gw",
            static_tokens={TOKEN: "alice"},
            devices=[DeviceEndpoint("sim0", device.host, device.port)],
        )
        with TestClient(create_app(config)) as test_client:
            yield test_client

    def test_devices_lists_profile(self, live_client):
        got = live_client.get("/devices", headers=AUTH)
        entries = got.json()["devices"]
        assert entries[0]["online"] is True
        assert entries[0]["profile"]["channel_count"] == 4

    def test_session_records_streams_and_stores(self, live_client):
        patient = create_patient(live_client)
        created = live_client.post(
            "/sessions",
            json={"patient_id": patient["patient_id"], "device": "sim0"},
            headers=AUTH,
        )
        assert created.status_code == 201, created.text
        session_id = created.json()["session_id"]

        saw_view = saw_complete = False
        artifact_id = None
        with live_client.websocket_connect(
            f"/sessions/{session_id}/live?token={TOKEN}"
        ) as stream:
            for _ in range(10_000):
                message = stream.receive_json()
                if message["type"] == "view":
                    saw_view = True
                    assert set(message["channels"]) == {"TP9", "AF7", "AF9", "TP10"}
                if message["type"] == "complete":
                    saw_complete = True
                    artifact_id = message["artifact_id"]
                    break
        assert saw_view and saw_complete

        status = live_client.get(f"/sessions/{session_id}", headers=AUTH).json()
        assert status["state"] == "complete"
        assert status["received_samples"] == 43 * 12

        download = live_client.get(f"/recordings/{artifact_id}", headers=AUTH)
        model = edf.decode_file(download.content)
        assert len(model.signals) == 4
        assert model.header.record_count == 3

    def test_live_stream_requires_token(self, live_client):
        patient = create_patient(live_client)
        created = live_client.post(
            "/sessions",
            json={"patient_id": patient["patient_id"], "device": "sim0"},
            headers=AUTH,
        )
        session_id = created.json()["session_id"]
        from starlette.websockets import WebSocketDisconnect

        with pytest.raises(WebSocketDisconnect):
            with live_client.websocket_connect(f"/sessions/{session_id}/live"):
                pass

    def test_unknown_device_name(self, live_client):
        patient = create_patient(live_client)
        got = live_client.post(
            "/sessions",
            json={"patient_id": patient["patient_id"], "device": "nope"},
            headers=AUTH,
        )
        assert got.status_code == 404
