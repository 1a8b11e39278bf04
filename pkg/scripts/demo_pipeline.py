#!/usr/bin/env python3
"""End-to-end demo: device -> recording -> gateway -> screening -> analysis.

Spins up a faulty virtual headset and an in-process gateway, records a
short session, uploads it, stores a screening response, and runs the
demo analyzer. Prints what happened at each step. From the repo root:

    python scripts/demo_pipeline.py
"""

from __future__ import annotations

import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from neurodeck import edf
from neurodeck.gateway import GatewayConfig, create_app
from neurodeck.gateway.app import DeviceEndpoint
from neurodeck.protocol import builtin_profiles
from neurodeck.screening import build_response, load_bundled, serialize_response
from neurodeck.signals import Component, SignalSpec
from neurodeck.simulate import DisconnectWindow, FaultModel, run_virtual_device

TOKEN = "demo-token"
AUTH = {"Authorization": f"Bearer {TOKEN}"}


def main() -> None:
    profile = builtin_profiles()["muse-like"]
    spec = SignalSpec.uniform(
        [Component("sine", 70.0, frequency=9.0), Component("white-noise", 10.0)],
        profile.channel_count,
        seed=99,
    )
    faults = FaultModel(drop_probability=0.05, seed=7,
                        disconnects=(DisconnectWindow(at=3.0, down_for=0.4),))
    # gentle pacing so the reconnect lands mid-stream instead of after the end
    device = run_virtual_device(profile, spec, faults, duration=8.0, pace=0.05)
    print(f"virtual {profile.name} serving at {device.endpoint}")

    with tempfile.TemporaryDirectory() as tmp:
        config = GatewayConfig(
            data_dir=Path(tmp) / "gateway-data",
            static_tokens={TOKEN: "demo-operator"},
            devices=[DeviceEndpoint("sim-muse", device.host, device.port)],
        )
        with TestClient(create_app(config)) as client:
            patient = client.post(
                "/patients",
                json={"name": "Demo Kid", "date_of_birth": "2023-04-01",
                      "sex_at_birth": "F"},
                headers=AUTH,
            ).json()
            print(f"created patient {patient['patient_id']} ({patient['name']})")

            created = client.post(
                "/sessions",
                json={"patient_id": patient["patient_id"], "device": "sim-muse"},
                headers=AUTH,
            ).json()
            session_id = created["session_id"]
            print(f"recording session {session_id} started")

            artifact_id = None
            quality = 0
            with client.websocket_connect(
                f"/sessions/{session_id}/live?token={TOKEN}"
            ) as stream:
                while True:
                    message = stream.receive_json()
                    if message["type"] == "quality":
                        quality += 1
                        event = message["event"]
                        print(f"  quality: {event['kind']} on {event['channel']} "
                              f"at {event['onset']:.2f}s ({event['severity']})")
                    elif message["type"] == "state":
                        print(f"  state -> {message['state']}")
                    elif message["type"] == "complete":
                        artifact_id = message["artifact_id"]
                        break
            print(f"recording stored as {artifact_id} ({quality} quality events)")

            blob = client.get(f"/recordings/{artifact_id}", headers=AUTH).content
            model = edf.decode_file(blob)
            gaps = [a for a in model.annotations if a.texts[0] == "GAP"]
            print(f"file: {model.header.record_count} records, "
                  f"{len(model.signals)} signals, {len(gaps)} gap annotations")

            mchat = load_bundled("mchat_rf")
            answers = {i.link_id: (i.scoring == "at-risk-if-no") for i in mchat.items}
            for link_id in ("q01", "q03", "q04", "q06"):  # four concerning answers
                answers[link_id] = not answers[link_id]
            response = build_response(
                mchat, answers, patient["patient_id"], "2025-06-02T11:00:00Z"
            )
            stored = client.post(
                f"/patients/{patient['patient_id']}/responses",
                json=serialize_response(response),
                headers=AUTH,
            ).json()
            risk = stored["risk"]
            print(f"screening: score {risk['score']} -> {risk['tier'].upper()} "
                  f"({risk['action']})")

            report = client.post(
                f"/recordings/{artifact_id}/analyses/channel-stats", headers=AUTH
            ).json()
            tp9 = report["channels"]["EEG TP9"]
            print(f"channel-stats EEG TP9: rms {tp9['rms']['value']:.1f} uV, "
                  f"mean {tp9['mean']['value']:.2f} uV")

    device.stop()
    print("demo complete")


if __name__ == "__main__":
    main()
