#!/usr/bin/env python3
"""Regenerate the frontend test fixtures from the real backend.

- live_stream.json: every websocket message from an actual gateway-hosted
  recording session (seeded virtual device, so the stream is
  deterministic), plus the final decimated series the UI must render
  exactly.
- questionnaire_flow.json: a three-chain enableWhen questionnaire, answer
  scripts, and the presentation order computed by the backend's own flow
  semantics.

Run from the repo root with the package installed:

    python frontend/scripts/make_fixtures.py
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi.testclient import TestClient

from neurodeck.gateway import GatewayConfig, create_app
from neurodeck.gateway.app import DeviceEndpoint
from neurodeck.protocol import builtin_profiles
from neurodeck.screening import next_items, parse_questionnaire
from neurodeck.signals import Component, SignalSpec
from neurodeck.simulate import FaultModel, run_virtual_device

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
TOKEN = "fixture-token"
AUTH = {"Authorization": f"Bearer {TOKEN}"}


def dump_live_stream(tmp: Path) -> None:
    profile = builtin_profiles()["muse-like"]
    spec = SignalSpec.uniform(
        [Component("sine", 90.0, frequency=11.0), Component("white-noise", 10.0)],
        profile.channel_count,
        seed=31337,
    )
    faults = FaultModel(drop_probability=0.08, seed=5)
    device = run_virtual_device(profile, spec, faults, duration=4.0, pace=0.0)
    try:
        config = GatewayConfig(
            data_dir=tmp / "gw",
            static_tokens={TOKEN: "fixture"},
            devices=[DeviceEndpoint("sim0", device.host, device.port)],
        )
        with TestClient(create_app(config)) as client:
            patient = client.post(
                "/patients", json={"name": "Fixture Kid"}, headers=AUTH
            ).json()
            created = client.post(
                "/sessions",
                json={"patient_id": patient["patient_id"], "device": "sim0"},
                headers=AUTH,
            ).json()
            messages = []
            with client.websocket_connect(
                f"/sessions/{created['session_id']}/live?token={TOKEN}"
            ) as stream:
                while True:
                    message = stream.receive_json()
                    messages.append(message)
                    if message["type"] == "complete":
                        break
    finally:
        device.stop()

    views = [m for m in messages if m["type"] == "view"]
    quality = [m for m in messages if m["type"] == "quality"]
    fixture = {
        "messages": messages,
        "expected": {
            "final_series": views[-1]["channels"],
            "view_count": len(views),
            "quality_count": len(quality),
            "gap_count": sum(1 for m in quality if m["event"]["kind"] == "gap"),
            "final_state": "complete",
        },
    }
    (OUT / "live_stream.json").write_text(json.dumps(fixture, indent=1) + "\n")
    print(f"live_stream.json: {len(messages)} messages, {len(views)} views")


CHAIN_DOC = {
    "resourceType": "Questionnaire",
    "url": "urn:neurodeck:questionnaire:chain-demo",
    "title": "Three-chain demo",
    "status": "active",
    "item": [
        {"linkId": "a1", "text": "Chain A step 1", "type": "boolean"},
        {"linkId": "b1", "text": "Chain B step 1", "type": "boolean"},
        {
            "linkId": "c1",
            "text": "Chain C step 1",
            "type": "choice",
            "answerOption": [
                {"valueCoding": {"code": "yes"}},
                {"valueCoding": {"code": "no"}},
            ],
        },
        {
            "linkId": "a2",
            "text": "Chain A step 2",
            "type": "boolean",
            "enableWhen": [{"question": "a1", "operator": "=", "answerBoolean": True}],
        },
        {
            "linkId": "b2",
            "text": "Chain B step 2",
            "type": "boolean",
            "enableWhen": [{"question": "b1", "operator": "=", "answerBoolean": False}],
        },
        {
            "linkId": "c2",
            "text": "Chain C step 2",
            "type": "boolean",
            "enableWhen": [
                {"question": "c1", "operator": "=", "answerCoding": {"code": "yes"}}
            ],
        },
        {
            "linkId": "a3",
            "text": "Chain A step 3",
            "type": "boolean",
            "enableWhen": [{"question": "a2", "operator": "=", "answerBoolean": True}],
        },
    ],
}


def presentation_oracle(model, script: dict) -> list[str]:
    """Replay a one-question-at-a-time flow with the backend's semantics."""
    answers: dict = {}
    order: list[str] = []
    while True:
        pending = next_items(model, answers)
        if not pending:
            return order
        current = pending[0]
        order.append(current.link_id)
        answers[current.link_id] = script[current.link_id]


def dump_questionnaire_flow() -> None:
    model = parse_questionnaire(CHAIN_DOC)
    scenarios = []
    for name, script in (
        ("all-chains-open", {"a1": True, "b1": False, "c1": "yes",
                             "a2": True, "b2": False, "c2": True, "a3": False}),
        ("chains-cut-short", {"a1": False, "b1": True, "c1": "no"}),
        ("a-chain-stops-at-two", {"a1": True, "b1": True, "c1": "no", "a2": False}),
    ):
        scenarios.append(
            {
                "name": name,
                "answers": script,
                "expected_order": presentation_oracle(model, script),
            }
        )
    fixture = {"questionnaire": CHAIN_DOC, "scenarios": scenarios}
    (OUT / "questionnaire_flow.json").write_text(json.dumps(fixture, indent=1) + "\n")
    print(f"questionnaire_flow.json: {len(scenarios)} scenarios")


def main() -> None:
    import tempfile

    OUT.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        dump_live_stream(Path(tmp))
    dump_questionnaire_flow()


if __name__ == "__main__":
    main()
