#!/usr/bin/env python3
"""Regenerate the committed recording fixtures, deterministically.

Runs a fault-free virtual device at full speed with pinned seeds and a
frozen wall clock, records through the real pipeline, and writes the
finalized BDF+ plus its metadata sidecar. Output is byte-stable across
runs. From the repo root:

    python scripts/make_fixtures.py
"""

from __future__ import annotations

import datetime
import json
from pathlib import Path

from neurodeck.protocol import DeviceConfig, builtin_profiles
from neurodeck.session import PatientIdentity, RecordingSession, SessionEvent
from neurodeck.signals import Component, SignalSpec
from neurodeck.simulate import DeviceClient, FaultModel, run_virtual_device

OUT_DIR = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
FROZEN_NOW = datetime.datetime(2025, 6, 2, 10, 30, 0)


def main() -> None:
    profile = builtin_profiles()["muse-like"]
    spec = SignalSpec.uniform(
        [Component("sine", 80.0, frequency=10.0), Component("white-noise", 12.0)],
        profile.channel_count,
        seed=2025,
    )
    device = run_virtual_device(profile, spec, FaultModel(), duration=6.0, pace=0.0)
    try:
        client = DeviceClient(device.host, device.port).connect()
        try:
            client.discover()
            config = client.configure(DeviceConfig.for_profile(profile))
            session = RecordingSession(
                "fixture",
                PatientIdentity(code="FIX01", name="Fixture Kid", sex="F",
                                birthdate=datetime.date(2023, 4, 1)),
                profile,
                config,
                clock=lambda: FROZEN_NOW,
            )
            session.advance(SessionEvent.DEVICE_CONNECTED)
            session.advance(SessionEvent.SENSOR_MOUNTED)
            session.advance(SessionEvent.START_RECORDING)
            client.start()
            for event in client.events():
                if event.kind == "frame":
                    session.ingest_frame(event.frame)
                elif event.kind in ("stopped", "failed"):
                    break
            session.advance(SessionEvent.STOP_RECORDING)
            data, metadata = session.finalize()
        finally:
            client.close()
    finally:
        device.stop()

    OUT_DIR.mkdir(parents=True, exist_ok=True)
    (OUT_DIR / "session_muse.bdf").write_bytes(data)
    (OUT_DIR / "session_muse.json").write_text(json.dumps(metadata, indent=2) + "\n")
    print(f"wrote {OUT_DIR / 'session_muse.bdf'} ({len(data)} bytes)")


if __name__ == "__main__":
    main()
