"""Virtual device tests: discovery, streaming, determinism, fault injection."""

from __future__ import annotations

import contextlib

import pytest

from neurodeck.protocol import DeviceConfig, builtin_profiles, detect_gaps
from neurodeck.signals import Component, SignalSpec
from neurodeck.simulate import (
    DeviceClient,
    DeviceError,
    DisconnectWindow,
    FaultModel,
    run_virtual_device,
)

MUSE = builtin_profiles()["muse-like"]
BIOPOT = builtin_profiles()["biopot-like"]


def quiet_spec(profile, seed=11):
    return SignalSpec.uniform(
        [Component("sine", 100.0, frequency=10.0), Component("white-noise", 15.0)],
        profile.channel_count,
        seed=seed,
    )


@contextlib.contextmanager
def device(profile=MUSE, faults=None, duration=2.0, pace=0.0, spec=None):
    dev = run_virtual_device(
        profile, spec or quiet_spec(profile), faults, duration=duration, pace=pace
    )
    try:
        yield dev
    finally:
        dev.stop()


def collect(dev, profile, rate=None):
    client = DeviceClient(dev.host, dev.port, reconnect_timeout=5.0).connect()
    try:
        client.discover()
        config = client.configure(DeviceConfig.for_profile(profile, rate=rate))
        client.start()
        events = list(client.events())
        return client, config, events
    finally:
        client.close()


class TestDiscoveryAndControl:
    def test_discovery_returns_profile_tree(self):
        with device() as dev:
            client = DeviceClient(dev.host, dev.port).connect()
            try:
                profile = client.discover()
            finally:
                client.close()
            assert profile == MUSE

    def test_configure_negotiates(self):
        with device(profile=BIOPOT) as dev:
            client = DeviceClient(dev.host, dev.port).connect()
            try:
                client.discover()
                got = client.configure(DeviceConfig.for_profile(BIOPOT, rate=300))
            finally:
                client.close()
            assert got.rate == 250

    def test_unreachable_endpoint(self):
        with pytest.raises(DeviceError, match="cannot reach"):
            DeviceClient("127.0.0.1", 1).connect()


class TestStreaming:
    def test_two_second_run_yields_43_consecutive_frames(self):
        with device(duration=2.0) as dev:
            _, _, events = collect(dev, MUSE)
        frames = [e.frame for e in events if e.kind == "frame"]
        stopped = [e for e in events if e.kind == "stopped"]
        assert len(frames) == 43  # ceil(2 * 256 / 12)
        assert [f.sequence for f in frames] == list(range(43))
        assert detect_gaps([f.sequence for f in frames]) == []
        assert stopped and stopped[0].stats == {"generated": 43, "delivered": 43}

    def test_stream_is_deterministic(self):
        def run():
            with device(duration=1.0) as dev:
                _, _, events = collect(dev, MUSE)
            return [e.frame for e in events if e.kind == "frame"]

        assert run() == run()

    def test_client_stop_interrupts_unbounded_stream(self):
        with device(duration=None, pace=0.005) as dev:
            client = DeviceClient(dev.host, dev.port).connect()
            try:
                client.discover()
                client.configure(DeviceConfig.for_profile(MUSE))
                client.start()
                seen = 0
                for event in client.events():
                    if event.kind == "frame":
                        seen += 1
                        if seen == 5:
                            client.request_stop()
                    if event.kind == "stopped":
                        break
            finally:
                client.close()
            assert seen >= 5

    def test_realtime_pacing_is_roughly_wall_clock(self):
        import time

        with device(duration=1.0, pace=1.0) as dev:
            started = time.monotonic()
            _, _, events = collect(dev, MUSE)
            elapsed = time.monotonic() - started
        frames = sum(1 for e in events if e.kind == "frame")
        assert frames == 22  # ceil(1 * 256 / 12)
        assert 0.8 <= elapsed <= 1.6
        # long-run average rate within 5% of rate/samples_per_packet
        assert frames / elapsed == pytest.approx(256 / 12, rel=0.07)


class TestFaults:
    def test_full_drop_delivers_nothing_but_discovery_works(self):
        with device(faults=FaultModel(drop_probability=1.0), duration=1.0) as dev:
            _, _, events = collect(dev, MUSE)
        assert sum(1 for e in events if e.kind == "frame") == 0
        stopped = [e for e in events if e.kind == "stopped"]
        assert stopped and stopped[0].stats["delivered"] == 0
        assert stopped[0].stats["generated"] == 22

    def test_partial_drop_gap_total_matches_device_accounting(self):
        faults = FaultModel(drop_probability=0.3, seed=99)
        with device(faults=faults, duration=2.0) as dev:
            _, _, events = collect(dev, MUSE)
        frames = [e.frame for e in events if e.kind == "frame"]
        stopped = next(e for e in events if e.kind == "stopped")
        missing = sum(m for _, m in detect_gaps([f.sequence for f in frames]))
        tail_lost = (stopped.stats["generated"] - 1) - frames[-1].sequence
        assert missing + tail_lost == stopped.stats["generated"] - stopped.stats["delivered"]
        assert 0 < stopped.stats["delivered"] < stopped.stats["generated"]

    def test_disconnect_window_causes_matching_gap(self):
        faults = FaultModel(disconnects=(DisconnectWindow(at=1.0, down_for=0.5),))
        with device(faults=faults, duration=2.0, pace=1.0) as dev:
            _, _, events = collect(dev, MUSE)
        kinds = [e.kind for e in events]
        assert "lost" in kinds and "restored" in kinds
        frames = [e.frame for e in events if e.kind == "frame"]
        missing = sum(m for _, m in detect_gaps([f.sequence for f in frames]))
        expected = 0.5 * 256 / 12  # ~10.7 frames in the window
        assert missing == pytest.approx(expected, abs=1.5)

    def test_stream_ending_during_disconnect_still_reports_stopped(self):
        faults = FaultModel(disconnects=(DisconnectWindow(at=0.5, down_for=30.0),))
        with device(faults=faults, duration=1.0, pace=1.0) as dev:
            _, _, events = collect(dev, MUSE)
        kinds = [e.kind for e in events]
        assert "lost" in kinds
        stopped = [e for e in events if e.kind == "stopped"]
        assert stopped and stopped[0].stats["generated"] == 22

    def test_discovery_still_works_after_the_stream_ended(self):
        with device(duration=0.5) as dev:
            collect(dev, MUSE)  # first client drains the whole stream
            late = DeviceClient(dev.host, dev.port).connect()
            try:
                # the pushed stopped-notice must not break the discover reply
                assert late.discover() == MUSE
            finally:
                late.close()

    def test_invalid_fault_model_rejected(self):
        with pytest.raises(DeviceError, match="probability"):
            FaultModel(drop_probability=1.5)
        with pytest.raises(DeviceError, match="non-negative"):
            DisconnectWindow(at=-1.0, down_for=0.5)
