"""CLI tests: exit-code discipline and the end-to-end pipeline."""

from __future__ import annotations

import json
import random
import threading
from pathlib import Path

import pytest
from click.testing import CliRunner

from neurodeck import edf
from neurodeck.cli import main
from neurodeck.protocol import builtin_profiles
from neurodeck.screening import (
    build_response,
    load_bundled,
    serialize_questionnaire,
    serialize_response,
)
from neurodeck.signals import Component, SignalSpec
from neurodeck.simulate import FaultModel, run_virtual_device
from support import random_model

MCHAT = load_bundled("mchat_rf")


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def sample_file(tmp_path):
    path = tmp_path / "sample.edf"
    path.write_bytes(edf.encode_file(random_model(random.Random(5))))
    return path


@pytest.fixture()
def device():
    profile = builtin_profiles()["muse-like"]
    spec = SignalSpec.uniform(
        [Component("sine", 60.0, frequency=10.0), Component("white-noise", 8.0)],
        profile.channel_count, seed=4,
    )
    dev = run_virtual_device(profile, spec, FaultModel(), duration=2.0, pace=0.0)
    yield dev
    dev.stop()


class TestInspect:
    def test_valid_file_exits_zero(self, runner, sample_file):
        result = runner.invoke(main, ["inspect", str(sample_file)])
        assert result.exit_code == 0, result.output
        assert "records" in result.output

    def test_json_output_is_parseable(self, runner, sample_file):
        result = runner.invoke(main, ["inspect", str(sample_file), "--json"])
        assert result.exit_code == 0
        info = json.loads(result.output)
        assert {"format", "records", "signals", "annotation_count"} <= info.keys()

    def test_truncated_file_exits_one_with_offset(self, runner, sample_file, tmp_path):
        broken = tmp_path / "broken.edf"
        broken.write_bytes(sample_file.read_bytes()[:-3])
        result = runner.invoke(main, ["inspect", str(broken)])
        assert result.exit_code == 1
        assert "@byte" in result.output

    def test_missing_file_is_usage_error(self, runner):
        result = runner.invoke(main, ["inspect", "/nonexistent.edf"])
        assert result.exit_code == 2


class TestConvert:
    def test_convert_to_bdf_and_back(self, runner, tmp_path):
        rng = random.Random(9)
        model = random_model(rng)
        while model.header.format is not edf.FileFormat.EDF:
            model = random_model(rng)
        src = tmp_path / "a.edf"
        src.write_bytes(edf.encode_file(model))
        dst = tmp_path / "a.bdf"
        result = runner.invoke(main, ["convert", str(src), str(dst), "--format", "bdf"])
        assert result.exit_code == 0, result.output
        converted = edf.decode_file(dst.read_bytes())
        assert converted.header.format is edf.FileFormat.BDF
        assert [s.samples for s in converted.signals] == [s.samples for s in model.signals]

    def test_anonymize(self, runner, tmp_path, sample_file):
        dst = tmp_path / "anon.edf"
        result = runner.invoke(main, ["convert", str(sample_file), str(dst), "--anonymize"])
        assert result.exit_code == 0
        model = edf.decode_file(dst.read_bytes())
        assert model.header.patient_id == "X X X X"


def free_port() -> int:
    import socket

    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def draining_client(port: int, profile_name: str = "muse-like") -> threading.Thread:
    """The device streams only after a client starts it, like notify-on-subscribe."""

    def run():
        import time

        from neurodeck.protocol import DeviceConfig
        from neurodeck.simulate import DeviceClient, DeviceError

        deadline = time.monotonic() + 10
        while time.monotonic() < deadline:
            try:
                client = DeviceClient("127.0.0.1", port, connect_timeout=0.2).connect()
                break
            except DeviceError:
                time.sleep(0.05)
        else:
            return
        try:
            profile = client.discover()
            client.configure(DeviceConfig.for_profile(profile))
            client.start()
            for event in client.events():
                if event.kind in ("stopped", "failed"):
                    break
        finally:
            client.close()

    thread = threading.Thread(target=run, daemon=True)
    thread.start()
    return thread


class TestSimulate:
    def invoke_with_client(self, runner, extra_args):
        port = free_port()
        thread = draining_client(port)
        result = runner.invoke(
            main, ["simulate", "--port", str(port), "--pace", "0", *extra_args]
        )
        thread.join(timeout=10)
        return result

    def test_two_seconds_muse_reports_43_frames(self, runner):
        result = self.invoke_with_client(runner, ["--duration", "2"])
        assert result.exit_code == 0, result.output
        assert "frames generated: 43" in result.output
        assert "delivered: 43" in result.output

    def test_full_drop_delivers_zero_cleanly(self, runner):
        result = self.invoke_with_client(runner, ["--duration", "1", "--drop", "1.0"])
        assert result.exit_code == 0
        assert "delivered: 0" in result.output

    def test_unsupported_rate_negotiated_and_noted(self, runner):
        result = self.invoke_with_client(runner, ["--duration", "1", "--rate", "100"])
        assert result.exit_code == 0
        assert "serving 256 Hz" in result.output

    def test_scenario_file(self, runner, tmp_path):
        port = free_port()
        scenario = tmp_path / "scenario.yaml"
        scenario.write_text(
            "profile: biopot-like\n"
            "duration: 1\n"
            "pace: 0\n"
            f"port: {port}\n"
            "spec:\n"
            "  seed: 3\n"
            "  all_channels:\n"
            "    - {waveform: sine, amplitude: 40, frequency: 8}\n"
            "faults: {drop_probability: 0.0}\n"
        )
        thread = draining_client(port, "biopot-like")
        result = runner.invoke(main, ["simulate", "--scenario", str(scenario)])
        thread.join(timeout=10)
        assert result.exit_code == 0, result.output
        assert "biopot-like" in result.output

    def test_busy_endpoint_exits_one(self, runner):
        port = free_port()
        import socket

        blocker = socket.socket()
        blocker.bind(("127.0.0.1", port))
        blocker.listen(1)
        try:
            result = runner.invoke(
                main, ["simulate", "--port", str(port), "--duration", "1"]
            )
            assert result.exit_code == 1
            assert "error" in result.output
        finally:
            blocker.close()


class TestRecord:
    def test_records_against_simulator_with_expected_samples(
        self, runner, device, tmp_path
    ):
        out = tmp_path / "take.bdf"
        result = runner.invoke(
            main,
            ["record", "--patient", "P77", "--endpoint", device.endpoint,
             "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        model = edf.decode_file(out.read_bytes())
        assert len(model.signals) == 4
        # 43 frames x 12 samples zero-padded into 3 one-second records
        assert model.header.record_count == 3
        for signal in model.signals:
            assert len(signal.samples) == 3 * 256

    def test_output_passes_inspect(self, runner, device, tmp_path):
        out = tmp_path / "take.bdf"
        record = runner.invoke(
            main,
            ["record", "--patient", "P77", "--endpoint", device.endpoint,
             "--out", str(out)],
        )
        assert record.exit_code == 0
        inspect = runner.invoke(main, ["inspect", str(out)])
        assert inspect.exit_code == 0, inspect.output

    def test_dropping_simulator_yields_gap_annotations(self, runner, tmp_path):
        profile = builtin_profiles()["muse-like"]
        spec = SignalSpec.uniform(
            [Component("sine", 60.0, frequency=10.0)], profile.channel_count, seed=4
        )
        dev = run_virtual_device(
            profile, spec, FaultModel(drop_probability=0.3, seed=11),
            duration=2.0, pace=0.0,
        )
        try:
            out = tmp_path / "gappy.bdf"
            result = runner.invoke(
                main,
                ["record", "--patient", "P1", "--endpoint", dev.endpoint,
                 "--out", str(out)],
            )
            assert result.exit_code == 0, result.output
            assert "gaps" in result.output
            shown = runner.invoke(main, ["inspect", str(out), "--annotations"])
            assert shown.exit_code == 0
            assert "GAP" in shown.output
        finally:
            dev.stop()

    def test_nonexistent_endpoint_exits_one(self, runner, tmp_path):
        result = runner.invoke(
            main,
            ["record", "--patient", "P1", "--endpoint", "127.0.0.1:1",
             "--out", str(tmp_path / "x.bdf")],
        )
        assert result.exit_code == 1
        assert "cannot reach" in result.output


class TestScore:
    def write_pair(self, tmp_path, at_risk=0):
        qpath = tmp_path / "q.json"
        qpath.write_text(json.dumps(serialize_questionnaire(MCHAT)))
        answers = {i.link_id: (i.scoring == "at-risk-if-no") for i in MCHAT.items}
        for link_id in list(answers)[:at_risk]:
            answers[link_id] = not answers[link_id]
        response = build_response(MCHAT, answers, "P1", "2025-06-02T10:00:00Z")
        rpath = tmp_path / "r.json"
        rpath.write_text(json.dumps(serialize_response(response)))
        return qpath, rpath

    def test_all_pass_prints_low(self, runner, tmp_path):
        qpath, rpath = self.write_pair(tmp_path)
        result = runner.invoke(main, ["score", str(qpath), str(rpath)])
        assert result.exit_code == 0
        assert "score 0, LOW, rescreen-later" in result.output

    def test_nine_at_risk_prints_high_refer(self, runner, tmp_path):
        qpath, rpath = self.write_pair(tmp_path, at_risk=9)
        result = runner.invoke(main, ["score", str(qpath), str(rpath)])
        assert result.exit_code == 0
        assert "score 9, HIGH, refer" in result.output

    def test_malformed_response_lists_missing_items(self, runner, tmp_path):
        qpath, rpath = self.write_pair(tmp_path)
        doc = json.loads(rpath.read_text())
        doc["item"] = doc["item"][:-2]
        rpath.write_text(json.dumps(doc))
        result = runner.invoke(main, ["score", str(qpath), str(rpath)])
        assert result.exit_code == 1
        assert "q19" in result.output and "q20" in result.output


class TestUpload:
    @pytest.fixture()
    def live_gateway(self, tmp_path):
        import uvicorn

        from neurodeck.gateway import GatewayConfig, create_app

        config = GatewayConfig(
            data_dir=tmp_path / "gw", static_tokens={"tok": "op"}
        )
        server = uvicorn.Server(
            uvicorn.Config(
                create_app(config), host="127.0.0.1", port=0, log_level="error"
            )
        )
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        import time

        while not server.started:
            time.sleep(0.02)
        port = server.servers[0].sockets[0].getsockname()[1]
        yield f"http://127.0.0.1:{port}"
        server.should_exit = True
        thread.join(timeout=5)

    def test_upload_round_trip(self, runner, sample_file, live_gateway):
        import httpx

        created = httpx.post(
            f"{live_gateway}/patients",
            json={"name": "Kid"},
            headers={"Authorization": "Bearer tok"},
        ).json()
        result = runner.invoke(
            main,
            ["upload", str(sample_file), "--gateway", live_gateway,
             "--patient", created["patient_id"], "--token", "tok"],
        )
        assert result.exit_code == 0, result.output
        assert "uploaded as a-" in result.output

    def test_upload_without_token_fails(self, runner, sample_file):
        result = runner.invoke(
            main, ["upload", str(sample_file), "--patient", "p1"],
            env={"NEURODECK_TOKEN": ""},
        )
        assert result.exit_code == 1
        assert "no token" in result.output
