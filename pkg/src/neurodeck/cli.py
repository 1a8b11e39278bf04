"""Operator command line: every workflow without the UI.

Exit codes are a stable scripting contract: 0 success, 1 validation or
runtime failure, 2 usage error (click's default).
"""

from __future__ import annotations

import datetime
import json
import sys
from pathlib import Path
from typing import NoReturn

import click
import httpx
import yaml

from neurodeck import edf
from neurodeck.protocol import DeviceConfig, builtin_profiles, get_profile, negotiate_config
from neurodeck.session import (
    PatientIdentity,
    RecordingSession,
    SessionError,
    SessionEvent,
    SessionState,
)
from neurodeck.screening import (
    ResponseError,
    ScreeningError,
    parse_questionnaire,
    parse_response,
    score_mchat,
    validate_response,
)
from neurodeck.signals import Component, SignalSpec
from neurodeck.simulate import (
    DeviceClient,
    DeviceError,
    DisconnectWindow,
    FaultModel,
    run_virtual_device,
)

DEFAULT_SPEC = [Component("sine", 60.0, frequency=10.0), Component("white-noise", 8.0)]


def fail(message: str) -> NoReturn:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def seed_option(fn):
    return click.option(
        "--seed", type=int, default=0, show_default=True,
        help="Seed for any randomness in this command.",
    )(fn)


def parse_endpoint(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise click.BadParameter(f"expected HOST:PORT, got {text!r}")
    return host, int(port)


@click.group()
def main():
    """Virtual EEG devices, recordings, screening, and the care gateway."""


# ---------------------------------------------------------------------------
# inspect / convert


def summarize(model: edf.SignalFile) -> dict:
    return {
        "format": model.header.format.value,
        "continuity": model.header.continuity.value,
        "patient_id": model.header.patient_id,
        "recording_id": model.header.recording_id,
        "start": f"{model.header.start_date} {model.header.start_time}",
        "records": model.header.record_count,
        "record_duration": model.header.record_duration,
        "duration_seconds": model.duration_seconds,
        "signals": [
            {
                "label": s.header.label,
                "samples_per_record": s.header.samples_per_record,
                "rate": s.header.samples_per_record / model.header.record_duration,
                "physical": [s.header.physical_min, s.header.physical_max],
                "digital": [s.header.digital_min, s.header.digital_max],
                "dimension": s.header.physical_dimension,
            }
            for s in model.signals
        ],
        "annotation_count": len(model.annotations),
    }


@main.command()
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True, help="Machine-readable summary.")
@click.option("--annotations", "show_annotations", is_flag=True, help="List annotations.")
@seed_option
def inspect(path, as_json, show_annotations, seed):
    """Print a file's header, signals, duration, and annotation count."""
    try:
        model = edf.decode_file(Path(path).read_bytes())
    except edf.DecodeError as exc:
        fail(str(exc))
    report = edf.validate(model)
    info = summarize(model)
    if show_annotations:
        info["annotations"] = [
            {"onset": a.onset, "duration": a.duration, "texts": list(a.texts)}
            for a in model.annotations
        ]
    if not report.ok:
        info["findings"] = [str(f) for f in report.findings]
    if as_json:
        click.echo(json.dumps(info, indent=2))
    else:
        hdr = model.header
        click.echo(f"{hdr.format.value.upper()} ({hdr.continuity.value}), "
                   f"{info['records']} records x {info['record_duration']} s "
                   f"= {info['duration_seconds']} s")
        click.echo(f"patient:   {hdr.patient_id}")
        click.echo(f"recording: {hdr.recording_id}")
        for sig in info["signals"]:
            click.echo(
                f"  {sig['label']:<16} {sig['rate']:g} Hz  "
                f"phys [{sig['physical'][0]}, {sig['physical'][1]}] {sig['dimension']}  "
                f"dig [{sig['digital'][0]}, {sig['digital'][1]}]"
            )
        click.echo(f"annotations: {info['annotation_count']}")
        if show_annotations:
            for ann in model.annotations:
                dur = f" for {ann.duration:g} s" if ann.duration is not None else ""
                click.echo(f"  +{ann.onset:g}s{dur}: {'|'.join(ann.texts)}")
        for finding in info.get("findings", []):
            click.echo(f"finding: {finding}", err=True)
    sys.exit(0 if report.ok else 1)


@main.command()
@click.argument("src", type=click.Path(exists=True, dir_okay=False))
@click.argument("dst", type=click.Path(dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["edf", "bdf"]), default=None,
              help="Target container (default: keep).")
@click.option("--anonymize", is_flag=True, help="Blank the patient name and birthdate.")
@seed_option
def convert(src, dst, fmt, anonymize, seed):
    """Re-encode a file, optionally changing container or anonymizing."""
    try:
        model = edf.decode_file(Path(src).read_bytes())
    except edf.DecodeError as exc:
        fail(str(exc))
    if fmt is not None:
        model.header.format = edf.FileFormat(fmt)
    if anonymize:
        parts = model.header.patient_id.split(" ")
        model.header.patient_id = edf.format_patient_field(
            code=parts[0] if parts else None,
            sex=parts[1] if len(parts) > 1 else None,
            anonymize=True,
        )
    try:
        Path(dst).write_bytes(edf.encode_file(model))
    except edf.EncodeError as exc:
        fail(str(exc))
    click.echo(f"wrote {dst}")


# ---------------------------------------------------------------------------
# simulate


def build_faults(drop, latency, jitter, disconnects, seed) -> FaultModel:
    windows = []
    for spec in disconnects:
        at, _, down = spec.partition(":")
        try:
            windows.append(DisconnectWindow(float(at), float(down)))
        except ValueError:
            raise click.BadParameter(f"expected AT:DOWN_FOR seconds, got {spec!r}")
    return FaultModel(
        drop_probability=drop,
        latency_ms=latency,
        jitter_ms=jitter,
        disconnects=tuple(windows),
        seed=seed,
    )


@main.command()
@click.option("--profile", "profile_name", default="muse-like", show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=7380, show_default=True)
@click.option("--rate", type=int, default=None, help="Requested sample rate (negotiated).")
@click.option("--duration", type=float, default=None, help="Stop after this many stream seconds.")
@click.option("--pace", type=float, default=1.0, show_default=True,
              help="Wall seconds per stream second (0 = unthrottled).")
@click.option("--drop", type=float, default=0.0, show_default=True)
@click.option("--latency", type=float, default=0.0, help="Base latency in ms.")
@click.option("--jitter", type=float, default=0.0, help="Latency jitter in ms.")
@click.option("--disconnect", "disconnects", multiple=True, metavar="AT:DOWN_FOR",
              help="Take the transport down at AT for DOWN_FOR stream seconds.")
@click.option("--scenario", type=click.Path(exists=True, dir_okay=False),
              help="YAML scenario overriding the flags.")
@seed_option
def simulate(profile_name, host, port, rate, duration, pace, drop, latency, jitter,
             disconnects, scenario, seed):
    """Serve a virtual EEG device until its stream ends (or Ctrl-C)."""
    spec_dict = None
    if scenario:
        raw = yaml.safe_load(Path(scenario).read_text()) or {}
        profile_name = raw.get("profile", profile_name)
        rate = raw.get("rate", rate)
        duration = raw.get("duration", duration)
        pace = raw.get("pace", pace)
        port = raw.get("port", port)
        spec_dict = raw.get("spec")
        if "faults" in raw:
            faults = FaultModel.from_dict({"seed": seed, **raw["faults"]})
        else:
            faults = build_faults(drop, latency, jitter, disconnects, seed)
    else:
        faults = build_faults(drop, latency, jitter, disconnects, seed)

    try:
        profile = get_profile(profile_name)
    except Exception as exc:
        fail(str(exc))
    spec = (
        SignalSpec.from_dict(spec_dict, profile.channel_count)
        if spec_dict
        else SignalSpec.uniform(DEFAULT_SPEC, profile.channel_count, seed=seed)
    )
    config = DeviceConfig.for_profile(profile)
    if rate is not None:
        config = negotiate_config(DeviceConfig.for_profile(profile, rate=rate), profile)
        if config.rate != rate:
            click.echo(f"rate {rate} Hz unsupported on {profile.name}; "
                       f"serving {config.rate} Hz")
    try:
        device = run_virtual_device(
            profile, spec, faults,
            host=host, port=port, duration=duration, pace=pace, config=config,
        )
    except DeviceError as exc:
        fail(str(exc))
    click.echo(f"serving {profile.name} at {device.endpoint} "
               f"({config.rate} Hz, {profile.channel_count} channels)")
    try:
        if duration is not None:
            device.join(timeout=None)
        else:
            while True:
                import time

                time.sleep(0.5)
    except KeyboardInterrupt:
        pass
    finally:
        stats = device.stop()
    click.echo(f"frames generated: {stats.generated}, delivered: {stats.delivered}")


# ---------------------------------------------------------------------------
# record


@main.command()
@click.option("--patient", "patient_code", required=True, help="Patient identifier.")
@click.option("--patient-name", default=None)
@click.option("--sex", default=None)
@click.option("--birthdate", default=None, help="ISO date.")
@click.option("--endpoint", default="127.0.0.1:7380", show_default=True)
@click.option("--duration", type=float, default=None,
              help="Stop after this many stream seconds (default: when the device stops).")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--format", "fmt", type=click.Choice(["bdf", "edf"]), default="bdf",
              show_default=True)
@click.option("--rate", type=int, default=None)
@click.option("--channels", default=None, help="Comma-separated electrode labels.")
@click.option("--anonymize", is_flag=True)
@seed_option
def record(patient_code, patient_name, sex, birthdate, endpoint, duration, out_path,
           fmt, rate, channels, anonymize, seed):
    """Drive a full recording session headlessly and write the file."""
    host, port = parse_endpoint(endpoint)
    try:
        client = DeviceClient(host, port).connect()
    except DeviceError as exc:
        fail(str(exc))
    try:
        profile = client.discover()
        wanted = DeviceConfig(
            rate=rate or min(profile.supported_rates),
            resolution_bits=profile.resolution_bits,
            active_channels=(
                tuple(c.strip() for c in channels.split(",")) if channels
                else profile.electrode_labels
            ),
        )
        config = client.configure(negotiate_config(wanted, profile))
        patient = PatientIdentity(
            code=patient_code,
            name=patient_name,
            sex=sex,
            birthdate=datetime.date.fromisoformat(birthdate) if birthdate else None,
        )
        session = RecordingSession(
            f"cli-{seed}", patient, profile, config, anonymize=anonymize
        )
        session.advance(SessionEvent.DEVICE_CONNECTED)
        session.advance(SessionEvent.SENSOR_MOUNTED)
        session.advance(SessionEvent.START_RECORDING)
        client.start()
        target = None if duration is None else int(duration * config.rate)
        stop_sent = False
        for event in client.events():
            if event.kind == "frame":
                if session.state is SessionState.RECONNECTING:
                    session.advance(SessionEvent.TRANSPORT_RESTORED)
                session.ingest_frame(event.frame)
                if target is not None and session.stream_samples >= target and not stop_sent:
                    stop_sent = True
                    client.request_stop()
            elif event.kind == "lost" and session.state is SessionState.RECORDING:
                session.advance(SessionEvent.TRANSPORT_LOST)
                click.echo("transport lost; reconnecting...", err=True)
            elif event.kind == "restored" and session.state is SessionState.RECONNECTING:
                session.advance(SessionEvent.TRANSPORT_RESTORED)
                click.echo("transport restored", err=True)
            elif event.kind == "stopped":
                break
            elif event.kind == "failed":
                fail(f"device stream failed: {event.reason}")
        if session.state is SessionState.RECONNECTING:
            session.advance(SessionEvent.TRANSPORT_RESTORED)
        session.advance(SessionEvent.STOP_RECORDING)
        data, metadata = session.finalize(file_format=edf.FileFormat(fmt))
    except (DeviceError, SessionError) as exc:
        fail(str(exc))
    finally:
        client.close()
    Path(out_path).write_bytes(data)
    click.echo(f"wrote {out_path}: {metadata['records']} records, "
               f"{metadata['received_samples']} samples/channel received, "
               f"{metadata['missing_samples']} missing "
               f"({metadata['gap_count']} gaps, {metadata['gap_seconds']:.3f} s)")
    by_kind: dict[str, int] = {}
    for qc in metadata["quality_events"]:
        by_kind[qc["kind"]] = by_kind.get(qc["kind"], 0) + 1
    summary = ", ".join(f"{kind}: {count}" for kind, count in sorted(by_kind.items()))
    click.echo(f"quality events: {summary or 'none'}")


# ---------------------------------------------------------------------------
# score


@main.command()
@click.argument("questionnaire", type=click.Path(exists=True, dir_okay=False))
@click.argument("response", type=click.Path(exists=True, dir_okay=False))
@click.option("--stage", type=click.Choice(["initial", "follow-up"]), default="initial",
              show_default=True)
@click.option("--json", "as_json", is_flag=True)
@seed_option
def score(questionnaire, response, stage, as_json, seed):
    """Score a captured response against its questionnaire."""
    try:
        model = parse_questionnaire(json.loads(Path(questionnaire).read_text()))
        doc = parse_response(json.loads(Path(response).read_text()))
        validate_response(model, doc)
        result = score_mchat(model, doc, stage=stage)
    except (ScreeningError, ResponseError, json.JSONDecodeError) as exc:
        fail(str(exc))
    if as_json:
        click.echo(json.dumps(result.to_dict(), indent=2))
    else:
        click.echo(f"score {result.score}, {result.tier.upper()}, {result.action}")


# ---------------------------------------------------------------------------
# serve / upload


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="Gateway YAML config.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8077, show_default=True)
@click.option("--data-dir", default="gateway-data", show_default=True)
@click.option("--token", "tokens", multiple=True, metavar="TOKEN:PROVIDER",
              help="Static bearer token (repeatable).")
@seed_option
def serve(config_path, host, port, data_dir, tokens, seed):
    """Run the care gateway."""
    import uvicorn

    from neurodeck.gateway import GatewayConfig, create_app, load_config

    if config_path:
        config = load_config(config_path)
    else:
        static = {}
        for raw in tokens:
            token, _, provider = raw.partition(":")
            static[token] = provider or "operator"
        config = GatewayConfig(data_dir=Path(data_dir), static_tokens=static)
    if not config.static_tokens and not config.providers:
        fail("no credentials configured; pass --token or a config file")
    app = create_app(config)
    click.echo(f"gateway on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command()
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--gateway", default="http://127.0.0.1:8077", show_default=True)
@click.option("--patient", "patient_id", required=True)
@click.option("--token", envvar="NEURODECK_TOKEN",
              help="Bearer token (or set NEURODECK_TOKEN).")
@seed_option
def upload(path, gateway, patient_id, token, seed):
    """Upload a recording to the gateway, linked to a patient."""
    if not token:
        fail("no token: pass --token or set NEURODECK_TOKEN")
    content = Path(path).read_bytes()
    try:
        reply = httpx.post(
            f"{gateway}/patients/{patient_id}/recordings",
            content=content,
            headers={"Authorization": f"Bearer {token}",
                     "Content-Type": "application/octet-stream"},
            timeout=30.0,
        )
    except httpx.HTTPError as exc:
        fail(f"gateway unreachable: {exc}")
    if reply.status_code != 201:
        fail(f"upload rejected ({reply.status_code}): {reply.text}")
    artifact = reply.json()
    click.echo(f"uploaded as {artifact['artifact_id']} "
               f"(sha256 {artifact['content_hash'][:12]}..., {artifact['byte_size']} bytes)")


if __name__ == "__main__":
    main()
