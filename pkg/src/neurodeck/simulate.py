"""Virtual EEG peripherals served over a local stream socket.

A device accepts one client, answers discovery with its service tree,
negotiates configuration, and on start pushes framed packets at the
configured rate. The fault model can drop packets, add latency, and take
the transport down on a schedule (times are in stream seconds, so runs
stay deterministic at any pacing).

Pacing runs in its own thread and never blocks control-message handling.
"""

from __future__ import annotations

import itertools
import json
import math
import random
import socket
import threading
import time
from dataclasses import dataclass, replace

from neurodeck import transport as tp
from neurodeck.protocol import (
    DeviceConfig,
    PeripheralProfile,
    ProtocolError,
    SampleFrame,
    negotiate_config,
    pack_frame,
    unpack_frame,
)
from neurodeck.signals import SignalSpec, generate_samples


class DeviceError(Exception):
    """Virtual device could not serve."""


@dataclass(frozen=True)
class DisconnectWindow:
    at: float  # stream seconds
    down_for: float

    def __post_init__(self) -> None:
        if self.at < 0 or self.down_for < 0:
            raise DeviceError("disconnect schedule times must be non-negative")

    def covers(self, t: float) -> bool:
        return self.at <= t < self.at + self.down_for


@dataclass(frozen=True)
class FaultModel:
    drop_probability: float = 0.0
    latency_ms: float = 0.0
    jitter_ms: float = 0.0
    disconnects: tuple[DisconnectWindow, ...] = ()
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.drop_probability <= 1.0:
            raise DeviceError(
                f"drop probability must be in [0, 1], got {self.drop_probability}"
            )
        if self.latency_ms < 0 or self.jitter_ms < 0:
            raise DeviceError("latency parameters must be non-negative")

    @classmethod
    def from_dict(cls, data: dict) -> "FaultModel":
        return cls(
            drop_probability=float(data.get("drop_probability", 0.0)),
            latency_ms=float(data.get("latency_ms", 0.0)),
            jitter_ms=float(data.get("jitter_ms", 0.0)),
            disconnects=tuple(
                DisconnectWindow(float(w["at"]), float(w["down_for"]))
                for w in data.get("disconnects", ())
            ),
            seed=int(data.get("seed", 0)),
        )


@dataclass
class DeviceStats:
    generated: int = 0
    delivered: int = 0

    def to_dict(self) -> dict:
        return {"generated": self.generated, "delivered": self.delivered}


class VirtualDevice:
    """One software peripheral bound to a local TCP endpoint."""

    def __init__(
        self,
        profile: PeripheralProfile,
        spec: SignalSpec,
        faults: FaultModel | None = None,
        *,
        host: str = "127.0.0.1",
        port: int = 0,
        duration: float | None = None,
        pace: float = 1.0,
        config: DeviceConfig | None = None,
    ):
        if len(spec.channels) != profile.channel_count:
            raise DeviceError(
                f"signal spec covers {len(spec.channels)} channels, "
                f"{profile.name} has {profile.channel_count}"
            )
        self.profile = profile
        self.spec = spec
        self.faults = faults or FaultModel()
        self.host = host
        self._requested_port = port
        self.duration = duration
        self.pace = pace
        self.stats = DeviceStats()
        self.error: str | None = None

        self._config = config or DeviceConfig.for_profile(profile)
        self._rng = random.Random(self.faults.seed)
        self._listener: socket.socket | None = None
        self._client: socket.socket | None = None
        self._lock = threading.Lock()
        self._send_lock = threading.Lock()
        self._shutdown = threading.Event()
        self._streaming = threading.Event()
        self._stopped_sent = False
        self._threads: list[threading.Thread] = []

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> "VirtualDevice":
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            listener.bind((self.host, self._requested_port))
        except OSError as exc:
            listener.close()
            raise DeviceError(f"endpoint {self.host}:{self._requested_port}: {exc}")
        listener.listen(4)
        listener.settimeout(0.1)
        self._listener = listener
        acceptor = threading.Thread(target=self._serve, daemon=True, name="device-accept")
        acceptor.start()
        self._threads.append(acceptor)
        return self

    @property
    def port(self) -> int:
        assert self._listener is not None, "device not started"
        return self._listener.getsockname()[1]

    @property
    def endpoint(self) -> str:
        return f"{self.host}:{self.port}"

    def stop(self) -> DeviceStats:
        self._shutdown.set()
        self._streaming.clear()
        self._drop_client()
        if self._listener is not None:
            self._listener.close()
        for thread in self._threads:
            thread.join(timeout=5.0)
        return self.stats

    def join(self, timeout: float | None = None) -> None:
        """Wait until a duration-bound stream has finished sending."""
        deadline = None if timeout is None else time.monotonic() + timeout
        while not self._stopped_sent and not self._shutdown.is_set():
            if deadline is not None and time.monotonic() > deadline:
                raise DeviceError("device did not finish in time")
            time.sleep(0.01)

    # -- connection handling -------------------------------------------------

    def _drop_client(self) -> None:
        with self._lock:
            client, self._client = self._client, None
        if client is not None:
            try:
                client.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            client.close()

    def _serve(self) -> None:
        while not self._shutdown.is_set():
            try:
                conn, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError as exc:
                if not self._shutdown.is_set():
                    self.error = f"listener failed: {exc}"
                break
            conn.settimeout(0.1)
            with self._lock:
                self._client = conn
            if self._stopped_sent:
                # stream ended while the transport was down; tell the newcomer
                try:
                    self._send_json(conn, tp.OP_STOPPED, self.stats.to_dict())
                except OSError:
                    pass
            self._converse(conn)
            if self._client is conn:
                self._drop_client()

    def _converse(self, conn: socket.socket) -> None:
        while not self._shutdown.is_set():
            if self._client is not conn:
                return  # replaced after a forced disconnect
            try:
                opcode, payload = tp.recv_message(conn)
            except socket.timeout:
                continue
            except (tp.TransportError, OSError):
                return
            try:
                self._dispatch(conn, opcode, payload)
            except (ProtocolError, tp.TransportError) as exc:
                self._send(conn, tp.OP_ERROR, str(exc).encode())

    def _dispatch(self, conn: socket.socket, opcode: int, payload: bytes) -> None:
        if opcode == tp.OP_DISCOVER:
            self._send_json(conn, tp.OP_PROFILE, self.profile.to_dict())
        elif opcode == tp.OP_CONFIGURE:
            requested = DeviceConfig.from_dict(tp.parse_json(payload))
            self._config = negotiate_config(requested, self.profile)
            self._send_json(conn, tp.OP_CONFIG_ACK, self._config.to_dict())
        elif opcode == tp.OP_START:
            self._send(conn, tp.OP_STARTED)  # ack first so no frame outruns it
            if not self._streaming.is_set():
                self._streaming.set()
                streamer = threading.Thread(
                    target=self._stream, daemon=True, name="device-stream"
                )
                streamer.start()
                self._threads.append(streamer)
        elif opcode == tp.OP_STOP:
            self._streaming.clear()
            self._announce_stopped()
        else:
            self._send(conn, tp.OP_ERROR, f"unknown opcode {opcode:#x}".encode())

    def _send(self, conn: socket.socket, opcode: int, payload: bytes = b"") -> None:
        with self._send_lock:
            tp.send_message(conn, opcode, payload)

    def _send_json(self, conn: socket.socket, opcode: int, obj) -> None:
        with self._send_lock:
            tp.send_json(conn, opcode, obj)

    def _announce_stopped(self) -> None:
        if self._stopped_sent:
            return
        self._stopped_sent = True
        with self._lock:
            conn = self._client
        if conn is not None:
            try:
                self._send_json(conn, tp.OP_STOPPED, self.stats.to_dict())
            except OSError:
                pass

    # -- streaming -----------------------------------------------------------

    def _frame(self, index: int) -> bytes:
        config = self._config
        spp = self.profile.samples_per_packet
        full = replace(config, active_channels=self.profile.electrode_labels)
        digital = generate_samples(self.spec, self.profile, full, index * spp, spp)
        clipped = bool(
            (digital <= self.profile.digital_min).any()
            or (digital >= self.profile.digital_max).any()
        )
        wire = digital + self.profile.wire_offset
        frame = SampleFrame(
            sequence=index % 65536,
            flags=0x01 if clipped else 0,
            samples=tuple(tuple(int(v) for v in row) for row in wire),
        )
        return pack_frame(frame, self.profile)

    def _stream(self) -> None:
        config = self._config
        spp = self.profile.samples_per_packet
        frame_seconds = spp / config.rate
        total = (
            None
            if self.duration is None
            else math.ceil(self.duration * config.rate / spp)
        )
        started = time.monotonic()
        for index in itertools.count():
            if self._shutdown.is_set() or not self._streaming.is_set():
                return
            if total is not None and index >= total:
                break
            stream_t = index * frame_seconds
            if self.pace > 0:
                target = started + stream_t * self.pace
                now = time.monotonic()
                if target > now:
                    time.sleep(target - now)
            data = self._frame(index)
            self.stats.generated += 1

            in_window = any(w.covers(stream_t) for w in self.faults.disconnects)
            dropped = (
                self.faults.drop_probability > 0
                and self._rng.random() < self.faults.drop_probability
            )
            delay = self.faults.latency_ms + self.faults.jitter_ms * self._rng.random()
            if in_window:
                self._drop_client()
                continue
            if dropped:
                continue
            if delay > 0 and self.pace > 0:
                time.sleep(delay / 1000.0 * self.pace)
            with self._lock:
                conn = self._client
            if conn is None:
                continue
            try:
                self._send(conn, tp.OP_DATA, data)
                self.stats.delivered += 1
            except OSError:
                self._drop_client()
        self._streaming.clear()
        self._announce_stopped()


def run_virtual_device(
    profile: PeripheralProfile,
    spec: SignalSpec,
    faults: FaultModel | None = None,
    *,
    host: str = "127.0.0.1",
    port: int = 0,
    duration: float | None = None,
    pace: float = 1.0,
    config: DeviceConfig | None = None,
) -> VirtualDevice:
    """Start a device and return its serving handle."""
    return VirtualDevice(
        profile,
        spec,
        faults,
        host=host,
        port=port,
        duration=duration,
        pace=pace,
        config=config,
    ).start()


# ---------------------------------------------------------------------------
# client


@dataclass(frozen=True)
class DeviceEvent:
    kind: str  # frame | stopped | lost | restored | failed
    frame: SampleFrame | None = None
    stats: dict | None = None
    reason: str | None = None


class DeviceClient:
    """Single-connection client with automatic reconnect during streaming."""

    def __init__(
        self,
        host: str,
        port: int,
        *,
        connect_timeout: float = 5.0,
        reconnect_timeout: float = 10.0,
        recv_timeout: float = 10.0,
    ):
        self.host = host
        self.port = port
        self.connect_timeout = connect_timeout
        self.reconnect_timeout = reconnect_timeout
        self.recv_timeout = recv_timeout
        self.profile: PeripheralProfile | None = None
        self._sock: socket.socket | None = None

    def connect(self) -> "DeviceClient":
        try:
            self._sock = socket.create_connection(
                (self.host, self.port), timeout=self.connect_timeout
            )
        except OSError as exc:
            raise DeviceError(f"cannot reach device at {self.host}:{self.port}: {exc}")
        self._sock.settimeout(self.recv_timeout)
        return self

    def close(self) -> None:
        if self._sock is not None:
            self._sock.close()
            self._sock = None

    def _request(self, opcode: int, payload: bytes, expect: int) -> bytes:
        assert self._sock is not None, "not connected"
        tp.send_message(self._sock, opcode, payload)
        while True:
            got, body = tp.recv_message(self._sock)
            if got == expect:
                return body
            if got == tp.OP_ERROR:
                raise DeviceError(body.decode("utf-8", "replace"))
            # stream chatter (frames in flight, a stopped notice pushed on
            # reconnect) may interleave with the reply; skip it
            if got not in (tp.OP_DATA, tp.OP_STOPPED):
                raise DeviceError(f"unexpected reply {got:#x} to {opcode:#x}")

    def discover(self) -> PeripheralProfile:
        body = self._request(tp.OP_DISCOVER, b"", tp.OP_PROFILE)
        self.profile = PeripheralProfile.from_dict(tp.parse_json(body))
        return self.profile

    def configure(self, requested: DeviceConfig) -> DeviceConfig:
        payload = json.dumps(requested.to_dict()).encode("utf-8")
        body = self._request(tp.OP_CONFIGURE, payload, tp.OP_CONFIG_ACK)
        return DeviceConfig.from_dict(tp.parse_json(body))

    def start(self) -> None:
        self._request(tp.OP_START, b"", tp.OP_STARTED)

    def request_stop(self) -> None:
        assert self._sock is not None, "not connected"
        tp.send_message(self._sock, tp.OP_STOP)

    def _reconnect(self) -> bool:
        deadline = time.monotonic() + self.reconnect_timeout
        while time.monotonic() < deadline:
            try:
                self._sock = socket.create_connection((self.host, self.port), timeout=0.5)
                self._sock.settimeout(self.recv_timeout)
                return True
            except OSError:
                time.sleep(0.01)
        return False

    def events(self):
        """Yield DeviceEvents until the device reports stopped or the link dies."""
        assert self.profile is not None, "discover() before streaming"
        while True:
            try:
                opcode, payload = tp.recv_message(self._sock)
            except socket.timeout:
                yield DeviceEvent("failed", reason="receive timeout")
                return
            except (tp.TransportClosed, OSError):
                yield DeviceEvent("lost")
                if self._reconnect():
                    yield DeviceEvent("restored")
                    continue
                yield DeviceEvent("failed", reason="reconnect timed out")
                return
            if opcode == tp.OP_DATA:
                yield DeviceEvent("frame", frame=unpack_frame(payload, self.profile))
            elif opcode == tp.OP_STOPPED:
                yield DeviceEvent("stopped", stats=tp.parse_json(payload))
                return
            elif opcode == tp.OP_ERROR:
                yield DeviceEvent("failed", reason=payload.decode("utf-8", "replace"))
                return
            # other control acks are ignored mid-stream
