"""Gateway-hosted recording sessions bridging devices to live subscribers.

Each live session drives one device client on a worker thread, feeds a
RecordingSession, and fans decimated view frames, quality events, and
state changes out to subscriber queues (consumed by the live-stream
endpoint). View frames are rate-limited server-side so browsers never see
raw full-rate samples.
"""

from __future__ import annotations

import queue
import threading
import uuid
from dataclasses import dataclass

from neurodeck.protocol import DeviceConfig, negotiate_config
from neurodeck.session import (
    PatientIdentity,
    RecordingSession,
    SessionError,
    SessionEvent,
    SessionState,
)
from neurodeck.simulate import DeviceClient, DeviceError


@dataclass(frozen=True)
class SessionRequest:
    patient: PatientIdentity
    host: str
    port: int
    rate: int | None = None
    channels: tuple[str, ...] = ()
    duration: float | None = None  # stop automatically after this many stream seconds
    anonymize: bool = False


class LiveSession:
    """One gateway-side recording: device thread plus subscriber fan-out."""

    VIEW_INTERVAL_S = 0.2  # at most 5 view frames per second
    VIEW_WINDOW_S = 2.0
    VIEW_POINTS = 64

    def __init__(self, request: SessionRequest, on_complete=None):
        self.id = f"s-{uuid.uuid4().hex[:12]}"
        self.request = request
        self.error: str | None = None
        self.artifact_id: str | None = None
        self.result_metadata: dict | None = None
        self._on_complete = on_complete
        self._subscribers: list[queue.Queue] = []
        self._subscriber_lock = threading.Lock()
        self._stop_requested = threading.Event()
        self._client: DeviceClient | None = None
        self._thread: threading.Thread | None = None
        self.session: RecordingSession | None = None

    # -- fan-out --------------------------------------------------------------

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue(maxsize=256)
        with self._subscriber_lock:
            self._subscribers.append(q)
        q.put({"type": "state", "state": self.state})
        if self._thread is not None and not self._thread.is_alive():
            if self.artifact_id is not None:
                q.put({"type": "complete", "artifact_id": self.artifact_id})
            q.put(None)  # stream already over
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self._subscriber_lock:
            if q in self._subscribers:
                self._subscribers.remove(q)

    def _publish(self, message: dict) -> None:
        with self._subscriber_lock:
            listeners = list(self._subscribers)
        for q in listeners:
            try:
                q.put_nowait(message)
            except queue.Full:
                pass  # slow consumer loses view frames, never blocks ingest

    @property
    def state(self) -> str:
        if self.session is None:
            return "starting" if self.error is None else "aborted"
        return self.session.state.value

    def status(self) -> dict:
        out = {
            "session_id": self.id,
            "state": self.state,
            "patient": self.request.patient.code,
            "error": self.error,
            "artifact_id": self.artifact_id,
        }
        if self.session is not None:
            out.update(
                received_samples=self.session.received_samples,
                missing_samples=self.session.missing_samples,
                gap_count=len(self.session.gap_log),
                quality_event_count=len(self.session.quality_events),
            )
        return out

    # -- lifecycle --------------------------------------------------------------

    def start(self) -> "LiveSession":
        self._thread = threading.Thread(
            target=self._run, daemon=True, name=f"live-{self.id}"
        )
        self._thread.start()
        return self

    def request_stop(self) -> None:
        self._stop_requested.set()
        client = self._client
        if client is not None:
            try:
                client.request_stop()
            except OSError:
                pass

    def wait(self, timeout: float | None = None) -> None:
        assert self._thread is not None
        self._thread.join(timeout)

    def _advance(self, event: SessionEvent) -> None:
        assert self.session is not None
        self.session.advance(event)
        self._publish({"type": "state", "state": self.session.state.value})

    def _run(self) -> None:
        request = self.request
        try:
            client = DeviceClient(request.host, request.port).connect()
        except DeviceError as exc:
            self.error = str(exc)
            self._publish({"type": "error", "message": self.error})
            self._publish(None)
            return
        self._client = client
        try:
            profile = client.discover()
            requested = DeviceConfig(
                rate=request.rate or min(profile.supported_rates),
                resolution_bits=profile.resolution_bits,
                active_channels=request.channels or profile.electrode_labels,
            )
            config = client.configure(negotiate_config(requested, profile))
            self.session = RecordingSession(
                self.id, request.patient, profile, config, anonymize=request.anonymize
            )
            self._advance(SessionEvent.DEVICE_CONNECTED)
            self._advance(SessionEvent.SENSOR_MOUNTED)
            self._advance(SessionEvent.START_RECORDING)
            client.start()
            self._consume(client, config)
        except (DeviceError, SessionError) as exc:
            self.error = str(exc)
            if self.session is not None and self.session.state not in (
                SessionState.COMPLETE,
                SessionState.ABORTED,
            ):
                self.session.abort(self.error)
            self._publish({"type": "error", "message": self.error})
        finally:
            client.close()
            self._publish(None)  # sentinel: stream over

    def _consume(self, client: DeviceClient, config: DeviceConfig) -> None:
        session = self.session
        assert session is not None
        next_view_at = 0.0
        target_samples = (
            None
            if self.request.duration is None
            else int(self.request.duration * config.rate)
        )
        for event in client.events():
            if event.kind == "frame":
                if session.state is SessionState.RECONNECTING:
                    self._advance(SessionEvent.TRANSPORT_RESTORED)
                quality = session.ingest_frame(event.frame)
                for qc in quality:
                    self._publish({"type": "quality", "event": qc.to_dict()})
                stream_s = session.stream_samples / config.rate
                if stream_s >= next_view_at:
                    next_view_at = stream_s + self.VIEW_INTERVAL_S
                    self._publish(
                        {
                            "type": "view",
                            "t": stream_s,
                            "channels": {
                                label: [[lo, hi] for lo, hi in pairs]
                                for label, pairs in session.view(
                                    self.VIEW_WINDOW_S, self.VIEW_POINTS
                                ).items()
                            },
                        }
                    )
                if target_samples is not None and session.stream_samples >= target_samples:
                    if not self._stop_requested.is_set():
                        self._stop_requested.set()
                        client.request_stop()
            elif event.kind == "lost":
                if session.state is SessionState.RECORDING:
                    self._advance(SessionEvent.TRANSPORT_LOST)
            elif event.kind == "restored":
                if session.state is SessionState.RECONNECTING:
                    self._advance(SessionEvent.TRANSPORT_RESTORED)
            elif event.kind == "stopped":
                break
            elif event.kind == "failed":
                raise DeviceError(event.reason or "device stream failed")
        if session.state is SessionState.RECONNECTING:
            self._advance(SessionEvent.TRANSPORT_RESTORED)
        self._advance(SessionEvent.STOP_RECORDING)
        data, metadata = session.finalize()
        self.result_metadata = metadata
        self._publish({"type": "state", "state": session.state.value})
        if self._on_complete is not None:
            self.artifact_id = self._on_complete(self, data, metadata)
            self._publish({"type": "complete", "artifact_id": self.artifact_id})


class SessionManager:
    def __init__(self):
        self._sessions: dict[str, LiveSession] = {}
        self._lock = threading.Lock()

    def create(self, request: SessionRequest, on_complete=None) -> LiveSession:
        live = LiveSession(request, on_complete=on_complete).start()
        with self._lock:
            self._sessions[live.id] = live
        return live

    def get(self, session_id: str) -> LiveSession | None:
        with self._lock:
            return self._sessions.get(session_id)

    def all(self) -> list[LiveSession]:
        with self._lock:
            return list(self._sessions.values())
