"""Recording sessions: workflow state machine, ingest, quality, finalize.

A session walks Idle -> Connected -> Mounted -> Recording
(-> Reconnecting -> Recording)* -> Finalizing -> Complete, with Aborted
reachable from any non-Complete state. Frames are ingested by exactly one
writer; any number of readers may take decimated view snapshots
concurrently. Finalize writes a BDF+ (or EDF+) file in which transport
gaps are zero-filled and annotated, so records stay rectangular and the
continuity flag stays +C.
"""

from __future__ import annotations

import datetime
import math
import threading
from dataclasses import dataclass
from enum import Enum

import numpy as np

from neurodeck import edf
from neurodeck.protocol import (
    FLAG_ARTIFACT,
    DeviceConfig,
    PeripheralProfile,
    SampleFrame,
    SEQUENCE_MODULUS,
)


class SessionError(Exception):
    """Session operation violates its contract."""


class TransitionError(SessionError):
    """Event is not legal in the current state."""

    def __init__(self, state: "SessionState", event: "SessionEvent"):
        super().__init__(f"event {event.value!r} is illegal in state {state.value!r}")
        self.state = state
        self.event = event


class SessionState(Enum):
    IDLE = "idle"
    CONNECTED = "connected"
    MOUNTED = "mounted"
    RECORDING = "recording"
    RECONNECTING = "reconnecting"
    FINALIZING = "finalizing"
    COMPLETE = "complete"
    ABORTED = "aborted"


class SessionEvent(Enum):
    DEVICE_CONNECTED = "device-connected"
    SENSOR_MOUNTED = "sensor-mounted"
    START_RECORDING = "start-recording"
    TRANSPORT_LOST = "transport-lost"
    TRANSPORT_RESTORED = "transport-restored"
    STOP_RECORDING = "stop-recording"
    FINALIZED = "finalized"
    ABORT = "abort"


_TRANSITIONS: dict[tuple[SessionState, SessionEvent], SessionState] = {
    (SessionState.IDLE, SessionEvent.DEVICE_CONNECTED): SessionState.CONNECTED,
    (SessionState.CONNECTED, SessionEvent.SENSOR_MOUNTED): SessionState.MOUNTED,
    (SessionState.MOUNTED, SessionEvent.START_RECORDING): SessionState.RECORDING,
    (SessionState.RECORDING, SessionEvent.TRANSPORT_LOST): SessionState.RECONNECTING,
    (SessionState.RECONNECTING, SessionEvent.TRANSPORT_RESTORED): SessionState.RECORDING,
    (SessionState.RECORDING, SessionEvent.STOP_RECORDING): SessionState.FINALIZING,
    (SessionState.FINALIZING, SessionEvent.FINALIZED): SessionState.COMPLETE,
}

for _state in SessionState:
    if _state not in (SessionState.COMPLETE, SessionState.ABORTED):
        _TRANSITIONS[(_state, SessionEvent.ABORT)] = SessionState.ABORTED


@dataclass(frozen=True)
class PatientIdentity:
    """What the EDF+ patient field needs; unknown parts stay None."""

    code: str
    name: str | None = None
    sex: str | None = None
    birthdate: datetime.date | None = None


@dataclass
class QualityEvent:
    channel: str  # electrode label, or "all" for channel-independent events
    kind: str  # flatline | clipping | out-of-range-rms | gap
    onset: float  # stream seconds
    duration: float
    severity: str  # info | warn | bad

    def to_dict(self) -> dict:
        return {
            "channel": self.channel,
            "kind": self.kind,
            "onset": self.onset,
            "duration": self.duration,
            "severity": self.severity,
        }


@dataclass(frozen=True)
class QualityConfig:
    flatline_peak_to_peak: int = 1  # digital units over one window
    clipping_run: int = 32  # consecutive rail samples
    rms_bounds: tuple[float, float] = (0.5, 300.0)  # uV
    window_seconds: float = 1.0


def decimate_minmax(values: np.ndarray, buckets: int) -> list[tuple[float, float]]:
    """Split values into buckets and keep each bucket's (min, max) envelope.

    The global extremes always survive. Empty input gives an empty list;
    buckets beyond the sample count collapse to one pair per sample.
    """
    length = len(values)
    if length == 0 or buckets < 1:
        return []
    pairs: list[tuple[float, float]] = []
    for i in range(buckets):
        lo = (i * length) // buckets
        hi = ((i + 1) * length) // buckets
        if hi > lo:
            chunk = values[lo:hi]
            pairs.append((float(chunk.min()), float(chunk.max())))
    return pairs


class RecordingSession:
    """One patient/device recording driven by a single ingestion writer."""

    def __init__(
        self,
        session_id: str,
        patient: PatientIdentity,
        profile: PeripheralProfile,
        config: DeviceConfig,
        *,
        quality: QualityConfig = QualityConfig(),
        buffer_seconds: float = 600.0,
        anonymize: bool = False,
        clock=datetime.datetime.now,
    ):
        unknown = set(config.active_channels) - set(profile.electrode_labels)
        if unknown:
            raise SessionError(f"channels {sorted(unknown)} not on {profile.name}")
        self.session_id = session_id
        self.patient = patient
        self.profile = profile
        self.config = config
        self.quality = quality
        self.anonymize = anonymize
        self._clock = clock

        self.state = SessionState.IDLE
        self.started_at: datetime.datetime | None = None
        self.gap_log: list[tuple[float, float]] = []
        self.quality_events: list[QualityEvent] = []
        self.diagnostic: str | None = None
        self.artifact_frames = 0

        self._rate = config.rate
        self._spp = profile.samples_per_packet
        self._rows = [profile.electrode_labels.index(c) for c in config.active_channels]
        capacity = int(buffer_seconds * self._rate)
        self._buffer = np.zeros((len(self._rows), capacity), dtype=np.int32)
        self._written = 0  # received samples per channel
        self._frames_received = 0
        self._frames_accounted = 0  # received + known-missing
        self._anchors: list[tuple[int, int]] = [(0, 0)]  # (buffer pos, stream pos)
        self._window_done = 0
        self._clip_runs = [(0, 0)] * len(self._rows)  # (rail value, run length) carry
        self._lock = threading.Lock()

    # -- state machine -------------------------------------------------------

    def advance(self, event: SessionEvent) -> "RecordingSession":
        target = _TRANSITIONS.get((self.state, event))
        if target is None:
            raise TransitionError(self.state, event)
        if event is SessionEvent.START_RECORDING:
            self.started_at = self._clock()
        self.state = target
        return self

    def abort(self, reason: str) -> None:
        self.diagnostic = reason
        if self.state not in (SessionState.COMPLETE, SessionState.ABORTED):
            self.advance(SessionEvent.ABORT)

    # -- ingest ----------------------------------------------------------------

    @property
    def received_samples(self) -> int:
        return self._written

    @property
    def missing_samples(self) -> int:
        return (self._frames_accounted - self._frames_received) * self._spp

    @property
    def stream_samples(self) -> int:
        """Received plus known-missing samples per channel."""
        return self._frames_accounted * self._spp

    def ingest_frame(self, frame: SampleFrame) -> list[QualityEvent]:
        if self.state is not SessionState.RECORDING:
            raise SessionError(f"cannot ingest in state {self.state.value!r}")
        if len(frame.samples) != self.profile.channel_count or any(
            len(ch) != self._spp for ch in frame.samples
        ):
            raise SessionError(
                f"frame shape {len(frame.samples)}x"
                f"{len(frame.samples[0]) if frame.samples else 0} does not match "
                f"{self.profile.channel_count}x{self._spp}"
            )
        emitted: list[QualityEvent] = []
        with self._lock:
            expected = self._frames_accounted % SEQUENCE_MODULUS
            missing = (frame.sequence - expected) % SEQUENCE_MODULUS
            if missing:
                onset = self._frames_accounted * self._spp / self._rate
                duration = missing * self._spp / self._rate
                self.gap_log.append((onset, duration))
                self._frames_accounted += missing
                self._anchors.append((self._written, self._frames_accounted * self._spp))
                emitted.append(QualityEvent("all", "gap", onset, duration, "warn"))
            if self._written + self._spp > self._buffer.shape[1]:
                self.abort("ring buffer overflow: recording exceeds configured capacity")
                raise SessionError(self.diagnostic)
            block = np.asarray(frame.samples, dtype=np.int32)[self._rows]
            block -= self.profile.wire_offset
            self._buffer[:, self._written : self._written + self._spp] = block
            self._written += self._spp
            self._frames_received += 1
            self._frames_accounted += 1
            if frame.flags & FLAG_ARTIFACT:
                self.artifact_frames += 1
            emitted.extend(self._run_detectors())
            self.quality_events.extend(emitted)
        return emitted

    def _stream_pos(self, buffer_pos: int) -> int:
        anchor_buf, anchor_stream = self._anchors[0]
        for buf, stream in self._anchors:
            if buf > buffer_pos:
                break
            anchor_buf, anchor_stream = buf, stream
        return anchor_stream + (buffer_pos - anchor_buf)

    def _run_detectors(self) -> list[QualityEvent]:
        window = int(self.quality.window_seconds * self._rate)
        events: list[QualityEvent] = []
        gain, offset = edf.calibration_gain_offset(self.profile.calibration("X", 1))
        while self._written - self._window_done >= window:
            start = self._window_done
            onset = self._stream_pos(start) / self._rate
            chunk = self._buffer[:, start : start + window]
            for row, label in enumerate(self.config.active_channels):
                samples = chunk[row]
                if int(samples.max()) - int(samples.min()) < self.quality.flatline_peak_to_peak:
                    events.append(
                        QualityEvent(label, "flatline", onset, self.quality.window_seconds, "bad")
                    )
                clip = self._clipping_run(row, samples)
                if clip:
                    events.append(
                        QualityEvent(label, "clipping", onset, self.quality.window_seconds, "bad")
                    )
                physical = samples * gain + offset
                rms = float(np.sqrt(np.mean(physical**2)))
                lo, hi = self.quality.rms_bounds
                if not lo <= rms <= hi:
                    events.append(
                        QualityEvent(
                            label, "out-of-range-rms", onset, self.quality.window_seconds, "warn"
                        )
                    )
            self._window_done += window
        return self._coalesce(events)

    def _clipping_run(self, row: int, samples: np.ndarray) -> bool:
        rail_lo, rail_hi = self.profile.digital_min, self.profile.digital_max
        value, run = self._clip_runs[row]
        longest = 0
        for s in samples.tolist():
            if s in (rail_lo, rail_hi):
                run = run + 1 if s == value else 1
                value = s
                longest = max(longest, run)
            else:
                value, run = 0, 0
        self._clip_runs[row] = (value, run)
        return longest >= self.quality.clipping_run

    def _coalesce(self, events: list[QualityEvent]) -> list[QualityEvent]:
        fresh: list[QualityEvent] = []
        for event in events:
            last = next(
                (
                    e
                    for e in reversed(self.quality_events)
                    if e.channel == event.channel and e.kind == event.kind
                ),
                None,
            )
            if last is not None and math.isclose(last.onset + last.duration, event.onset):
                last.duration += event.duration
            else:
                fresh.append(event)
        return fresh

    # -- live view ---------------------------------------------------------------

    def view(self, window_seconds: float, points: int) -> dict[str, list[tuple[float, float]]]:
        """Per-channel (min, max) envelope of the last window, in physical units."""
        with self._lock:
            span = min(self._written, int(window_seconds * self._rate))
            snapshot = self._buffer[:, self._written - span : self._written].copy()
        cal = self.profile.calibration("X", 1)
        out: dict[str, list[tuple[float, float]]] = {}
        for row, label in enumerate(self.config.active_channels):
            physical = edf.dig_to_phys_array(snapshot[row], cal)
            out[label] = decimate_minmax(physical, points)
        return out

    # -- finalize ----------------------------------------------------------------

    def _annotation_sizing(self, annotations: list[edf.Annotation], records: int) -> int:
        by_record: dict[int, int] = {}
        for ann in annotations:
            r = min(max(int(ann.onset), 0), records - 1)  # 1 s records
            by_record[r] = by_record.get(r, 0) + len(edf.encode_tal([ann]))
        keeper = max(len(edf.encode_tal([edf.Annotation(float(r))])) for r in range(records))
        heaviest = keeper + max(by_record.values(), default=0)
        width = 3 if self.profile.resolution_bits > 12 else 2
        return max(20, -(-heaviest // width))

    def finalize(
        self, file_format: edf.FileFormat = edf.FileFormat.BDF
    ) -> tuple[bytes, dict]:
        if self.state is not SessionState.FINALIZING:
            raise SessionError(f"cannot finalize in state {self.state.value!r}")
        if self._written == 0:
            raise SessionError("zero recorded samples")
        if file_format is edf.FileFormat.EDF and self.profile.resolution_bits > 16:
            raise SessionError(
                f"{self.profile.resolution_bits}-bit samples do not fit EDF; use BDF"
            )

        with self._lock:
            timeline = self._frames_accounted * self._spp
            records = -(-timeline // self._rate)
            total = records * self._rate
            full = np.zeros((len(self._rows), total), dtype=np.int32)
            for i, (buf, stream) in enumerate(self._anchors):
                end_buf = (
                    self._anchors[i + 1][0] if i + 1 < len(self._anchors) else self._written
                )
                full[:, stream : stream + (end_buf - buf)] = self._buffer[:, buf:end_buf]
            gap_log = list(self.gap_log)
            events = [QualityEvent(**e.to_dict()) for e in self.quality_events]
            tail_pad = total - timeline

        annotations = [
            edf.Annotation(onset, duration, ("GAP",)) for onset, duration in gap_log
        ]
        annotations.extend(
            edf.Annotation(e.onset, e.duration, (f"QC {e.channel} {e.kind} {e.severity}",))
            for e in events
            if e.kind != "gap"
        )
        if tail_pad:
            annotations.append(
                edf.Annotation(timeline / self._rate, tail_pad / self._rate, ("PAD",))
            )
        annotations.sort(key=lambda a: a.onset)

        started = self.started_at or self._clock()
        header = edf.FileHeader(
            format=file_format,
            patient_id=edf.format_patient_field(
                code=self.patient.code,
                sex=self.patient.sex,
                birthdate=self.patient.birthdate,
                name=self.patient.name,
                anonymize=self.anonymize,
            ),
            recording_id=edf.format_recording_field(
                started.date(), equipment=self.profile.name
            ),
            start_date=started.date(),
            start_time=started.time().replace(microsecond=0),
            continuity=edf.Continuity.CONTINUOUS,
            record_count=records,
            record_duration=1.0,
        )
        signals = [
            edf.Signal(
                self.profile.calibration(f"EEG {label}"[:16], self._rate),
                full[row].tolist(),
            )
            for row, label in enumerate(self.config.active_channels)
        ]
        model = edf.SignalFile(
            header=header,
            signals=signals,
            annotations=annotations,
            annotation_samples_per_record=self._annotation_sizing(annotations, records),
        )
        data = edf.encode_file(model)
        metadata = {
            "session_id": self.session_id,
            "patient": self.patient.code,
            "device": self.profile.name,
            "format": file_format.value,
            "rate": self._rate,
            "channels": list(self.config.active_channels),
            "records": records,
            "duration_seconds": float(records),
            "received_samples": self._written,
            "missing_samples": self.missing_samples,
            "tail_pad_samples": int(tail_pad),
            "gap_count": len(gap_log),
            "gap_seconds": sum(d for _, d in gap_log),
            "artifact_frames": self.artifact_frames,
            "quality_events": [e.to_dict() for e in events],
        }
        self.advance(SessionEvent.FINALIZED)
        return data, metadata
