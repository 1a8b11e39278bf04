"""EDF / EDF+ / BDF+ codec: bit-exact encode, decode, and validation.

File layout is the classic one: a 256-byte fixed header, 256 bytes of
signal headers per signal (stored as per-field arrays), then data records
holding ``samples_per_record`` samples for every signal. EDF samples are
2-byte little-endian two's complement, BDF samples 3-byte. Annotations
travel in a dedicated "EDF Annotations"/"BDF Annotations" signal encoded
as time-stamped annotation lists (TALs).

Decoded models are plain dataclasses and are never mutated by this module;
they can be shared freely across threads.
"""

from __future__ import annotations

import datetime
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

_TEXT_SEP = 0x14
_DURATION_SEP = 0x15
_TAL_END = 0x00
_RESERVED_TAL_BYTES = (0x00, 0x14, 0x15)

# Offsets of the fixed header fields, for diagnostics.
_FIXED_FIELDS = (
    ("version", 0, 8),
    ("patient_id", 8, 80),
    ("recording_id", 88, 80),
    ("start_date", 168, 8),
    ("start_time", 176, 8),
    ("header_byte_count", 184, 8),
    ("reserved", 192, 44),
    ("record_count", 236, 8),
    ("record_duration", 244, 8),
    ("signal_count", 252, 4),
)


class CodecError(Exception):
    """Base class for all codec failures."""


class TalError(CodecError):
    """Malformed time-stamped annotation list."""


class CalibrationError(CodecError):
    """Digital/physical calibration cannot be applied."""


@dataclass(frozen=True)
class Finding:
    """One validation problem, tied to a field and (if known) a byte offset."""

    field: str
    message: str
    offset: int | None = None

    def __str__(self) -> str:
        loc = f" @byte {self.offset}" if self.offset is not None else ""
        return f"{self.field}: {self.message}{loc}"


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings

    def add(self, field_name: str, message: str, offset: int | None = None) -> None:
        self.findings.append(Finding(field_name, message, offset))

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "; ".join(str(f) for f in self.findings)


class EncodeError(CodecError):
    def __init__(self, report: ValidationReport):
        super().__init__(f"model failed validation: {report}")
        self.report = report


class DecodeError(CodecError):
    def __init__(self, message: str, offset: int | None = None):
        loc = f" @byte {offset}" if offset is not None else ""
        super().__init__(f"{message}{loc}")
        self.offset = offset


class FileFormat(Enum):
    EDF = "edf"
    BDF = "bdf"

    @property
    def sample_width(self) -> int:
        return 2 if self is FileFormat.EDF else 3

    @property
    def digital_limits(self) -> tuple[int, int]:
        half = 1 << (8 * self.sample_width - 1)
        return -half, half - 1

    @property
    def annotation_label(self) -> str:
        return "EDF Annotations" if self is FileFormat.EDF else "BDF Annotations"

    @property
    def version_bytes(self) -> bytes:
        return b"0       " if self is FileFormat.EDF else b"\xffBIOSEMI"


class Continuity(Enum):
    PLAIN = "plain"  # legacy EDF / BDF without an annotation signal
    CONTINUOUS = "continuous"  # EDF+C / BDF+C
    DISCONTINUOUS = "discontinuous"  # EDF+D / BDF+D

    def reserved_text(self, fmt: FileFormat) -> str:
        if self is Continuity.PLAIN:
            return "" if fmt is FileFormat.EDF else "24BIT"
        suffix = "C" if self is Continuity.CONTINUOUS else "D"
        return ("EDF+" if fmt is FileFormat.EDF else "BDF+") + suffix


@dataclass(frozen=True)
class Annotation:
    """Time-stamped note: onset seconds from file start, optional duration."""

    onset: float
    duration: float | None = None
    texts: tuple[str, ...] = ("",)


@dataclass(frozen=True)
class SignalHeader:
    label: str
    physical_min: float
    physical_max: float
    digital_min: int
    digital_max: int
    samples_per_record: int
    transducer: str = ""
    physical_dimension: str = ""
    prefiltering: str = ""
    reserved: str = ""


@dataclass
class Signal:
    header: SignalHeader
    samples: list[int] = field(default_factory=list)


@dataclass
class FileHeader:
    format: FileFormat = FileFormat.EDF
    patient_id: str = "X X X X"
    recording_id: str = "Startdate X X X X"
    start_date: datetime.date = datetime.date(2000, 1, 1)
    start_time: datetime.time = datetime.time(0, 0, 0)
    continuity: Continuity = Continuity.CONTINUOUS
    record_count: int = -1
    record_duration: float = 1.0


@dataclass
class SignalFile:
    """In-memory EDF/EDF+/BDF+ file.

    ``signals`` holds the ordinary signals only; the annotation channel is
    synthesized on encode (and stripped on decode) whenever the continuity
    flag asks for an EDF+/BDF+ file.
    """

    header: FileHeader = field(default_factory=FileHeader)
    signals: list[Signal] = field(default_factory=list)
    annotations: list[Annotation] = field(default_factory=list)
    annotation_samples_per_record: int = 20

    @property
    def has_annotation_signal(self) -> bool:
        return self.header.continuity is not Continuity.PLAIN

    @property
    def signal_count(self) -> int:
        return len(self.signals) + (1 if self.has_annotation_signal else 0)

    @property
    def header_byte_count(self) -> int:
        return 256 * (self.signal_count + 1)

    @property
    def duration_seconds(self) -> float:
        if self.header.record_count < 0:
            return 0.0
        return self.header.record_count * self.header.record_duration


# ---------------------------------------------------------------------------
# numeric and text field helpers


def format_number(value: float | int) -> str:
    """Shortest decimal representation that parses back to the same value."""
    if isinstance(value, int):
        return str(value)
    if math.isnan(value) or math.isinf(value):
        raise ValueError(f"non-finite value {value!r}")
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def _is_printable_ascii(text: str) -> bool:
    return all(0x20 <= ord(ch) <= 0x7E for ch in text)


def _encode_text(text: str, width: int) -> bytes:
    return text.encode("ascii").ljust(width, b" ")


def _check_text(report: ValidationReport, name: str, text: str, width: int) -> None:
    if not _is_printable_ascii(text):
        report.add(name, "contains non-printable or non-ASCII characters")
        return
    if len(text) > width:
        report.add(name, f"longer than {width} characters ({len(text)})")
    if text != text.rstrip(" "):
        report.add(name, "trailing spaces are not preserved by the format")


def _check_number(report: ValidationReport, name: str, value: float | int, width: int) -> None:
    try:
        text = format_number(value)
    except (ValueError, OverflowError):
        report.add(name, f"not a finite number: {value!r}")
        return
    if len(text) > width:
        report.add(name, f"{text!r} does not fit in {width} characters")


# ---------------------------------------------------------------------------
# calibration


def _check_calibration(cal: SignalHeader) -> None:
    if cal.digital_min == cal.digital_max:
        raise CalibrationError(
            f"degenerate calibration: digital-min = digital-max = {cal.digital_min}"
        )
    if cal.physical_min == cal.physical_max:
        raise CalibrationError(
            f"degenerate calibration: physical-min = physical-max = {cal.physical_min}"
        )


def dig_to_phys(sample: int, cal: SignalHeader) -> float:
    """Map a digital sample to physical units, exactly at the lattice points.

    Out-of-range samples are clamped to the digital bounds and flagged with
    a warning. Internally rational so that digital-min/max map to
    physical-min/max with no float drift.
    """
    _check_calibration(cal)
    lo, hi = sorted((cal.digital_min, cal.digital_max))
    clamped = min(max(sample, lo), hi)
    if clamped != sample:
        warnings.warn(
            f"digital sample {sample} outside [{lo}, {hi}]; clamped", stacklevel=2
        )
    value = (
        Fraction(clamped - cal.digital_min)
        * (Fraction(cal.physical_max) - Fraction(cal.physical_min))
        / (cal.digital_max - cal.digital_min)
        + Fraction(cal.physical_min)
    )
    return float(value)


def _round_half_away(x: Fraction) -> int:
    if x >= 0:
        return math.floor(x + Fraction(1, 2))
    return -math.floor(-x + Fraction(1, 2))


def phys_to_dig(value: float, cal: SignalHeader) -> int:
    """Rounding inverse of :func:`dig_to_phys` (ties round half away from zero).

    Values outside the physical range are clamped to the digital bounds and
    flagged, mirroring ADC saturation.
    """
    _check_calibration(cal)
    exact = (
        (Fraction(value) - Fraction(cal.physical_min))
        * (cal.digital_max - cal.digital_min)
        / (Fraction(cal.physical_max) - Fraction(cal.physical_min))
        + cal.digital_min
    )
    sample = _round_half_away(exact)
    lo, hi = sorted((cal.digital_min, cal.digital_max))
    clamped = min(max(sample, lo), hi)
    if clamped != sample:
        warnings.warn(
            f"physical value {value} maps outside [{lo}, {hi}]; clamped", stacklevel=2
        )
    return clamped


def calibration_gain_offset(cal: SignalHeader) -> tuple[float, float]:
    """Float (gain, offset) such that physical ≈ digital * gain + offset."""
    _check_calibration(cal)
    gain = (cal.physical_max - cal.physical_min) / (cal.digital_max - cal.digital_min)
    return gain, cal.physical_min - cal.digital_min * gain


def dig_to_phys_array(samples: np.ndarray, cal: SignalHeader) -> np.ndarray:
    """Vectorized digital→physical conversion (float precision, for bulk paths)."""
    gain, offset = calibration_gain_offset(cal)
    return np.asarray(samples, dtype=np.float64) * gain + offset


def phys_to_dig_array(values: np.ndarray, cal: SignalHeader) -> np.ndarray:
    """Vectorized physical→digital conversion; clips at the digital rails."""
    gain, offset = calibration_gain_offset(cal)
    scaled = (np.asarray(values, dtype=np.float64) - offset) / gain
    rounded = np.copysign(np.floor(np.abs(scaled) + 0.5), scaled)
    lo, hi = sorted((cal.digital_min, cal.digital_max))
    return np.clip(rounded, lo, hi).astype(np.int64)


# ---------------------------------------------------------------------------
# TAL encode/decode


def _format_onset(onset: float) -> str:
    text = format_number(onset)
    return text if text.startswith("-") else "+" + text


def encode_tal(annotations: Sequence[Annotation]) -> bytes:
    """Encode annotations as consecutive TALs, each terminated by 0x00."""
    out = bytearray()
    for ann in annotations:
        if not math.isfinite(ann.onset):
            raise TalError(f"onset must be finite, got {ann.onset!r}")
        if not ann.texts:
            raise TalError("annotation must carry at least one text")
        out += _format_onset(ann.onset).encode("ascii")
        if ann.duration is not None:
            if not math.isfinite(ann.duration) or ann.duration < 0:
                raise TalError(f"duration must be finite and >= 0, got {ann.duration!r}")
            out.append(_DURATION_SEP)
            out += format_number(ann.duration).encode("ascii")
        out.append(_TEXT_SEP)
        for text in ann.texts:
            encoded = text.encode("utf-8")
            for reserved in _RESERVED_TAL_BYTES:
                if reserved in encoded:
                    raise TalError(
                        f"reserved byte 0x{reserved:02X} inside annotation text {text!r}"
                    )
            out += encoded
            out.append(_TEXT_SEP)
        out.append(_TAL_END)
    return bytes(out)


def _parse_tal_number(text: bytes, what: str) -> float:
    try:
        return float(text.decode("ascii"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise TalError(f"malformed TAL {what}: {text!r}") from exc


def decode_tal(data: bytes) -> list[Annotation]:
    """Inverse of :func:`encode_tal`; tolerates trailing 0x00 padding."""
    annotations: list[Annotation] = []
    for chunk in data.split(b"\x00"):
        if not chunk:
            continue
        parts = chunk.split(bytes([_TEXT_SEP]))
        if len(parts) < 3 or parts[-1] != b"":
            raise TalError(f"TAL not terminated by text separator: {chunk!r}")
        timing = parts[0]
        if not timing.startswith((b"+", b"-")):
            raise TalError(f"TAL onset must be signed: {timing!r}")
        duration: float | None = None
        if bytes([_DURATION_SEP]) in timing:
            onset_text, duration_text = timing.split(bytes([_DURATION_SEP]), 1)
            duration = _parse_tal_number(duration_text, "duration")
        else:
            onset_text = timing
        onset = _parse_tal_number(onset_text, "onset")
        try:
            texts = tuple(p.decode("utf-8") for p in parts[1:-1])
        except UnicodeDecodeError as exc:
            raise TalError(f"annotation text is not valid UTF-8: {chunk!r}") from exc
        annotations.append(Annotation(onset, duration, texts))
    return annotations


# ---------------------------------------------------------------------------
# validation


def _iter_signal_headers(model: SignalFile) -> Iterable[tuple[str, SignalHeader]]:
    for i, sig in enumerate(model.signals):
        yield f"signals[{i}]", sig.header


def _annotation_record_layout(
    model: SignalFile, record_count: int
) -> list[list[Annotation]] | str:
    """Assign annotations to data records, spilling forward on overflow.

    Returns the per-record lists, or an error string when some annotation
    can never fit.
    """
    duration = model.header.record_duration
    capacity = model.annotation_samples_per_record * model.header.format.sample_width
    per_record: list[list[Annotation]] = [[] for _ in range(record_count)]
    remaining: list[int] = []
    for r in range(record_count):
        keeper = encode_tal([Annotation(r * duration)])
        remaining.append(capacity - len(keeper))
        if remaining[r] < 0:
            return f"record {r}: timekeeping TAL alone exceeds {capacity} bytes"
    cursor = 0
    for ann in model.annotations:
        tal = encode_tal([ann])
        natural = int(ann.onset // duration) if ann.onset > 0 else 0
        r = max(cursor, min(natural, record_count - 1))
        while r < record_count and remaining[r] < len(tal):
            r += 1
        if r >= record_count:
            return (
                f"annotation at onset {ann.onset} does not fit: increase "
                f"annotation_samples_per_record (capacity {capacity} bytes/record)"
            )
        per_record[r].append(ann)
        remaining[r] -= len(tal)
        cursor = r
    return per_record


def _implied_record_count(model: SignalFile) -> int | None:
    """Record count implied by the sample buffers, or None if inconsistent."""
    counts = set()
    for sig in model.signals:
        spr = sig.header.samples_per_record
        if spr < 1 or len(sig.samples) % spr:
            return None
        counts.add(len(sig.samples) // spr)
    if len(counts) != 1:
        return None
    return counts.pop()


def validate(model: SignalFile) -> ValidationReport:
    """Check every encoding invariant; an empty report means encode will succeed."""
    report = ValidationReport()
    hdr = model.header
    fmt = hdr.format
    width_lo, width_hi = fmt.digital_limits

    if not model.signals:
        report.add("signals", "at least one ordinary signal is required")
    _check_text(report, "patient_id", hdr.patient_id, 80)
    _check_text(report, "recording_id", hdr.recording_id, 80)
    if not 1985 <= hdr.start_date.year <= 2084:
        report.add("start_date", f"year {hdr.start_date.year} not encodable in dd.mm.yy")
    if hdr.record_duration <= 0:
        report.add("record_duration", f"must be positive, got {hdr.record_duration}")
    else:
        _check_number(report, "record_duration", hdr.record_duration, 8)
    if hdr.record_count < -1:
        report.add("record_count", f"must be >= -1, got {hdr.record_count}")

    implied = _implied_record_count(model)
    if implied is None:
        report.add(
            "records",
            "sample counts are not a whole number of records, or signals disagree",
        )
    elif hdr.record_count >= 0 and hdr.record_count != implied:
        report.add(
            "record_count",
            f"header says {hdr.record_count} records but buffers hold {implied}",
        )

    labels_seen = set()
    for name, sig in _iter_signal_headers(model):
        _check_text(report, f"{name}.label", sig.label, 16)
        _check_text(report, f"{name}.transducer", sig.transducer, 80)
        _check_text(report, f"{name}.physical_dimension", sig.physical_dimension, 8)
        _check_text(report, f"{name}.prefiltering", sig.prefiltering, 80)
        _check_text(report, f"{name}.reserved", sig.reserved, 32)
        if sig.label in ("EDF Annotations", "BDF Annotations"):
            report.add(f"{name}.label", "annotation label is reserved for the codec")
        if sig.label in labels_seen:
            report.add(f"{name}.label", f"duplicate label {sig.label!r}")
        labels_seen.add(sig.label)
        _check_number(report, f"{name}.physical_min", sig.physical_min, 8)
        _check_number(report, f"{name}.physical_max", sig.physical_max, 8)
        if sig.physical_min == sig.physical_max:
            report.add(f"{name}", "degenerate calibration: physical-min = physical-max")
        if sig.digital_min >= sig.digital_max:
            report.add(
                f"{name}",
                f"digital-min {sig.digital_min} must be < digital-max {sig.digital_max}",
            )
        if sig.digital_min < width_lo or sig.digital_max > width_hi:
            report.add(
                f"{name}",
                f"digital bounds exceed format width ({fmt.value}: {width_lo}..{width_hi})",
            )
        if sig.samples_per_record < 1:
            report.add(f"{name}.samples_per_record", "must be >= 1")

    for i, sig in enumerate(model.signals):
        lo = min(sig.header.digital_min, sig.header.digital_max)
        hi = max(sig.header.digital_min, sig.header.digital_max)
        for j, sample in enumerate(sig.samples):
            if not lo <= sample <= hi:
                report.add(
                    f"signals[{i}].samples",
                    f"sample {sample} at index {j} outside digital bounds [{lo}, {hi}]",
                )
                break

    if model.annotations and not model.has_annotation_signal:
        report.add(
            "annotations",
            "annotations require EDF+/BDF+ continuity, header says plain",
        )
    if model.has_annotation_signal:
        if model.annotation_samples_per_record < 1:
            report.add("annotation_samples_per_record", "must be >= 1")
        if model.annotations and implied == 0:
            report.add("annotations", "no data records to carry annotations")
        onsets = [a.onset for a in model.annotations]
        if any(b < a for a, b in zip(onsets, onsets[1:])):
            report.add("annotations", "must be sorted by onset")
        for i, ann in enumerate(model.annotations):
            try:
                encode_tal([ann])
            except TalError as exc:
                report.add(f"annotations[{i}]", str(exc))
        if implied is not None and report.ok:
            layout = _annotation_record_layout(model, max(implied, 1))
            if isinstance(layout, str):
                report.add("annotations", layout)
    return report


# ---------------------------------------------------------------------------
# encode


def _pack_samples(samples: Sequence[int], fmt: FileFormat) -> bytes:
    arr = np.asarray(samples, dtype=np.int32)
    if fmt is FileFormat.EDF:
        return arr.astype("<i2").tobytes()
    as_bytes = arr.astype("<i4").view(np.uint8).reshape(-1, 4)
    return as_bytes[:, :3].tobytes()


def _unpack_samples(data: bytes, fmt: FileFormat) -> list[int]:
    if fmt is FileFormat.EDF:
        return np.frombuffer(data, dtype="<i2").astype(int).tolist()
    raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
    value = raw[:, 0] | (raw[:, 1] << 8) | (raw[:, 2] << 16)
    value -= (value >> 23) << 24
    return value.tolist()


def encode_file(model: SignalFile) -> bytes:
    """Serialize the model; raises :class:`EncodeError` when invariants fail."""
    report = validate(model)
    if not report.ok:
        raise EncodeError(report)
    hdr = model.header
    fmt = hdr.format
    record_count = _implied_record_count(model)
    assert record_count is not None  # validate() guarantees it
    declared_count = hdr.record_count if hdr.record_count == -1 else record_count

    headers = [sig.header for sig in model.signals]
    if model.has_annotation_signal:
        headers.append(
            SignalHeader(
                label=fmt.annotation_label,
                physical_min=0.0,
                physical_max=1.0,
                digital_min=fmt.digital_limits[0],
                digital_max=fmt.digital_limits[1],
                samples_per_record=model.annotation_samples_per_record,
            )
        )

    out = bytearray()
    out += fmt.version_bytes
    out += _encode_text(hdr.patient_id, 80)
    out += _encode_text(hdr.recording_id, 80)
    out += _encode_text(hdr.start_date.strftime("%d.%m.%y"), 8)
    out += _encode_text(hdr.start_time.strftime("%H.%M.%S"), 8)
    out += _encode_text(str(256 * (len(headers) + 1)), 8)
    out += _encode_text(hdr.continuity.reserved_text(fmt), 44)
    out += _encode_text(str(declared_count), 8)
    out += _encode_text(format_number(hdr.record_duration), 8)
    out += _encode_text(str(len(headers)), 4)
    for width, value in (
        (16, lambda s: s.label),
        (80, lambda s: s.transducer),
        (8, lambda s: s.physical_dimension),
        (8, lambda s: format_number(s.physical_min)),
        (8, lambda s: format_number(s.physical_max)),
        (8, lambda s: str(s.digital_min)),
        (8, lambda s: str(s.digital_max)),
        (80, lambda s: s.prefiltering),
        (8, lambda s: str(s.samples_per_record)),
        (32, lambda s: s.reserved),
    ):
        for sig_header in headers:
            out += _encode_text(value(sig_header), width)

    layout: list[list[Annotation]] = []
    if model.has_annotation_signal:
        assigned = _annotation_record_layout(model, max(record_count, 1))
        assert not isinstance(assigned, str)  # validate() checked capacity
        layout = assigned
    tal_capacity = model.annotation_samples_per_record * fmt.sample_width

    for r in range(record_count):
        for sig in model.signals:
            spr = sig.header.samples_per_record
            out += _pack_samples(sig.samples[r * spr : (r + 1) * spr], fmt)
        if model.has_annotation_signal:
            block = encode_tal([Annotation(r * hdr.record_duration)])
            block += encode_tal(layout[r])
            out += block.ljust(tal_capacity, b"\x00")
    return bytes(out)


# ---------------------------------------------------------------------------
# decode


def _read_text(data: bytes, offset: int, width: int, name: str) -> str:
    raw = data[offset : offset + width]
    try:
        text = raw.decode("ascii")
    except UnicodeDecodeError as exc:
        raise DecodeError(f"{name}: non-ASCII header bytes {raw!r}", offset) from exc
    if not _is_printable_ascii(text):
        raise DecodeError(f"{name}: non-printable header bytes {raw!r}", offset)
    return text.rstrip(" ")


def _read_int(data: bytes, offset: int, width: int, name: str) -> int:
    text = _read_text(data, offset, width, name)
    try:
        return int(text)
    except ValueError as exc:
        raise DecodeError(f"{name}: expected integer, got {text!r}", offset) from exc


def _read_float(data: bytes, offset: int, width: int, name: str) -> float:
    text = _read_text(data, offset, width, name)
    try:
        return float(text)
    except ValueError as exc:
        raise DecodeError(f"{name}: expected number, got {text!r}", offset) from exc


def _parse_date(text: str, offset: int) -> datetime.date:
    try:
        day, month, year = (int(p) for p in text.split("."))
        year += 1900 if year >= 85 else 2000
        return datetime.date(year, month, day)
    except (ValueError, TypeError) as exc:
        raise DecodeError(f"start_date: expected dd.mm.yy, got {text!r}", offset) from exc


def _parse_time(text: str, offset: int) -> datetime.time:
    try:
        hh, mm, ss = (int(p) for p in text.split("."))
        return datetime.time(hh, mm, ss)
    except (ValueError, TypeError) as exc:
        raise DecodeError(f"start_time: expected hh.mm.ss, got {text!r}", offset) from exc


def _parse_reserved(text: str) -> Continuity:
    if text.endswith("+C"):
        return Continuity.CONTINUOUS
    if text.endswith("+D"):
        return Continuity.DISCONTINUOUS
    return Continuity.PLAIN


def decode_file(data: bytes) -> SignalFile:
    """Parse a complete EDF/EDF+/BDF+ byte string back into a model.

    A record count of -1 (streaming writer never finalized) is tolerated;
    the count is derived from the file length.
    """
    if len(data) < 256:
        raise DecodeError(f"truncated header: {len(data)} bytes, need 256", len(data))
    version = data[0:8]
    if version == FileFormat.EDF.version_bytes:
        fmt = FileFormat.EDF
    elif version == FileFormat.BDF.version_bytes:
        fmt = FileFormat.BDF
    else:
        raise DecodeError(f"unrecognized version marker {version!r}", 0)

    patient_id = _read_text(data, 8, 80, "patient_id")
    recording_id = _read_text(data, 88, 80, "recording_id")
    start_date = _parse_date(_read_text(data, 168, 8, "start_date"), 168)
    start_time = _parse_time(_read_text(data, 176, 8, "start_time"), 176)
    header_bytes = _read_int(data, 184, 8, "header_byte_count")
    continuity = _parse_reserved(_read_text(data, 192, 44, "reserved"))
    record_count = _read_int(data, 236, 8, "record_count")
    record_duration = _read_float(data, 244, 8, "record_duration")
    ns = _read_int(data, 252, 4, "signal_count")

    if ns < 1:
        raise DecodeError(f"signal_count must be >= 1, got {ns}", 252)
    if header_bytes != 256 * (ns + 1):
        raise DecodeError(
            f"header_byte_count {header_bytes} != 256 x (signals + 1) = {256 * (ns + 1)}",
            184,
        )
    if len(data) < header_bytes:
        raise DecodeError(
            f"truncated signal headers: {len(data)} bytes, need {header_bytes}", len(data)
        )
    if record_duration < 0 or (record_duration == 0 and record_count != 0):
        raise DecodeError(f"record_duration must be positive, got {record_duration}", 244)

    fields: dict[str, list] = {}
    offset = 256
    for name, width, reader in (
        ("label", 16, _read_text),
        ("transducer", 80, _read_text),
        ("physical_dimension", 8, _read_text),
        ("physical_min", 8, _read_float),
        ("physical_max", 8, _read_float),
        ("digital_min", 8, _read_int),
        ("digital_max", 8, _read_int),
        ("prefiltering", 80, _read_text),
        ("samples_per_record", 8, _read_int),
        ("reserved", 32, _read_text),
    ):
        fields[name] = [
            reader(data, offset + i * width, width, f"signals[{i}].{name}")
            for i in range(ns)
        ]
        offset += ns * width

    width_lo, width_hi = fmt.digital_limits
    headers = []
    for i in range(ns):
        sig = SignalHeader(
            label=fields["label"][i],
            physical_min=fields["physical_min"][i],
            physical_max=fields["physical_max"][i],
            digital_min=fields["digital_min"][i],
            digital_max=fields["digital_max"][i],
            samples_per_record=fields["samples_per_record"][i],
            transducer=fields["transducer"][i],
            physical_dimension=fields["physical_dimension"][i],
            prefiltering=fields["prefiltering"][i],
            reserved=fields["reserved"][i],
        )
        if sig.digital_min < width_lo or sig.digital_max > width_hi:
            raise DecodeError(
                f"signals[{i}]: digital bounds [{sig.digital_min}, {sig.digital_max}] "
                f"exceed {fmt.value} width",
            )
        if sig.samples_per_record < 1:
            raise DecodeError(f"signals[{i}]: samples_per_record must be >= 1")
        headers.append(sig)

    record_size = sum(h.samples_per_record for h in headers) * fmt.sample_width
    payload = len(data) - header_bytes
    complete = payload // record_size
    if record_count == -1:
        record_count = complete
    if payload != record_count * record_size:
        raise DecodeError(
            f"truncated data: last complete record index {complete - 1} "
            f"({payload} payload bytes, record is {record_size})",
            header_bytes + complete * record_size,
        )

    is_annotation = [h.label == fmt.annotation_label for h in headers]
    signals = [Signal(h, []) for h, a in zip(headers, is_annotation) if not a]
    annotation_spr = next(
        (h.samples_per_record for h, a in zip(headers, is_annotation) if a), 20
    )
    annotations: list[Annotation] = []
    pos = header_bytes
    for r in range(record_count):
        ordinary = 0
        for i, h in enumerate(headers):
            block_len = h.samples_per_record * fmt.sample_width
            block = data[pos : pos + block_len]
            if is_annotation[i]:
                try:
                    tals = decode_tal(block)
                except TalError as exc:
                    raise DecodeError(f"record {r}: {exc}", pos) from exc
                for j, tal in enumerate(tals):
                    keeps_time = (
                        j == 0
                        and tal.duration is None
                        and tal.texts == ("",)
                        and tal.onset == r * record_duration
                    )
                    if not keeps_time:
                        annotations.append(tal)
            else:
                signals[ordinary].samples.extend(_unpack_samples(block, fmt))
                ordinary += 1
            pos += block_len

    header = FileHeader(
        format=fmt,
        patient_id=patient_id,
        recording_id=recording_id,
        start_date=start_date,
        start_time=start_time,
        continuity=continuity,
        record_count=record_count,
        record_duration=record_duration,
    )
    return SignalFile(
        header=header,
        signals=signals,
        annotations=annotations,
        annotation_samples_per_record=annotation_spr,
    )


# ---------------------------------------------------------------------------
# EDF+ identification subfields


def _subfield(value: str | None) -> str:
    if value is None or value == "":
        return "X"
    return value.replace(" ", "_")


def format_patient_field(
    code: str | None = None,
    sex: str | None = None,
    birthdate: datetime.date | None = None,
    name: str | None = None,
    anonymize: bool = False,
) -> str:
    """EDF+ 'local patient identification' subfields; unknowns become X."""
    birth = birthdate.strftime("%d-%b-%Y").upper() if birthdate else None
    if anonymize:
        name = None
        birth = None
    return " ".join(_subfield(v) for v in (code, sex, birth, name))


def format_recording_field(
    start_date: datetime.date,
    administration_code: str | None = None,
    technician: str | None = None,
    equipment: str | None = None,
) -> str:
    """EDF+ 'local recording identification' subfields."""
    started = start_date.strftime("%d-%b-%Y").upper()
    rest = " ".join(_subfield(v) for v in (administration_code, technician, equipment))
    return f"Startdate {started} {rest}"
