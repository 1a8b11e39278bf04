"""Declarative EEG peripheral profiles and the framed sample wire format.

The wire format is an open replacement for the vendors' undocumented BLE
services. One data frame is::

    sequence (2 bytes LE) | flags (1 byte) | payload

12-bit payloads carry samples unsigned with a mid-scale offset of 2048 and
pack value pairs into 3 bytes (s0 = b0<<4 | b1>>4, s1 = (b1 & 0x0F)<<8 | b2,
odd tail zero-padded). 24-bit payloads are 3 bytes little-endian two's
complement per sample. Samples are channel-major. Full byte-level notes
live in docs/wire-protocol.md.

Profiles and frames are immutable; everything here is a pure function and
safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from neurodeck.edf import SignalHeader

# Stable ids for the open EEG service, published in docs/wire-protocol.md.
EEG_SERVICE_UUID = "8e7c1a40-2f3b-4d6e-9b0a-5c4d3e2f1a00"
PROFILE_CHARACTERISTIC_UUID = "8e7c1a40-2f3b-4d6e-9b0a-5c4d3e2f1a01"
CONTROL_CHARACTERISTIC_UUID = "8e7c1a40-2f3b-4d6e-9b0a-5c4d3e2f1a02"
DATA_CHARACTERISTIC_UUID = "8e7c1a40-2f3b-4d6e-9b0a-5c4d3e2f1a03"

FRAME_HEADER_BYTES = 3
FLAG_ARTIFACT = 0x01  # bit0: device-detected artifact in this frame
SEQUENCE_MODULUS = 1 << 16


class ProtocolError(Exception):
    """Frame or configuration violates the wire contract."""


@dataclass(frozen=True)
class Characteristic:
    uuid: str
    properties: frozenset[str]  # subset of {"read", "write", "notify"}


@dataclass(frozen=True)
class Service:
    uuid: str
    characteristics: tuple[Characteristic, ...]


def _eeg_service() -> Service:
    return Service(
        uuid=EEG_SERVICE_UUID,
        characteristics=(
            Characteristic(PROFILE_CHARACTERISTIC_UUID, frozenset({"read"})),
            Characteristic(CONTROL_CHARACTERISTIC_UUID, frozenset({"write"})),
            Characteristic(DATA_CHARACTERISTIC_UUID, frozenset({"notify"})),
        ),
    )


@dataclass(frozen=True)
class PeripheralProfile:
    """Everything a client needs to talk to one device model."""

    name: str
    channel_count: int
    electrode_labels: tuple[str, ...]
    supported_rates: frozenset[int]
    resolution_bits: int  # 12 or 24
    samples_per_packet: int
    physical_min: float = -1000.0  # default calibration, uV
    physical_max: float = 1000.0
    services: tuple[Service, ...] = field(default_factory=lambda: (_eeg_service(),))

    def __post_init__(self) -> None:
        if len(self.electrode_labels) != self.channel_count:
            raise ProtocolError(
                f"{self.name}: {len(self.electrode_labels)} labels for "
                f"{self.channel_count} channels"
            )
        if not self.supported_rates:
            raise ProtocolError(f"{self.name}: no supported rates")
        if self.resolution_bits not in (12, 24):
            raise ProtocolError(f"{self.name}: resolution must be 12 or 24 bits")

    @property
    def digital_min(self) -> int:
        return -(1 << (self.resolution_bits - 1))

    @property
    def digital_max(self) -> int:
        return (1 << (self.resolution_bits - 1)) - 1

    @property
    def wire_offset(self) -> int:
        """Added to signed samples on the wire; 12-bit rides unsigned."""
        return 1 << (self.resolution_bits - 1) if self.resolution_bits == 12 else 0

    @property
    def wire_range(self) -> tuple[int, int]:
        if self.resolution_bits == 12:
            return 0, (1 << 12) - 1
        return self.digital_min, self.digital_max

    def calibration(self, label: str, samples_per_record: int) -> SignalHeader:
        return SignalHeader(
            label=label,
            physical_min=self.physical_min,
            physical_max=self.physical_max,
            digital_min=self.digital_min,
            digital_max=self.digital_max,
            samples_per_record=samples_per_record,
            physical_dimension="uV",
            transducer="virtual electrode",
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "channel_count": self.channel_count,
            "electrode_labels": list(self.electrode_labels),
            "supported_rates": sorted(self.supported_rates),
            "resolution_bits": self.resolution_bits,
            "samples_per_packet": self.samples_per_packet,
            "physical_min": self.physical_min,
            "physical_max": self.physical_max,
            "services": [
                {
                    "uuid": svc.uuid,
                    "characteristics": [
                        {"uuid": ch.uuid, "properties": sorted(ch.properties)}
                        for ch in svc.characteristics
                    ],
                }
                for svc in self.services
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PeripheralProfile":
        services = tuple(
            Service(
                uuid=svc["uuid"],
                characteristics=tuple(
                    Characteristic(ch["uuid"], frozenset(ch["properties"]))
                    for ch in svc["characteristics"]
                ),
            )
            for svc in data.get("services", [])
        ) or (_eeg_service(),)
        return cls(
            name=data["name"],
            channel_count=data["channel_count"],
            electrode_labels=tuple(data["electrode_labels"]),
            supported_rates=frozenset(data["supported_rates"]),
            resolution_bits=data["resolution_bits"],
            samples_per_packet=data["samples_per_packet"],
            physical_min=data.get("physical_min", -1000.0),
            physical_max=data.get("physical_max", 1000.0),
            services=services,
        )


@dataclass(frozen=True)
class DeviceConfig:
    rate: int
    resolution_bits: int
    active_channels: tuple[str, ...]

    @classmethod
    def for_profile(cls, profile: PeripheralProfile, rate: int | None = None) -> "DeviceConfig":
        return cls(
            rate=rate if rate is not None else min(profile.supported_rates),
            resolution_bits=profile.resolution_bits,
            active_channels=profile.electrode_labels,
        )

    def to_dict(self) -> dict:
        return {
            "rate": self.rate,
            "resolution_bits": self.resolution_bits,
            "active_channels": list(self.active_channels),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DeviceConfig":
        return cls(
            rate=data["rate"],
            resolution_bits=data["resolution_bits"],
            active_channels=tuple(data["active_channels"]),
        )


@dataclass(frozen=True)
class SampleFrame:
    """One notify-style data packet: wire-domain samples, channel-major."""

    sequence: int
    flags: int = 0
    samples: tuple[tuple[int, ...], ...] = ()


def builtin_profiles() -> dict[str, PeripheralProfile]:
    """The two stock device models: a rigid 4-channel consumer headband and
    a configurable 8-channel amplifier cap."""
    muse_like = PeripheralProfile(
        name="muse-like",
        channel_count=4,
        electrode_labels=("TP9", "AF7", "AF9", "TP10"),
        supported_rates=frozenset({256}),
        resolution_bits=12,
        samples_per_packet=12,
        physical_min=-1000.0,
        physical_max=1000.0,
    )
    biopot_like = PeripheralProfile(
        name="biopot-like",
        channel_count=8,
        electrode_labels=("CH1", "CH2", "CH3", "CH4", "CH5", "CH6", "CH7", "CH8"),
        supported_rates=frozenset({250, 500, 1000, 2000}),
        resolution_bits=24,
        samples_per_packet=16,
        physical_min=-10000.0,
        physical_max=10000.0,
    )
    return {p.name: p for p in (muse_like, biopot_like)}


def get_profile(name: str) -> PeripheralProfile:
    profiles = builtin_profiles()
    try:
        return profiles[name]
    except KeyError:
        raise ProtocolError(
            f"unknown profile {name!r}; built-ins: {sorted(profiles)}"
        ) from None


# ---------------------------------------------------------------------------
# frame pack/unpack


def _pack_12bit(values: Sequence[int]) -> bytes:
    out = bytearray()
    padded = list(values)
    if len(padded) % 2:
        padded.append(0)
    for i in range(0, len(padded), 2):
        s0, s1 = padded[i], padded[i + 1]
        out += bytes(((s0 >> 4) & 0xFF, ((s0 & 0x0F) << 4) | (s1 >> 8), s1 & 0xFF))
    return bytes(out)


def _unpack_12bit(payload: bytes, count: int) -> list[int]:
    values: list[int] = []
    for i in range(0, len(payload), 3):
        b0, b1, b2 = payload[i : i + 3]
        values.append((b0 << 4) | (b1 >> 4))
        values.append(((b1 & 0x0F) << 8) | b2)
    return values[:count]


def pack_frame(frame: SampleFrame, profile: PeripheralProfile) -> bytes:
    """Serialize a frame; raises :class:`ProtocolError` on range violations."""
    if not 0 <= frame.sequence < SEQUENCE_MODULUS:
        raise ProtocolError(f"sequence {frame.sequence} outside 16-bit range")
    if not 0 <= frame.flags <= 0xFF:
        raise ProtocolError(f"flags {frame.flags:#x} outside one byte")
    lo, hi = profile.wire_range
    flat: list[int] = []
    for channel in frame.samples:
        if len(channel) != profile.samples_per_packet:
            raise ProtocolError(
                f"channel carries {len(channel)} samples, "
                f"profile says {profile.samples_per_packet}"
            )
        for value in channel:
            if not lo <= value <= hi:
                raise ProtocolError(f"sample {value} outside wire range [{lo}, {hi}]")
            flat.append(value)
    out = frame.sequence.to_bytes(2, "little") + bytes([frame.flags])
    if profile.resolution_bits == 12:
        return out + _pack_12bit(flat)
    return out + b"".join(v.to_bytes(3, "little", signed=True) for v in flat)


def frame_payload_bytes(profile: PeripheralProfile) -> int:
    count = profile.channel_count * profile.samples_per_packet
    if profile.resolution_bits == 12:
        return ((count + 1) // 2) * 3
    return count * 3


def unpack_frame(data: bytes, profile: PeripheralProfile) -> SampleFrame:
    """Exact inverse of :func:`pack_frame` for the given profile."""
    expected = FRAME_HEADER_BYTES + frame_payload_bytes(profile)
    if len(data) != expected:
        raise ProtocolError(f"frame is {len(data)} bytes, profile needs {expected}")
    sequence = int.from_bytes(data[0:2], "little")
    flags = data[2]
    payload = data[3:]
    count = profile.channel_count * profile.samples_per_packet
    if profile.resolution_bits == 12:
        flat = _unpack_12bit(payload, count)
    else:
        flat = [
            int.from_bytes(payload[i : i + 3], "little", signed=True)
            for i in range(0, len(payload), 3)
        ]
    spp = profile.samples_per_packet
    samples = tuple(
        tuple(flat[c * spp : (c + 1) * spp]) for c in range(profile.channel_count)
    )
    return SampleFrame(sequence=sequence, flags=flags, samples=samples)


# ---------------------------------------------------------------------------
# stream bookkeeping


def detect_gaps(sequences: Iterable[int]) -> list[tuple[int, int]]:
    """Discontinuities in a received-order sequence list.

    Returns (sequence after which packets went missing, how many), with
    16-bit wraparound treated as contiguous (65535 -> 0).
    """
    gaps: list[tuple[int, int]] = []
    iterator = iter(sequences)
    try:
        prev = next(iterator)
    except StopIteration:
        return gaps
    for current in iterator:
        missing = (current - prev - 1) % SEQUENCE_MODULUS
        if missing:
            gaps.append((prev, missing))
        prev = current
    return gaps


def negotiate_config(
    requested: DeviceConfig, profile: PeripheralProfile
) -> DeviceConfig:
    """Clamp a requested configuration to what the device can actually do.

    Unsupported rates fall to the nearest supported rate below, or the
    lowest supported rate when nothing is below. Channels are intersected
    with the profile's labels, keeping profile order.
    """
    if requested.rate in profile.supported_rates:
        rate = requested.rate
    else:
        below = [r for r in profile.supported_rates if r < requested.rate]
        rate = max(below) if below else min(profile.supported_rates)
    channels = tuple(
        label for label in profile.electrode_labels if label in requested.active_channels
    )
    if not channels:
        raise ProtocolError(
            f"no requested channel exists on {profile.name}; "
            f"available: {profile.electrode_labels}"
        )
    return replace(
        requested,
        rate=rate,
        resolution_bits=profile.resolution_bits,
        active_channels=channels,
    )
