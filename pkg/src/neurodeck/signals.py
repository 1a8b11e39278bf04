"""Synthetic per-channel test signals with reproducible noise.

Noise is derived per sample index with the SplitMix64 mixer, so any window
of samples is identical no matter how generation is chunked. That keeps a
paced device stream byte-identical to a one-shot oracle computation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from neurodeck.edf import phys_to_dig_array
from neurodeck.protocol import DeviceConfig, PeripheralProfile

WAVEFORMS = ("sine", "constant", "white-noise")

_GAMMA = np.uint64(0x9E3779B97F4A7C15)


class SignalError(Exception):
    """Signal specification cannot be generated."""


@dataclass(frozen=True)
class Component:
    waveform: str
    amplitude: float  # uV
    frequency: float = 0.0  # Hz, sine only
    phase: float = 0.0  # rad

    def __post_init__(self) -> None:
        if self.waveform not in WAVEFORMS:
            raise SignalError(f"unknown waveform {self.waveform!r}; use {WAVEFORMS}")
        if self.amplitude < 0:
            raise SignalError(f"amplitude must be >= 0, got {self.amplitude}")


@dataclass(frozen=True)
class SignalSpec:
    channels: tuple[tuple[Component, ...], ...]
    seed: int = 0

    @classmethod
    def uniform(
        cls, components: Sequence[Component], channel_count: int, seed: int = 0
    ) -> "SignalSpec":
        return cls(channels=(tuple(components),) * channel_count, seed=seed)

    @classmethod
    def from_dict(cls, data: dict, channel_count: int) -> "SignalSpec":
        def build(raw: dict) -> Component:
            return Component(
                waveform=raw["waveform"],
                amplitude=float(raw["amplitude"]),
                frequency=float(raw.get("frequency", 0.0)),
                phase=float(raw.get("phase", 0.0)),
            )

        seed = int(data.get("seed", 0))
        if "all_channels" in data:
            comps = tuple(build(c) for c in data["all_channels"])
            return cls.uniform(comps, channel_count, seed)
        channels = tuple(
            tuple(build(c) for c in channel) for channel in data["channels"]
        )
        return cls(channels=channels, seed=seed)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = x * np.uint64(1)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def _noise_units(seed: int, channel: int, component: int, t0: int, n: int) -> np.ndarray:
    """Uniform values in [-1, 1), addressable by absolute sample index."""
    base = _splitmix64(
        np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
        ^ (np.uint64(channel) << np.uint64(40))
        ^ (np.uint64(component) << np.uint64(20))
    )
    index = np.arange(t0 + 1, t0 + n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        words = _splitmix64(base + index * _GAMMA)
    return (words >> np.uint64(11)).astype(np.float64) * 2.0**-53 * 2.0 - 1.0


def physical_samples(
    spec: SignalSpec, rate: int, t0: int, n: int
) -> np.ndarray:
    """Evaluate the spec in uV at sample indexes [t0, t0 + n); shape (ch, n)."""
    out = np.zeros((len(spec.channels), n), dtype=np.float64)
    t = (t0 + np.arange(n, dtype=np.float64)) / rate
    for c, components in enumerate(spec.channels):
        for k, comp in enumerate(components):
            if comp.waveform == "sine":
                if comp.frequency >= rate / 2:
                    raise SignalError(
                        f"sine at {comp.frequency} Hz >= Nyquist for {rate} Hz"
                    )
                out[c] += comp.amplitude * np.sin(
                    2 * np.pi * comp.frequency * t + comp.phase
                )
            elif comp.waveform == "constant":
                out[c] += comp.amplitude
            else:
                out[c] += comp.amplitude * _noise_units(spec.seed, c, k, t0, n)
    return out


def generate_samples(
    spec: SignalSpec,
    profile: PeripheralProfile,
    config: DeviceConfig,
    t0: int,
    n: int,
) -> np.ndarray:
    """Digital (signed) samples per active channel, clipped at the rails.

    Deterministic given (spec, config, seed); chunking does not change
    values. The spec must carry one component list per active channel.
    """
    if len(spec.channels) != len(config.active_channels):
        raise SignalError(
            f"spec covers {len(spec.channels)} channels, "
            f"config has {len(config.active_channels)}"
        )
    physical = physical_samples(spec, config.rate, t0, n)
    cal = profile.calibration("GEN", max(n, 1))
    return phys_to_dig_array(physical, cal)
