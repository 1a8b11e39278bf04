"""Pluggable analysis registry with the built-in channel-stats analyzer."""

from __future__ import annotations

from typing import Callable

import numpy as np

from neurodeck import edf

AnalyzerFn = Callable[[edf.SignalFile], dict[str, dict[str, dict]]]

_REGISTRY: dict[str, tuple[str, AnalyzerFn]] = {}


class AnalyzerError(Exception):
    pass


def register(analyzer_id: str, version: str, fn: AnalyzerFn) -> None:
    _REGISTRY[analyzer_id] = (version, fn)


def available() -> dict[str, str]:
    return {name: version for name, (version, _) in _REGISTRY.items()}


def run(analyzer_id: str, model: edf.SignalFile) -> tuple[str, dict]:
    if analyzer_id not in _REGISTRY:
        raise AnalyzerError(
            f"unknown analyzer {analyzer_id!r}; registered: {sorted(_REGISTRY)}"
        )
    version, fn = _REGISTRY[analyzer_id]
    return version, fn(model)


def channel_stats(model: edf.SignalFile) -> dict[str, dict[str, dict]]:
    """Per-channel mean, RMS, min, and max in physical units."""
    results: dict[str, dict[str, dict]] = {}
    for signal in model.signals:
        units = signal.header.physical_dimension or "1"
        physical = edf.dig_to_phys_array(np.array(signal.samples), signal.header)
        results[signal.header.label] = {
            "mean": {"value": float(physical.mean()), "units": units},
            "rms": {"value": float(np.sqrt(np.mean(physical**2))), "units": units},
            "min": {"value": float(physical.min()), "units": units},
            "max": {"value": float(physical.max()), "units": units},
        }
    return results


register("channel-stats", "1.0", channel_stats)
