#!/usr/bin/env python3
"""Regenerate the hand-built golden EDF+ fixture.

Deliberately constructs the file byte-by-byte from the published EDF+
layout without importing anything from neurodeck, so the committed fixture
is an independent cross-check of the codec. Run from the repo root:

    python scripts/make_golden_fixture.py
"""

from __future__ import annotations

import json
import math
from pathlib import Path

OUT_DIR = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

RECORDS = 2
RECORD_DURATION = 1
SINE_SPR = 16
RAMP_SPR = 4
ANN_SPR = 20  # two-byte units


def pad(text: str, width: int) -> bytes:
    data = text.encode("ascii")
    assert len(data) <= width, (text, width)
    return data.ljust(width, b" ")


def main() -> None:
    # 16 samples/record sine, digital amplitude 1500 over [-2048, 2047]
    sine = [round(1500 * math.sin(2 * math.pi * k / SINE_SPR)) for k in range(SINE_SPR * RECORDS)]
    ramp = [100 * k for k in range(RAMP_SPR * RECORDS)]

    header = b""
    header += pad("0", 8)
    header += pad("X X X X", 80)
    header += pad("Startdate X X X X", 80)
    header += pad("02.01.23", 8)
    header += pad("09.30.00", 8)
    header += pad("1024", 8)  # 256 * (3 signals + 1)
    header += pad("EDF+C", 44)
    header += pad(str(RECORDS), 8)
    header += pad(str(RECORD_DURATION), 8)
    header += pad("3", 4)

    labels = ["EEG TP9", "EEG TP10", "EDF Annotations"]
    transducers = ["AgAgCl electrode", "AgAgCl electrode", ""]
    dimensions = ["uV", "uV", ""]
    phys_min = ["-1000", "-1000", "0"]
    phys_max = ["1000", "1000", "1"]
    dig_min = ["-2048", "-2048", "-32768"]
    dig_max = ["2047", "2047", "32767"]
    prefilter = ["HP:0.1Hz LP:75Hz", "HP:0.1Hz LP:75Hz", ""]
    spr = [str(SINE_SPR), str(RAMP_SPR), str(ANN_SPR)]
    reserved = ["", "", ""]
    for width, values in (
        (16, labels), (80, transducers), (8, dimensions), (8, phys_min),
        (8, phys_max), (8, dig_min), (8, dig_max), (80, prefilter),
        (8, spr), (32, reserved),
    ):
        for v in values:
            header += pad(v, width)
    assert len(header) == 1024

    body = b""
    for r in range(RECORDS):
        for value in sine[r * SINE_SPR : (r + 1) * SINE_SPR]:
            body += value.to_bytes(2, "little", signed=True)
        for value in ramp[r * RAMP_SPR : (r + 1) * RAMP_SPR]:
            body += value.to_bytes(2, "little", signed=True)
        tal = f"+{r}".encode() + b"\x14\x14\x00"
        if r == 0:
            tal += b"+0.5\x151\x14blink\x14\x00"
        body += tal.ljust(ANN_SPR * 2, b"\x00")

    OUT_DIR.mkdir(parents=True, exist_ok=True)
    (OUT_DIR / "golden_sine.edf").write_bytes(header + body)
    (OUT_DIR / "golden_sine.json").write_text(
        json.dumps(
            {
                "record_count": RECORDS,
                "record_duration": RECORD_DURATION,
                "signals": [
                    {"label": "EEG TP9", "samples_per_record": SINE_SPR, "samples": sine},
                    {"label": "EEG TP10", "samples_per_record": RAMP_SPR, "samples": ramp},
                ],
                "annotations": [{"onset": 0.5, "duration": 1, "texts": ["blink"]}],
            },
            indent=2,
        )
        + "\n"
    )
    print(f"wrote {OUT_DIR / 'golden_sine.edf'} ({len(header) + len(body)} bytes)")


if __name__ == "__main__":
    main()
