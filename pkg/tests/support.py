"""Shared builders for randomized codec models (seeded RNG and hypothesis)."""

from __future__ import annotations

import datetime
import random
import string

from hypothesis import strategies as st

from neurodeck.edf import (
    Annotation,
    Continuity,
    FileFormat,
    FileHeader,
    Signal,
    SignalFile,
    SignalHeader,
)

_LABEL_CHARS = string.ascii_uppercase + string.digits
_TEXT_CHARS = string.ascii_letters + string.digits + " _-"
_DURATIONS = (0.25, 0.5, 1.0, 2.0)


def random_model(rng: random.Random) -> SignalFile:
    """A valid, finalized SignalFile with randomized headers and samples."""
    fmt = rng.choice((FileFormat.EDF, FileFormat.BDF))
    continuity = rng.choice(
        (Continuity.PLAIN, Continuity.CONTINUOUS, Continuity.DISCONTINUOUS)
    )
    record_count = rng.randint(1, 4)
    record_duration = rng.choice(_DURATIONS)
    width_lo, width_hi = fmt.digital_limits

    signals = []
    for i in range(rng.randint(1, 4)):
        dig_min = rng.randint(width_lo, width_hi - 1)
        dig_max = rng.randint(dig_min + 1, width_hi)
        phys_min = float(rng.randint(-9999, 9998))
        phys_max = float(rng.randint(int(phys_min) + 1, 9999))
        spr = rng.randint(1, 8)
        samples = [rng.randint(dig_min, dig_max) for _ in range(spr * record_count)]
        suffix = "".join(rng.choice(_LABEL_CHARS) for _ in range(4))
        signals.append(
            Signal(
                SignalHeader(
                    label=f"SIG{i} {suffix}",
                    physical_min=phys_min,
                    physical_max=phys_max,
                    digital_min=dig_min,
                    digital_max=dig_max,
                    samples_per_record=spr,
                    physical_dimension=rng.choice(("uV", "mV", "")),
                    transducer=rng.choice(("", "AgAgCl electrode")),
                ),
                samples,
            )
        )

    annotations = []
    annotation_spr = 20
    if continuity is not Continuity.PLAIN and rng.random() < 0.8:
        onsets = sorted(
            round(rng.uniform(0, record_count * record_duration), 2)
            for _ in range(rng.randint(1, 3))
        )
        for onset in onsets:
            duration = round(rng.uniform(0.1, 2.0), 2) if rng.random() < 0.5 else None
            text = "".join(rng.choice(_TEXT_CHARS) for _ in range(rng.randint(0, 8)))
            annotations.append(Annotation(onset, duration, (text,)))
        # size the annotation channel so even a single record can hold everything
        from neurodeck.edf import encode_tal

        worst = max(
            len(encode_tal([Annotation(r * record_duration)]))
            for r in range(record_count)
        )
        worst += sum(len(encode_tal([a])) for a in annotations)
        annotation_spr = max(20, -(-worst // fmt.sample_width))

    header = FileHeader(
        format=fmt,
        patient_id="X X X X",
        recording_id="Startdate X X X X",
        start_date=datetime.date(rng.randint(1985, 2084), rng.randint(1, 12), rng.randint(1, 28)),
        start_time=datetime.time(rng.randint(0, 23), rng.randint(0, 59), rng.randint(0, 59)),
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


def models() -> st.SearchStrategy[SignalFile]:
    return st.integers(min_value=0, max_value=2**48).map(
        lambda seed: random_model(random.Random(seed))
    )


def annotation_texts() -> st.SearchStrategy[str]:
    alphabet = st.characters(
        min_codepoint=0x20, max_codepoint=0x2FFF, blacklist_characters="\x14\x15"
    )
    return st.text(alphabet=alphabet, max_size=12)


def annotations() -> st.SearchStrategy[Annotation]:
    onset = st.one_of(
        st.integers(min_value=-3600, max_value=3600).map(float),
        st.floats(
            min_value=-3600,
            max_value=3600,
            allow_nan=False,
            allow_infinity=False,
            allow_subnormal=False,
        ),
    )
    duration = st.one_of(
        st.none(),
        st.floats(
            min_value=0,
            max_value=600,
            allow_nan=False,
            allow_infinity=False,
            allow_subnormal=False,
        ),
    )
    texts = st.lists(annotation_texts(), min_size=1, max_size=3).map(tuple)
    return st.builds(Annotation, onset=onset, duration=duration, texts=texts)
