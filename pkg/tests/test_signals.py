"""Signal generator tests: determinism, calibration, analytic oracles."""

from __future__ import annotations

import numpy as np
import pytest

from neurodeck.edf import dig_to_phys_array
from neurodeck.protocol import DeviceConfig, builtin_profiles
from neurodeck.signals import (
    Component,
    SignalError,
    SignalSpec,
    generate_samples,
    physical_samples,
)

MUSE = builtin_profiles()["muse-like"]
CONFIG = DeviceConfig.for_profile(MUSE)
CAL = MUSE.calibration("X", 1)


def spec_of(*components: Component) -> SignalSpec:
    return SignalSpec.uniform(components, MUSE.channel_count, seed=7)


class TestGenerateSamples:
    def test_constant_zero_maps_to_midscale(self):
        got = generate_samples(spec_of(Component("constant", 0.0)), MUSE, CONFIG, 0, 64)
        assert (got == got[0, 0]).all()
        # the 12-bit midpoint of [-1000, 1000] uV lands within half an LSB of 0
        assert abs(dig_to_phys_array(got, CAL)).max() < 1000 * 2 / 4095

    def test_sine_starts_at_zero_phase(self):
        spec = spec_of(Component("sine", 100.0, frequency=10.0))
        got = generate_samples(spec, MUSE, CONFIG, 0, 1)
        assert abs(dig_to_phys_array(got, CAL)).max() < 0.5  # one LSB is ~0.49 uV

    def test_sine_rms_is_amplitude_over_sqrt2(self):
        spec = spec_of(Component("sine", 100.0, frequency=10.0))
        got = generate_samples(spec, MUSE, CONFIG, 0, 256)
        rms = float(np.sqrt(np.mean(dig_to_phys_array(got, CAL) ** 2)))
        assert rms == pytest.approx(100 / np.sqrt(2), rel=0.01)

    def test_nyquist_violation_raises(self):
        spec = spec_of(Component("sine", 100.0, frequency=128.0))
        with pytest.raises(SignalError, match="Nyquist"):
            generate_samples(spec, MUSE, CONFIG, 0, 8)

    def test_chunked_equals_one_shot(self):
        spec = spec_of(
            Component("sine", 80.0, frequency=12.0, phase=0.3),
            Component("white-noise", 20.0),
        )
        whole = generate_samples(spec, MUSE, CONFIG, 0, 120)
        parts = np.concatenate(
            [generate_samples(spec, MUSE, CONFIG, t0, 12) for t0 in range(0, 120, 12)],
            axis=1,
        )
        assert (whole == parts).all()

    def test_noise_is_seed_deterministic_and_seed_sensitive(self):
        base = spec_of(Component("white-noise", 50.0))
        again = spec_of(Component("white-noise", 50.0))
        other = SignalSpec.uniform([Component("white-noise", 50.0)], 4, seed=8)
        a = generate_samples(base, MUSE, CONFIG, 0, 256)
        b = generate_samples(again, MUSE, CONFIG, 0, 256)
        c = generate_samples(other, MUSE, CONFIG, 0, 256)
        assert (a == b).all()
        assert (a != c).any()

    def test_channels_get_independent_noise(self):
        got = generate_samples(spec_of(Component("white-noise", 50.0)), MUSE, CONFIG, 0, 64)
        assert (got[0] != got[1]).any()

    def test_oversized_amplitude_clips_at_rails(self):
        got = generate_samples(spec_of(Component("constant", 5000.0)), MUSE, CONFIG, 0, 4)
        assert (got == MUSE.digital_max).all()

    def test_channel_count_mismatch(self):
        spec = SignalSpec(channels=((Component("constant", 0.0),),))
        with pytest.raises(SignalError, match="channels"):
            generate_samples(spec, MUSE, CONFIG, 0, 4)


class TestSpecParsing:
    def test_all_channels_shorthand(self):
        spec = SignalSpec.from_dict(
            {"all_channels": [{"waveform": "sine", "amplitude": 10, "frequency": 5}], "seed": 3},
            channel_count=4,
        )
        assert len(spec.channels) == 4
        assert spec.seed == 3
        assert spec.channels[0][0].frequency == 5.0

    def test_explicit_channels(self):
        spec = SignalSpec.from_dict(
            {
                "channels": [
                    [{"waveform": "constant", "amplitude": 1}],
                    [{"waveform": "white-noise", "amplitude": 2}],
                ]
            },
            channel_count=2,
        )
        assert spec.channels[1][0].waveform == "white-noise"

    def test_bad_waveform_rejected(self):
        with pytest.raises(SignalError, match="waveform"):
            Component("triangle", 1.0)

    def test_negative_amplitude_rejected(self):
        with pytest.raises(SignalError, match="amplitude"):
            Component("sine", -1.0)


class TestPhysicalSamples:
    def test_components_superpose(self):
        spec = SignalSpec(
            channels=((Component("constant", 10.0), Component("constant", 5.0)),)
        )
        assert (physical_samples(spec, 256, 0, 8) == 15.0).all()

    def test_phase_shift(self):
        spec = SignalSpec(
            channels=((Component("sine", 1.0, frequency=1.0, phase=np.pi / 2),),)
        )
        assert physical_samples(spec, 256, 0, 1)[0, 0] == pytest.approx(1.0)
