import math

import numpy as np
import pytest

from pairsim import awg

# Values marked "oracle" were frozen from an independent 30-digit mpmath
# evaluation of the closed-form gaussian integrals.

PUMP = 193.4e12


def make_spec(shape="gaussian", loss_db=7.7, floor=0.0):
    return awg.AwgSpec(
        channel_count=16,
        channel_spacing_hz=200e9,
        passband_3db_hz=80e9,
        insertion_loss_db=loss_db,
        center_frequency_hz=PUMP,
        passband_shape=shape,
        crosstalk_floor=floor,
    )


def trapezoid_pair_overlap(spec, ch_s, ch_i, pump_hz, band_hz):
    """Dense-grid oracle for the anti-correlated overlap integral."""
    nu = np.linspace(pump_hz - band_hz / 2, pump_hz + band_hz / 2, 400_001)
    t_s = awg.channel_transmission(spec, ch_s, nu)
    t_i = awg.channel_transmission(spec, ch_i, 2 * pump_hz - nu)
    return np.trapezoid(t_s * t_i, nu) / band_hz


class TestChannelTransmission:
    def test_peak_value(self):
        spec = make_spec()
        center = awg.channel_center(spec, 3)
        # oracle: 10**(-0.77)
        assert awg.channel_transmission(spec, 3, center) == pytest.approx(
            0.169824365246174, rel=1e-12
        )

    def test_half_peak_at_half_width(self):
        spec = make_spec()
        center = awg.channel_center(spec, -2)
        peak = awg.channel_transmission(spec, -2, center)
        for sign in (-1, 1):
            value = awg.channel_transmission(spec, -2, center + sign * 40e9)
            assert value == pytest.approx(peak / 2, rel=1e-12)

    def test_suppression_at_one_spacing(self):
        spec = make_spec()
        center = awg.channel_center(spec, 0)
        peak = awg.channel_transmission(spec, 0, center)
        value = awg.channel_transmission(spec, 0, center + 200e9)
        # oracle: 2**(-(200/40)**2) = 2**-25
        assert value / peak == pytest.approx(2.98023223876953e-8, rel=1e-12)
        assert value / peak <= 1e-3

    def test_channel_out_of_range(self):
        spec = make_spec()
        with pytest.raises(ValueError):
            awg.channel_transmission(spec, 9, PUMP)
        awg.channel_transmission(spec, 8, PUMP)  # boundary is allowed

    def test_rectangular_shape(self):
        spec = make_spec(shape="rectangular", loss_db=0.0)
        center = awg.channel_center(spec, 1)
        assert awg.channel_transmission(spec, 1, center + 39.9e9) == 1.0
        assert awg.channel_transmission(spec, 1, center + 40.1e9) == 0.0

    def test_crosstalk_floor(self):
        spec = make_spec(floor=1e-4)
        center = awg.channel_center(spec, 0)
        far = awg.channel_transmission(spec, 0, center + 600e9)
        assert far == pytest.approx(spec.peak_transmittance * 1e-4, rel=1e-12)

    def test_vectorized(self):
        spec = make_spec()
        nu = np.linspace(PUMP - 1e12, PUMP + 1e12, 101)
        values = awg.channel_transmission(spec, 2, nu)
        assert values.shape == nu.shape
        assert np.all((values >= 0) & (values <= spec.peak_transmittance))


class TestPairTransmittance:
    def test_rectangular_symmetric_is_width_over_band(self):
        spec = make_spec(shape="rectangular", loss_db=0.0)
        band = spec.default_generation_band_hz
        value = awg.pair_transmittance(spec, 3, -3, PUMP, band)
        assert value == pytest.approx(spec.passband_3db_hz / band, rel=1e-9)

    def test_rectangular_matches_analytic_overlap_with_offset(self):
        # shifting the pump moves the mirrored passband by twice the shift
        spec = make_spec(shape="rectangular", loss_db=0.0)
        band = spec.default_generation_band_hz
        for shift in (0.0, 10e9, 25e9):
            value = awg.pair_transmittance(spec, 1, -1, PUMP + shift, band)
            overlap = max(spec.passband_3db_hz - abs(2 * shift), 0.0)
            assert value == pytest.approx(overlap / band, rel=1e-9, abs=1e-15)

    def test_gaussian_matches_trapezoid_oracle(self):
        spec = make_spec()
        band = spec.default_generation_band_hz
        value = awg.pair_transmittance(spec, 3, -3, PUMP, band)
        oracle = trapezoid_pair_overlap(spec, 3, -3, PUMP, band)
        assert value == pytest.approx(oracle, rel=1e-6)

    def test_asymmetric_pair_ratio(self):
        spec = make_spec()
        band = spec.default_generation_band_hz
        sym = awg.pair_transmittance(spec, 3, -3, PUMP, band)
        asym = awg.pair_transmittance(spec, 3, -2, PUMP, band)
        # oracle: exp(-ln2 * spacing**2 / (2 * (w/2)**2)) for mirrored
        # gaussians missing by one full channel spacing
        assert asym / sym == pytest.approx(1.72633491500622e-4, rel=1e-6)

    def test_reciprocity(self):
        spec = make_spec()
        for ch_s, ch_i in [(3, -3), (3, -2), (1, -4)]:
            a = awg.pair_transmittance(spec, ch_s, ch_i, PUMP)
            b = awg.pair_transmittance(spec, ch_i, ch_s, PUMP)
            assert a == pytest.approx(b, rel=1e-9, abs=1e-30)

    def test_mirror_channel_maximizes(self):
        spec = make_spec()
        values = {ch_i: awg.pair_transmittance(spec, 3, ch_i, PUMP) for ch_i in range(-8, 1)}
        assert max(values, key=values.get) == -3

    def test_insertion_loss_factors_out(self):
        lossy = make_spec(loss_db=7.7)
        lossless = make_spec(loss_db=0.0)
        ratio = awg.pair_transmittance(lossless, 3, -3, PUMP) / awg.pair_transmittance(
            lossy, 3, -3, PUMP
        )
        assert ratio == pytest.approx(10.0 ** (2 * 7.7 / 10.0), rel=1e-9)


class TestEffectiveBandwidths:
    def test_rectangular_pair_bandwidth(self):
        spec = make_spec(shape="rectangular")
        value = awg.effective_pair_bandwidth(spec, 3, -3, PUMP)
        assert value == pytest.approx(80e9, rel=1e-9)

    def test_gaussian_pair_bandwidth(self):
        spec = make_spec()
        value = awg.effective_pair_bandwidth(spec, 3, -3, PUMP)
        # oracle: (w/2) * sqrt(pi / (2 ln 2)) = 60.2153478231402 GHz, also
        # cross-checked against the dense trapezoid overlap below
        assert value == pytest.approx(60.2153478231402e9, rel=1e-9)
        band = spec.default_generation_band_hz
        oracle = trapezoid_pair_overlap(spec, 3, -3, PUMP, band) * band
        assert value * spec.peak_transmittance**2 == pytest.approx(oracle, rel=1e-6)

    def test_offset_channels_nearly_closed(self):
        spec = make_spec()
        value = awg.effective_pair_bandwidth(spec, 3, -2, PUMP)
        # oracle: 60.2153 GHz * 1.72633e-4 = 10.395 MHz
        assert value == pytest.approx(1.0395e7, rel=1e-4)
        assert value < 1e-3 * awg.effective_pair_bandwidth(spec, 3, -3, PUMP)

    def test_independent_of_generation_band_once_covered(self):
        # bands that fully contain the passband tails agree; a band whose edge
        # cuts into the tail (1.4 THz puts the edge 2.5 half-widths out) shows
        # exactly the truncated-tail deficit
        spec = make_spec()
        a = awg.effective_pair_bandwidth(spec, 3, -3, PUMP, 2.0e12)
        b = awg.effective_pair_bandwidth(spec, 3, -3, PUMP, 3.0e12)
        assert a == pytest.approx(b, rel=1e-8)
        truncated = awg.effective_pair_bandwidth(spec, 3, -3, PUMP, 1.4e12)
        assert truncated < a
        assert (a - truncated) / a == pytest.approx(1.57e-5, rel=0.05)

    def test_single_bandwidth(self):
        gaussian = make_spec()
        # oracle: (w/2) * sqrt(pi / ln 2)
        assert awg.effective_single_bandwidth(gaussian, 3) == pytest.approx(
            85.1573615544981e9, rel=1e-12
        )
        rect = make_spec(shape="rectangular")
        assert awg.effective_single_bandwidth(rect, 3) == 80e9


class TestSpecValidation:
    def test_passband_must_fit_spacing(self):
        with pytest.raises(ValueError):
            awg.AwgSpec(16, 200e9, 250e9, 7.7, PUMP)

    def test_negative_loss(self):
        with pytest.raises(ValueError):
            awg.AwgSpec(16, 200e9, 80e9, -1.0, PUMP)

    def test_bad_shape(self):
        with pytest.raises(ValueError):
            awg.AwgSpec(16, 200e9, 80e9, 7.7, PUMP, passband_shape="lorentzian")
