"""Arrayed-waveguide-grating demultiplexer model.

Provides per-channel transmission spectra and the effective transmittance
seen by spectrally anti-correlated photon pairs.  A pair created at signal
frequency nu has its partner at 2*nu_pump - nu (energy conservation), so the
joint collection efficiency of a channel pair is the overlap integral of one
passband with the mirror image of the other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

_LN2 = math.log(2.0)

PASSBAND_SHAPES = ("gaussian", "rectangular")


@dataclass(frozen=True)
class AwgSpec:
    """Static description of an arrayed waveguide grating.

    Channel k is centered at ``center_frequency_hz + k * channel_spacing_hz``
    with k a signed offset from the center port (k = 0).  The gaussian
    passband is ``peak * 2**(-((nu - nu_k) / (passband_3db_hz / 2))**2)`` so
    transmission is exactly half of peak at +/- half the 3-dB width.
    """

    channel_count: int
    channel_spacing_hz: float
    passband_3db_hz: float
    insertion_loss_db: float
    center_frequency_hz: float
    passband_shape: str = "gaussian"
    crosstalk_floor: float = 0.0  # linear, relative to channel peak

    def __post_init__(self) -> None:
        if self.channel_count < 2:
            raise ValueError(f"channel_count must be >= 2, got {self.channel_count}")
        if self.channel_spacing_hz <= 0:
            raise ValueError("channel_spacing_hz must be positive")
        if self.passband_3db_hz <= 0:
            raise ValueError("passband_3db_hz must be positive")
        if self.passband_3db_hz >= self.channel_spacing_hz:
            raise ValueError(
                "passband_3db_hz must be smaller than channel_spacing_hz "
                f"({self.passband_3db_hz} >= {self.channel_spacing_hz})"
            )
        if self.insertion_loss_db < 0:
            raise ValueError("insertion_loss_db must be non-negative")
        if self.center_frequency_hz <= 0:
            raise ValueError("center_frequency_hz must be positive")
        if self.passband_shape not in PASSBAND_SHAPES:
            raise ValueError(f"passband_shape must be one of {PASSBAND_SHAPES}")
        if not 0.0 <= self.crosstalk_floor < 1.0:
            raise ValueError("crosstalk_floor must be in [0, 1)")

    @property
    def peak_transmittance(self) -> float:
        return 10.0 ** (-self.insertion_loss_db / 10.0)

    @property
    def default_generation_band_hz(self) -> float:
        # +/- 4 channel spacings around the pump
        return 8.0 * self.channel_spacing_hz


def channel_center(spec: AwgSpec, channel: int) -> float:
    """Center frequency of a channel given as a signed offset from the center port."""
    if abs(channel) > spec.channel_count / 2:
        raise ValueError(
            f"channel offset {channel} out of range for {spec.channel_count} channels"
        )
    return spec.center_frequency_hz + channel * spec.channel_spacing_hz


def _shape(spec: AwgSpec, detuning_hz):
    """Unit-peak passband shape versus detuning from the channel center."""
    half_width = spec.passband_3db_hz / 2.0
    if spec.passband_shape == "gaussian":
        value = np.exp2(-np.square(np.asarray(detuning_hz, dtype=float) / half_width))
    else:
        value = (np.abs(np.asarray(detuning_hz, dtype=float)) <= half_width).astype(float)
    if spec.crosstalk_floor > 0.0:
        value = np.maximum(value, spec.crosstalk_floor)
    return value


def channel_transmission(spec: AwgSpec, channel: int, frequency_hz):
    """Power transmittance of one output channel at the given frequency.

    Accepts a scalar or an array of frequencies.  The peak equals
    ``10**(-insertion_loss_db / 10)`` at the channel center.
    """
    center = channel_center(spec, channel)
    value = spec.peak_transmittance * _shape(spec, np.asarray(frequency_hz, dtype=float) - center)
    if np.ndim(frequency_hz) == 0:
        return float(value)
    return value


def _band_edges(spec: AwgSpec, pump_frequency_hz: float, generation_band_hz: float | None):
    band = generation_band_hz if generation_band_hz is not None else spec.default_generation_band_hz
    if band <= 0:
        raise ValueError("generation band must be positive")
    return pump_frequency_hz - band / 2.0, pump_frequency_hz + band / 2.0, band


def pair_transmittance(
    spec: AwgSpec,
    signal_channel: int,
    idler_channel: int,
    pump_frequency_hz: float,
    generation_band_hz: float | None = None,
) -> float:
    """Joint collection probability for an anti-correlated photon pair.

    The joint spectrum is taken as perfectly anti-correlated and flat over the
    generation band, so the result is

        (1 / band) * integral T_s(nu) * T_i(2*nu_p - nu) d nu

    evaluated by adaptive quadrature to a relative tolerance of 1e-9.
    """
    _, _, band = _band_edges(spec, pump_frequency_hz, generation_band_hz)
    center_s = channel_center(spec, signal_channel)
    center_i = channel_center(spec, idler_channel)
    mirrored_i = 2.0 * pump_frequency_hz - center_i
    peak2 = spec.peak_transmittance**2

    # integrate in GHz of detuning from the pump: absolute optical
    # frequencies are ~2e14 Hz and destroy the quadrature conditioning
    ghz = 1e9
    d_s = (center_s - pump_frequency_hz) / ghz
    d_i = (mirrored_i - pump_frequency_hz) / ghz
    lo, hi = -band / (2.0 * ghz), band / (2.0 * ghz)

    def integrand(x: float) -> float:
        nu_rel = x * ghz
        return float(_shape(spec, nu_rel - (center_s - pump_frequency_hz))) * float(
            _shape(spec, nu_rel - (mirrored_i - pump_frequency_hz))
        )

    half_width = spec.passband_3db_hz / (2.0 * ghz)
    breakpoints = sorted(
        {
            p
            for c in (d_s, d_i, 0.5 * (d_s + d_i))
            for p in (c - half_width, c, c + half_width)
            if lo < p < hi
        }
    )
    value, _ = quad(
        integrand,
        lo,
        hi,
        points=breakpoints or None,
        limit=400,
        epsabs=1e-30,
        epsrel=1e-9,
    )
    return peak2 * value * ghz / band


def effective_pair_bandwidth(
    spec: AwgSpec,
    signal_channel: int,
    idler_channel: int,
    pump_frequency_hz: float,
    generation_band_hz: float | None = None,
) -> float:
    """Equivalent rectangular bandwidth seen by pairs, insertion loss factored out.

    ``pair_transmittance * band / (peak_s * peak_i)``.  For mirrored
    rectangular passbands this equals the 3-dB width itself.
    """
    _, _, band = _band_edges(spec, pump_frequency_hz, generation_band_hz)
    t_pair = pair_transmittance(
        spec, signal_channel, idler_channel, pump_frequency_hz, generation_band_hz
    )
    return t_pair * band / spec.peak_transmittance**2


def effective_single_bandwidth(spec: AwgSpec, channel: int) -> float:
    """Equivalent noise bandwidth of one channel: integral of the unit-peak shape.

    Rectangular passbands give the 3-dB width; gaussian passbands give
    ``(w/2) * sqrt(pi / ln 2)``.  Computed in closed form (the crosstalk floor,
    when set, is unbounded in frequency and is deliberately excluded here).
    """
    channel_center(spec, channel)  # range check
    half_width = spec.passband_3db_hz / 2.0
    if spec.passband_shape == "gaussian":
        return half_width * math.sqrt(math.pi / _LN2)
    return spec.passband_3db_hz
