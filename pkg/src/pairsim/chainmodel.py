"""Domain types and closed-form rate equations for a photon-pair experiment chain.

The chain runs from the coupling facet of a chip through one nonlinear
waveguide (where pairs are created by spontaneous four-wave mixing), passive
waveguide sections, a demultiplexer that splits signal and idler onto two
channels, per-channel filters, and finally two gated single-photon detectors.

All quantities are SI internally (meters, watts, hertz, seconds).  dB values
and bench units (cm, mW, GHz, ...) belong to the configuration boundary only.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Union

from scipy.integrate import quad

from . import awg as awg_mod
from .awg import AwgSpec

C_VACUUM = 299_792_458.0  # m/s

_LN10 = math.log(10.0)
_LN2 = math.log(2.0)

KIND_NONLINEAR = "nonlinear"
KIND_PASSIVE = "passive"

FILTER_SHAPES = ("rectangular", "gaussian")


class InvalidProbabilityError(ValueError):
    """A computed probability left [0, 1]; the operating point is out of range."""


# ---------------------------------------------------------------------------
# unit helpers


def db_to_linear(loss_db: float) -> float:
    """Power transmittance for a loss stated in dB: ``10**(-loss_db / 10)``."""
    return 10.0 ** (-loss_db / 10.0)


def db_to_neper(loss_db: float) -> float:
    """Natural (base-e) attenuation coefficient for a dB-scale one: ``loss * ln(10) / 10``."""
    return loss_db * _LN10 / 10.0


def effective_length(loss_db_per_m: float, length_m: float) -> float:
    """Loss-weighted interaction length ``(1 - exp(-a*L)) / a`` with a in nepers.

    Continuous in the lossless limit: below ``a*L = 1e-6`` the second-order
    series ``L - a*L**2 / 2`` is used to avoid cancellation, so the value
    tends to L as the loss tends to zero.
    """
    if loss_db_per_m < 0:
        raise ValueError("loss must be non-negative")
    if length_m < 0:
        raise ValueError("length must be non-negative")
    a = db_to_neper(loss_db_per_m)
    x = a * length_m
    if x < 1e-6:
        return length_m - a * length_m**2 / 2.0
    return (1.0 - math.exp(-x)) / a


def optimal_nonlinear_length(loss_db_per_m: float) -> float:
    """Length maximizing the pair rate at fixed loss: ``ln 2 / a`` (a in nepers)."""
    if loss_db_per_m <= 0:
        raise ValueError("loss must be positive for a finite optimum")
    return _LN2 / db_to_neper(loss_db_per_m)


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class WaveguideSegment:
    """One propagation section, either the nonlinear pair source or passive."""

    kind: str
    length_m: float
    loss_db_per_m: float = 0.0
    gamma_per_w_m: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in (KIND_NONLINEAR, KIND_PASSIVE):
            raise ValueError(f"kind must be '{KIND_NONLINEAR}' or '{KIND_PASSIVE}'")
        if self.length_m < 0:
            raise ValueError("length_m must be non-negative")
        if self.loss_db_per_m < 0:
            raise ValueError("loss_db_per_m must be non-negative")
        if self.gamma_per_w_m < 0:
            raise ValueError("gamma_per_w_m must be non-negative")
        if self.kind == KIND_PASSIVE and self.gamma_per_w_m != 0.0:
            raise ValueError("passive segments must have gamma_per_w_m = 0")

    @property
    def transmittance(self) -> float:
        """Single-photon power transmittance of the whole segment."""
        return db_to_linear(self.loss_db_per_m * self.length_m)

    @property
    def effective_length_m(self) -> float:
        return effective_length(self.loss_db_per_m, self.length_m)


@dataclass(frozen=True)
class PumpConfig:
    """Pulsed pump train.  Powers are coupled (in-waveguide) values."""

    wavelength_m: float
    rep_rate_hz: float
    pulse_fwhm_s: float
    average_power_w: float

    def __post_init__(self) -> None:
        for name in ("wavelength_m", "rep_rate_hz", "pulse_fwhm_s", "average_power_w"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.rep_rate_hz * self.pulse_fwhm_s > 1.0 + 1e-12:
            raise ValueError("duty cycle rep_rate * fwhm must not exceed 1")

    @property
    def frequency_hz(self) -> float:
        return C_VACUUM / self.wavelength_m

    @property
    def duty_cycle(self) -> float:
        return self.rep_rate_hz * self.pulse_fwhm_s


def peak_power(pump: PumpConfig) -> float:
    """Peak power of the rectangular-equivalent pulse: ``P / (R * dt)``."""
    duty = pump.duty_cycle
    if duty == 0:
        raise ValueError("rep_rate * fwhm must be nonzero")
    return pump.average_power_w / duty


@dataclass(frozen=True)
class FilterSpec:
    """A bandpass filter stage on one channel."""

    bandwidth_3db_hz: float
    insertion_loss_db: float = 0.0
    shape: str = "rectangular"
    center_frequency_hz: float | None = None

    def __post_init__(self) -> None:
        if self.bandwidth_3db_hz <= 0:
            raise ValueError("bandwidth_3db_hz must be positive")
        if self.insertion_loss_db < 0:
            raise ValueError("insertion_loss_db must be non-negative (peak in (0, 1])")
        if self.shape not in FILTER_SHAPES:
            raise ValueError(f"shape must be one of {FILTER_SHAPES}")
        if self.center_frequency_hz is not None and self.center_frequency_hz <= 0:
            raise ValueError("center_frequency_hz must be positive")

    @property
    def peak_transmittance(self) -> float:
        return db_to_linear(self.insertion_loss_db)

    @property
    def equivalent_bandwidth_hz(self) -> float:
        """Equivalent noise bandwidth of the unit-peak shape."""
        if self.shape == "gaussian":
            return (self.bandwidth_3db_hz / 2.0) * math.sqrt(math.pi / _LN2)
        return self.bandwidth_3db_hz

    def _unit_shape(self, detuning_hz: float) -> float:
        half = self.bandwidth_3db_hz / 2.0
        if self.shape == "gaussian":
            return 2.0 ** (-((detuning_hz / half) ** 2))
        return 1.0 if abs(detuning_hz) <= half else 0.0


@dataclass(frozen=True)
class DetectorConfig:
    """Gated threshold (non-photon-number-resolving) single-photon detector."""

    quantum_efficiency: float
    gate_rate_hz: float
    gate_width_s: float
    dark_rate_hz: float = 0.0
    dead_time_s: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.quantum_efficiency <= 1.0:
            raise ValueError("quantum_efficiency must be in [0, 1]")
        if self.gate_rate_hz <= 0:
            raise ValueError("gate_rate_hz must be positive")
        if self.gate_width_s <= 0:
            raise ValueError("gate_width_s must be positive")
        if self.dark_rate_hz < 0:
            raise ValueError("dark_rate_hz must be non-negative")
        if self.dead_time_s < 0:
            raise ValueError("dead_time_s must be non-negative")
        if not 0.0 <= self.dark_prob_per_gate < 1.0:
            raise ValueError("dark probability per gate d / gate_rate must be in [0, 1)")

    @property
    def dark_prob_per_gate(self) -> float:
        return self.dark_rate_hz / self.gate_rate_hz

    @property
    def dead_gates(self) -> int:
        """Dead time expressed as a whole number of gates."""
        return round(self.dead_time_s * self.gate_rate_hz)


@dataclass(frozen=True)
class NoiseCoefficients:
    """Phenomenological noise photons per pulse in one collection channel.

    ``offset_photons + slope_per_watt * P_peak``, referred to the nonlinear
    segment output.  Together with the quadratic pair term this makes the
    singles flux a second-order polynomial in peak power.
    """

    offset_photons: float = 0.0
    slope_per_watt: float = 0.0

    def __post_init__(self) -> None:
        if self.offset_photons < 0 or self.slope_per_watt < 0:
            raise ValueError("noise coefficients must be non-negative")

    def at_peak_power(self, peak_power_w: float) -> float:
        return self.offset_photons + self.slope_per_watt * peak_power_w


@dataclass(frozen=True)
class FilterDemux:
    """Demultiplexer realized by a pair of bandpass filters (signal, idler)."""

    signal: FilterSpec
    idler: FilterSpec


@dataclass(frozen=True)
class AwgDemux:
    """Demultiplexer realized by an AWG with one selected output channel per arm."""

    spec: AwgSpec
    signal_channel: int
    idler_channel: int
    generation_band_hz: float | None = None

    def __post_init__(self) -> None:
        awg_mod.channel_center(self.spec, self.signal_channel)
        awg_mod.channel_center(self.spec, self.idler_channel)
        if self.generation_band_hz is not None and self.generation_band_hz <= 0:
            raise ValueError("generation_band_hz must be positive")


Demux = Union[FilterDemux, AwgDemux]


@dataclass(frozen=True)
class ExperimentChain:
    """Ordered component chain from the coupling facet to the two detectors."""

    coupling_loss_per_facet_db: float
    segments: tuple[WaveguideSegment, ...]
    demux: Demux
    detector_signal: DetectorConfig
    detector_idler: DetectorConfig
    post_filters_signal: tuple[FilterSpec, ...] = ()
    post_filters_idler: tuple[FilterSpec, ...] = ()
    noise_signal: NoiseCoefficients = NoiseCoefficients()
    noise_idler: NoiseCoefficients = NoiseCoefficients()

    def __post_init__(self) -> None:
        if self.coupling_loss_per_facet_db < 0:
            raise ValueError("coupling_loss_per_facet_db must be non-negative")
        n_nonlinear = sum(1 for s in self.segments if s.kind == KIND_NONLINEAR)
        if n_nonlinear != 1:
            raise ValueError(f"chain must contain exactly one nonlinear segment, got {n_nonlinear}")

    @property
    def nonlinear_index(self) -> int:
        return next(i for i, s in enumerate(self.segments) if s.kind == KIND_NONLINEAR)

    @property
    def nonlinear_segment(self) -> WaveguideSegment:
        return self.segments[self.nonlinear_index]

    @property
    def upstream_segments(self) -> tuple[WaveguideSegment, ...]:
        return self.segments[: self.nonlinear_index]

    @property
    def downstream_segments(self) -> tuple[WaveguideSegment, ...]:
        return self.segments[self.nonlinear_index + 1 :]


@dataclass(frozen=True)
class RatePrediction:
    """Closed-form rates for one chain and pump operating point.

    Pair rates are per pulse; click and coincidence figures are per gate.
    ``car`` is NaN when no accidental mechanism exists (nothing ever clicks).
    """

    peak_power_w: float
    pair_bandwidth_hz: float
    mu_pair_generated: float
    mu_pair_out: float
    mu_signal: float
    mu_idler: float
    p_click_signal: float
    p_click_idler: float
    p_coincidence: float
    p_accidental: float
    car: float
    duty_signal: float
    duty_idler: float


@dataclass(frozen=True)
class GateStatistics:
    """Exact per-clock-gate expectations for Poisson pair statistics.

    These are what an ideal counting run converges to, including threshold
    (saturation) effects that the linearized rate formulas neglect.  Dark
    counts are suppressed in dead gates, and the dead-time states of the two
    detectors are treated as independent.
    """

    p_click_signal: float
    p_click_idler: float
    p_coincidence: float
    p_accidental: float
    duty_signal: float
    duty_idler: float

    @property
    def car(self) -> float:
        if self.p_accidental == 0.0:
            return math.nan
        return self.p_coincidence / self.p_accidental


# ---------------------------------------------------------------------------
# rate equations


def pair_generation_rate_at_power(
    segment: WaveguideSegment,
    bandwidth_hz: float,
    pulse_fwhm_s: float,
    peak_power_w: float,
) -> float:
    """Pairs per pulse at the nonlinear-segment output.

    ``dnu * dt * (gamma * P_peak * L_eff)**2 * eta**2`` where eta is the
    segment transmittance, which both photons of a pair must survive.
    Quadratic in peak power and in gamma.
    """
    if segment.kind != KIND_NONLINEAR:
        raise ValueError("pair generation requires a nonlinear segment")
    amplitude = segment.gamma_per_w_m * peak_power_w * segment.effective_length_m
    return bandwidth_hz * pulse_fwhm_s * amplitude**2 * segment.transmittance**2


def pair_generation_rate(pump: PumpConfig, segment: WaveguideSegment, bandwidth_hz: float) -> float:
    """Pair rate for a pump train, using the pump peak power directly."""
    return pair_generation_rate_at_power(
        segment, bandwidth_hz, pump.pulse_fwhm_s, peak_power(pump)
    )


def pump_peak_power_at_source(chain: ExperimentChain, pump: PumpConfig) -> float:
    """Pump peak power at the nonlinear segment input.

    Pump powers are coupled (in-waveguide) values, so only passive segments
    placed before the nonlinear one attenuate the pump.
    """
    eta = 1.0
    for seg in chain.upstream_segments:
        eta *= seg.transmittance
    return peak_power(pump) * eta


def downstream_passive_transmittance(chain: ExperimentChain) -> float:
    """Single-photon transmittance of the waveguide sections after the source."""
    eta = 1.0
    for seg in chain.downstream_segments:
        eta *= seg.transmittance
    return eta


def chain_transmittances(chain: ExperimentChain) -> tuple[float, float]:
    """Per-channel optical transmittance, excluding detector efficiency and gating.

    Product of the output facet coupling, passive segments downstream of the
    nonlinear segment, the demux channel peak, and any post-filter stages.
    """
    eta_common = db_to_linear(chain.coupling_loss_per_facet_db)
    eta_common *= downstream_passive_transmittance(chain)
    if isinstance(chain.demux, AwgDemux):
        eta_s = eta_common * chain.demux.spec.peak_transmittance
        eta_i = eta_common * chain.demux.spec.peak_transmittance
    else:
        eta_s = eta_common * chain.demux.signal.peak_transmittance
        eta_i = eta_common * chain.demux.idler.peak_transmittance
    for f in chain.post_filters_signal:
        eta_s *= f.peak_transmittance
    for f in chain.post_filters_idler:
        eta_i *= f.peak_transmittance
    return eta_s, eta_i


def _mirrored_filter_pair_width(
    signal: FilterSpec, idler: FilterSpec, mirror_offset_hz: float
) -> float:
    """Equivalent width of the overlap between a passband and a mirrored one.

    Computes ``integral f_s(x) * f_i(x - offset) dx`` of the unit-peak shapes,
    where offset is how far the mirrored idler passband center lands from the
    signal passband center (zero for energy-matched channels).
    """
    if signal.shape == "rectangular" and idler.shape == "rectangular":
        lo = max(-signal.bandwidth_3db_hz / 2.0, mirror_offset_hz - idler.bandwidth_3db_hz / 2.0)
        hi = min(signal.bandwidth_3db_hz / 2.0, mirror_offset_hz + idler.bandwidth_3db_hz / 2.0)
        return max(hi - lo, 0.0)
    span = 4.0 * (signal.bandwidth_3db_hz + idler.bandwidth_3db_hz) + abs(mirror_offset_hz)
    points = sorted(
        p
        for p in (
            -signal.bandwidth_3db_hz / 2.0,
            signal.bandwidth_3db_hz / 2.0,
            mirror_offset_hz - idler.bandwidth_3db_hz / 2.0,
            mirror_offset_hz + idler.bandwidth_3db_hz / 2.0,
            0.0,
            mirror_offset_hz,
        )
        if -span < p < span
    )
    value, _ = quad(
        lambda x: signal._unit_shape(x) * idler._unit_shape(x - mirror_offset_hz),
        -span,
        span,
        points=points,
        limit=400,
        epsabs=1e-30,
        epsrel=1e-9,
    )
    return value


def collection_bandwidths(chain: ExperimentChain, pump: PumpConfig) -> tuple[float, float, float]:
    """(pair, signal-single, idler-single) equivalent collection bandwidths.

    The pair bandwidth is the overlap of one demux passband with the mirror
    image of the other under perfect spectral anti-correlation; the single
    bandwidths are each channel's own equivalent noise bandwidth.  Post
    filters are assumed spectrally broader than the demux channels and only
    clamp these widths (their insertion loss enters the transmittance).
    """
    if isinstance(chain.demux, AwgDemux):
        d = chain.demux
        pair_bw = awg_mod.effective_pair_bandwidth(
            d.spec, d.signal_channel, d.idler_channel, pump.frequency_hz, d.generation_band_hz
        )
        single_s = awg_mod.effective_single_bandwidth(d.spec, d.signal_channel)
        single_i = awg_mod.effective_single_bandwidth(d.spec, d.idler_channel)
    else:
        sig, idl = chain.demux.signal, chain.demux.idler
        offset = 0.0
        if sig.center_frequency_hz is not None and idl.center_frequency_hz is not None:
            mirrored_idler = 2.0 * pump.frequency_hz - idl.center_frequency_hz
            offset = mirrored_idler - sig.center_frequency_hz
        pair_bw = _mirrored_filter_pair_width(sig, idl, offset)
        single_s = sig.equivalent_bandwidth_hz
        single_i = idl.equivalent_bandwidth_hz
    for f in chain.post_filters_signal:
        pair_bw = min(pair_bw, f.bandwidth_3db_hz)
        single_s = min(single_s, f.bandwidth_3db_hz)
    for f in chain.post_filters_idler:
        pair_bw = min(pair_bw, f.bandwidth_3db_hz)
        single_i = min(single_i, f.bandwidth_3db_hz)
    return pair_bw, single_s, single_i


def singles_rate(chain: ExperimentChain, pump: PumpConfig) -> tuple[float, float]:
    """Photons per pulse in each collection channel at the nonlinear-segment output.

    Quadratic pair term plus the configured linear noise slope and constant
    offset: ``mu_channel = mu_pairs(P) + n1 * P + n0``.  The pair term uses
    each channel's own collection bandwidth, which coincides with the pair
    bandwidth for matched rectangular channels.
    """
    p_eff = pump_peak_power_at_source(chain, pump)
    _, bw_s, bw_i = collection_bandwidths(chain, pump)
    seg = chain.nonlinear_segment
    mu_s = pair_generation_rate_at_power(seg, bw_s, pump.pulse_fwhm_s, p_eff)
    mu_i = pair_generation_rate_at_power(seg, bw_i, pump.pulse_fwhm_s, p_eff)
    return (
        mu_s + chain.noise_signal.at_peak_power(p_eff),
        mu_i + chain.noise_idler.at_peak_power(p_eff),
    )


def gate_duty(p_click: float, dead_time_s: float, gate_rate_hz: float) -> float:
    """Steady-state fraction of gates that are active, given a dead time.

    Every click disables the next D = round(dead_time * gate_rate) gates, so
    the dead fraction is the per-clock-gate click rate (the supplied active
    click probability scaled by the duty itself) times D.  The balance
    ``duty = 1 - duty * p_click * D`` has the closed-form fixed point below.
    """
    if not 0.0 <= p_click <= 1.0:
        raise ValueError("p_click must be a probability")
    if dead_time_s < 0 or gate_rate_hz <= 0:
        raise ValueError("dead_time_s must be >= 0 and gate_rate_hz > 0")
    dead_gates = round(dead_time_s * gate_rate_hz)
    return 1.0 / (1.0 + p_click * dead_gates)


def _active_click_probabilities(chain: ExperimentChain, pump: PumpConfig) -> tuple[float, float]:
    """Per-active-gate click probabilities, before the gate-duty factor."""
    mu_s, mu_i = singles_rate(chain, pump)
    eta_s, eta_i = chain_transmittances(chain)
    p_s = eta_s * chain.detector_signal.quantum_efficiency * mu_s
    p_i = eta_i * chain.detector_idler.quantum_efficiency * mu_i
    p_s += chain.detector_signal.dark_prob_per_gate
    p_i += chain.detector_idler.dark_prob_per_gate
    for name, p in (("signal", p_s), ("idler", p_i)):
        if p > 1.0:
            raise InvalidProbabilityError(f"{name} click probability {p:.4g} exceeds 1")
    return p_s, p_i


def gate_duties(chain: ExperimentChain, pump: PumpConfig) -> tuple[float, float]:
    """Steady-state active-gate fractions of the two detectors."""
    p_s, p_i = _active_click_probabilities(chain, pump)
    det_s, det_i = chain.detector_signal, chain.detector_idler
    return (
        gate_duty(p_s, det_s.dead_time_s, det_s.gate_rate_hz),
        gate_duty(p_i, det_i.dead_time_s, det_i.gate_rate_hz),
    )


def click_probabilities(chain: ExperimentChain, pump: PumpConfig) -> tuple[float, float]:
    """Per-gate click probabilities in the linearized small-mu regime.

    ``p = eta_total * mu_channel + p_dark`` with the total efficiency
    containing the optical transmittance, the detector quantum efficiency and
    the gate duty.
    """
    mu_s, mu_i = singles_rate(chain, pump)
    eta_s, eta_i = chain_transmittances(chain)
    duty_s, duty_i = gate_duties(chain, pump)
    p_s = eta_s * chain.detector_signal.quantum_efficiency * duty_s * mu_s
    p_i = eta_i * chain.detector_idler.quantum_efficiency * duty_i * mu_i
    p_s += chain.detector_signal.dark_prob_per_gate
    p_i += chain.detector_idler.dark_prob_per_gate
    for name, p in (("signal", p_s), ("idler", p_i)):
        if p > 1.0:
            raise InvalidProbabilityError(f"{name} click probability {p:.4g} exceeds 1")
    return p_s, p_i


def car_estimate(chain: ExperimentChain, pump: PumpConfig) -> float:
    """Coincidence-to-accidental ratio of the chain.

    True-pair coincidence probability over the accidental probability of two
    statistically independent clicks, plus one: the accidental bed also sits
    under the coincidence peak.
    """
    p_s, p_i = click_probabilities(chain, pump)
    if p_s == 0.0 or p_i == 0.0:
        raise ValueError("CAR undefined: a channel never clicks")
    pair_bw, _, _ = collection_bandwidths(chain, pump)
    mu_pair = pair_generation_rate_at_power(
        chain.nonlinear_segment,
        pair_bw,
        pump.pulse_fwhm_s,
        pump_peak_power_at_source(chain, pump),
    )
    eta_s, eta_i = chain_transmittances(chain)
    duty_s, duty_i = gate_duties(chain, pump)
    eta_s_total = eta_s * chain.detector_signal.quantum_efficiency * duty_s
    eta_i_total = eta_i * chain.detector_idler.quantum_efficiency * duty_i
    p_true = eta_s_total * eta_i_total * mu_pair
    return 1.0 + p_true / (p_s * p_i)


def pair_rate_from_counts(
    coincidence_rate_hz: float,
    accidental_rate_hz: float,
    rep_rate_hz: float,
    eta_total_signal: float,
    eta_total_idler: float,
) -> float:
    """Pairs per pulse inferred from raw counting rates.

    ``(D_c - D_ca) / (R * eta_s * eta_i)`` with per-channel total
    efficiencies.  A negative result (accidentals exceeding coincidences) is
    returned as-is with a warning rather than clamped, so callers can see
    non-physical inputs.
    """
    if coincidence_rate_hz < 0 or accidental_rate_hz < 0:
        raise ValueError("count rates must be non-negative")
    if rep_rate_hz <= 0:
        raise ValueError("rep_rate_hz must be positive")
    for name, eta in (("eta_total_signal", eta_total_signal), ("eta_total_idler", eta_total_idler)):
        if not 0.0 < eta <= 1.0:
            raise ValueError(f"{name} must be in (0, 1]")
    mu = (coincidence_rate_hz - accidental_rate_hz) / (
        rep_rate_hz * eta_total_signal * eta_total_idler
    )
    if mu < 0:
        warnings.warn(
            "accidental rate exceeds coincidence rate; returning a non-physical "
            "negative pair rate",
            RuntimeWarning,
            stacklevel=2,
        )
    return mu


def _check_gate_alignment(chain: ExperimentChain, pump: PumpConfig) -> None:
    for name, det in (("signal", chain.detector_signal), ("idler", chain.detector_idler)):
        if not math.isclose(det.gate_rate_hz, pump.rep_rate_hz, rel_tol=1e-9):
            raise ValueError(
                f"{name} detector gate rate {det.gate_rate_hz} Hz must match the "
                f"pump repetition rate {pump.rep_rate_hz} Hz (one gate per pulse)"
            )


def predict(chain: ExperimentChain, pump: PumpConfig) -> RatePrediction:
    """Full analytic pipeline for one operating point."""
    _check_gate_alignment(chain, pump)
    p_eff = pump_peak_power_at_source(chain, pump)
    pair_bw, _, _ = collection_bandwidths(chain, pump)
    seg = chain.nonlinear_segment
    mu_pair = pair_generation_rate_at_power(seg, pair_bw, pump.pulse_fwhm_s, p_eff)
    eta_s, eta_i = chain_transmittances(chain)
    mu_signal, mu_idler = singles_rate(chain, pump)
    duty_s, duty_i = gate_duties(chain, pump)
    p_s, p_i = click_probabilities(chain, pump)
    eta_s_total = eta_s * chain.detector_signal.quantum_efficiency * duty_s
    eta_i_total = eta_i * chain.detector_idler.quantum_efficiency * duty_i
    p_true = eta_s_total * eta_i_total * mu_pair
    p_acc = p_s * p_i
    car = 1.0 + p_true / p_acc if p_acc > 0.0 else math.nan
    return RatePrediction(
        peak_power_w=p_eff,
        pair_bandwidth_hz=pair_bw,
        mu_pair_generated=mu_pair,
        mu_pair_out=mu_pair * eta_s * eta_i,
        mu_signal=mu_signal,
        mu_idler=mu_idler,
        p_click_signal=p_s,
        p_click_idler=p_i,
        p_coincidence=p_true,
        p_accidental=p_acc,
        car=car,
        duty_signal=duty_s,
        duty_idler=duty_i,
    )


def expected_gate_statistics(chain: ExperimentChain, pump: PumpConfig) -> GateStatistics:
    """Exact per-clock-gate click and coincidence expectations.

    For Poisson pair numbers the photon causes on the two detectors decompose
    into independent Poisson streams (pairs surviving both channels, pairs
    surviving one, and noise photons), which gives closed forms for the
    threshold-detector click and same-gate coincidence probabilities.  These
    are the quantities a long counting run estimates, and they are what the
    stochastic simulator is validated against.
    """
    _check_gate_alignment(chain, pump)
    p_eff = pump_peak_power_at_source(chain, pump)
    pair_bw, _, _ = collection_bandwidths(chain, pump)
    seg = chain.nonlinear_segment
    mu_pair = pair_generation_rate_at_power(seg, pair_bw, pump.pulse_fwhm_s, p_eff)
    mu_signal, mu_idler = singles_rate(chain, pump)
    eta_s, eta_i = chain_transmittances(chain)
    eta_s_end = eta_s * chain.detector_signal.quantum_efficiency
    eta_i_end = eta_i * chain.detector_idler.quantum_efficiency
    pd_s = chain.detector_signal.dark_prob_per_gate
    pd_i = chain.detector_idler.dark_prob_per_gate

    q_s = math.exp(-eta_s_end * mu_signal)  # no photon cause on the signal arm
    q_i = math.exp(-eta_i_end * mu_idler)
    p_active_s = 1.0 - q_s * (1.0 - pd_s)
    p_active_i = 1.0 - q_i * (1.0 - pd_i)
    det_s, det_i = chain.detector_signal, chain.detector_idler
    duty_s = gate_duty(p_active_s, det_s.dead_time_s, det_s.gate_rate_hz)
    duty_i = gate_duty(p_active_i, det_i.dead_time_s, det_i.gate_rate_hz)

    # pairs whose both photons reach the detectors couple the two arms
    joint_excess = q_s * q_i * (1.0 - pd_s) * (1.0 - pd_i) * math.expm1(
        mu_pair * eta_s_end * eta_i_end
    )
    p_joint_active = p_active_s * p_active_i + joint_excess
    return GateStatistics(
        p_click_signal=duty_s * p_active_s,
        p_click_idler=duty_i * p_active_i,
        p_coincidence=duty_s * duty_i * p_joint_active,
        p_accidental=duty_s * duty_i * p_active_s * p_active_i,
        duty_signal=duty_s,
        duty_idler=duty_i,
    )
