"""Per-pulse stochastic counting oracle.

Simulates every pump pulse of a counting run: pair creation in the nonlinear
segment, loss on each arm, noise photons, dark counts, detector gating with
dead time.  Counts singles, same-gate coincidences and offset-gate
accidentals exactly as a time-interval analyzer would, independently of the
closed-form rate model.

Pulses are processed in fixed-size blocks, each with its own
counter-based random stream derived from (seed, block index).  The block
decomposition never depends on the worker count, so results are bit-identical
for any number of threads.  Dead-time bookkeeping is sequential inside a
block and resets at block boundaries; blocks are much longer than any
realistic dead time, which keeps the boundary effect far below statistical
resolution.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import awg as awg_mod
from . import chainmodel as cm
from .chainmodel import AwgDemux, ExperimentChain, PumpConfig

_BLOCK_SIZE = 1_000_000

PAIR_STATISTICS = ("poisson", "thermal")

SWEEP_VARIABLES = ("l_si", "l_siox", "pp", "awg_loss", "dark")


@dataclass(frozen=True)
class TrialConfig:
    """Counting-run parameters.

    ``accidental_offset`` is the gate separation used for the accidental
    (side-peak) coincidence window.  ``thermal_modes`` only matters for the
    multimode-thermal pair-number option; the default of 24 matches a
    time-bandwidth product of order twenty where thermal statistics are
    already close to Poisson.
    """

    n_pulses: int
    seed: int = 0
    accidental_offset: int = 1
    dead_time_enabled: bool = True
    pair_statistics: str = "poisson"
    thermal_modes: int = 24

    def __post_init__(self) -> None:
        if self.n_pulses < 1:
            raise ValueError("n_pulses must be >= 1")
        if self.accidental_offset < 1:
            raise ValueError("accidental_offset must be >= 1")
        if self.pair_statistics not in PAIR_STATISTICS:
            raise ValueError(f"pair_statistics must be one of {PAIR_STATISTICS}")
        if self.thermal_modes < 1:
            raise ValueError("thermal_modes must be >= 1")


@dataclass(frozen=True)
class CountSummary:
    """Raw counts of one simulated run plus derived rates and errors."""

    n_pulses: int
    gate_rate_hz: float
    singles_signal: int
    singles_idler: int
    coincidences: int
    accidentals: int
    active_gates_signal: int
    active_gates_idler: int
    accidental_pairs: int  # number of (gate, gate + offset) windows inspected

    @property
    def duration_s(self) -> float:
        return self.n_pulses / self.gate_rate_hz

    @property
    def singles_rate_signal_hz(self) -> float:
        return self.singles_signal / self.duration_s

    @property
    def singles_rate_idler_hz(self) -> float:
        return self.singles_idler / self.duration_s

    @property
    def coincidence_rate_hz(self) -> float:
        return self.coincidences / self.duration_s

    @property
    def accidental_rate_hz(self) -> float:
        # normalized per inspected window so the offset does not bias the rate
        if self.accidental_pairs == 0:
            return 0.0
        return self.accidentals / self.accidental_pairs * self.gate_rate_hz

    @property
    def car(self) -> float | None:
        """Coincidence-to-accidental ratio; None until accidentals were seen."""
        if self.accidentals == 0:
            return None
        return self.coincidences / self.accidentals

    @property
    def car_stderr(self) -> float | None:
        if self.car is None or self.coincidences == 0:
            return None
        return self.car * math.sqrt(1.0 / self.coincidences + 1.0 / self.accidentals)

    def count_stderr(self, count: int) -> float:
        """Poisson standard error of a raw count."""
        return math.sqrt(count)


def measured_gate_duty(summary: CountSummary) -> tuple[float, float]:
    """Measured active-gate fraction per channel; exactly 1.0 without dead time."""
    return (
        summary.active_gates_signal / summary.n_pulses,
        summary.active_gates_idler / summary.n_pulses,
    )


def derive_seed(master_seed: int, index: int) -> int:
    """Decorrelated 64-bit child seed for grid point ``index``."""
    ss = np.random.SeedSequence([int(master_seed), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# ---------------------------------------------------------------------------
# per-block machinery


def _block_rng(seed: int, block_index: int) -> np.random.Generator:
    # Philox is counter-based: streams keyed by (seed, block) never overlap.
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), block_index])))


def _apply_dead_time(fire: np.ndarray, dead_gates: int) -> tuple[np.ndarray, int]:
    """Suppress fires landing in the dead window after an accepted click.

    Returns the accepted-click mask and the number of active gates in the
    block.  A click at gate g deactivates gates g+1 .. g+dead_gates.
    """
    n = fire.size
    if dead_gates <= 0:
        return fire, n
    idx = np.flatnonzero(fire)
    clicks = np.zeros(n, dtype=bool)
    dead = 0
    i = 0
    while i < idx.size:
        g = int(idx[i])
        clicks[g] = True
        dead += min(dead_gates, n - 1 - g)
        i = int(np.searchsorted(idx, g + dead_gates + 1, side="left"))
    return clicks, n - dead


def _count_block(
    fire_s: np.ndarray,
    fire_i: np.ndarray,
    trial: TrialConfig,
    dead_s: int,
    dead_i: int,
) -> np.ndarray:
    if trial.dead_time_enabled:
        click_s, active_s = _apply_dead_time(fire_s, dead_s)
        click_i, active_i = _apply_dead_time(fire_i, dead_i)
    else:
        click_s, active_s = fire_s, fire_s.size
        click_i, active_i = fire_i, fire_i.size
    off = trial.accidental_offset
    n = fire_s.size
    n_acc = max(n - off, 0)
    accidentals = int(np.count_nonzero(click_s[:n_acc] & click_i[off : off + n_acc]))
    return np.array(
        [
            int(np.count_nonzero(click_s)),
            int(np.count_nonzero(click_i)),
            int(np.count_nonzero(click_s & click_i)),
            accidentals,
            active_s,
            active_i,
            n_acc,
        ],
        dtype=np.int64,
    )


def _draw_pairs(rng: np.random.Generator, mean: float, size: int, trial: TrialConfig) -> np.ndarray:
    if mean == 0.0:
        return np.zeros(size, dtype=np.int64)
    if trial.pair_statistics == "thermal":
        m = trial.thermal_modes
        return rng.negative_binomial(m, m / (m + mean), size)
    return rng.poisson(mean, size)


@dataclass(frozen=True)
class _AggregateRates:
    """Pulse-level draw parameters for chains without frequency structure."""

    mu_pair: float
    eta_signal: float  # end-to-end optical x quantum efficiency, pair photons
    eta_idler: float
    noise_signal: float  # mean detected noise photons per pulse
    noise_idler: float
    extra_signal: float  # detected band-excess pair photons without a partner
    extra_idler: float
    dark_signal: float
    dark_idler: float
    dead_signal: int
    dead_idler: int


@dataclass(frozen=True)
class _SpectralRates:
    """Pulse-level draw parameters for AWG chains, resolved in frequency."""

    pair_density_per_hz: float  # pairs per pulse per Hz of generation band
    support_lo: np.ndarray  # merged signal-frequency intervals worth sampling
    support_hi: np.ndarray
    pump_frequency_hz: float
    center_signal: float
    center_idler_mirrored: float
    half_width_hz: float
    gaussian: bool
    crosstalk_floor: float
    peak: float
    eta_rest_signal: float  # everything except the channel passband shape
    eta_rest_idler: float
    noise_signal: float
    noise_idler: float
    dark_signal: float
    dark_idler: float
    dead_signal: int
    dead_idler: int


def _merge_intervals(intervals: list[tuple[float, float]]) -> tuple[np.ndarray, np.ndarray]:
    intervals = sorted((lo, hi) for lo, hi in intervals if hi > lo)
    merged: list[list[float]] = []
    for lo, hi in intervals:
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return (
        np.array([m[0] for m in merged], dtype=float),
        np.array([m[1] for m in merged], dtype=float),
    )


def _rate_parameters(chain: ExperimentChain, pump: PumpConfig):
    p_eff = cm.pump_peak_power_at_source(chain, pump)
    eta_s, eta_i = cm.chain_transmittances(chain)
    eta_s_end = eta_s * chain.detector_signal.quantum_efficiency
    eta_i_end = eta_i * chain.detector_idler.quantum_efficiency
    dark_s = chain.detector_signal.dark_prob_per_gate
    dark_i = chain.detector_idler.dark_prob_per_gate
    dead_s = chain.detector_signal.dead_gates
    dead_i = chain.detector_idler.dead_gates
    noise_s = chain.noise_signal.at_peak_power(p_eff) * eta_s_end
    noise_i = chain.noise_idler.at_peak_power(p_eff) * eta_i_end
    seg = chain.nonlinear_segment
    density = pump.pulse_fwhm_s * (
        seg.gamma_per_w_m * p_eff * seg.effective_length_m
    ) ** 2 * seg.transmittance**2  # pairs per pulse per Hz

    if isinstance(chain.demux, AwgDemux):
        d = chain.demux
        spec = d.spec
        nu_p = pump.frequency_hz
        band = (
            d.generation_band_hz
            if d.generation_band_hz is not None
            else spec.default_generation_band_hz
        )
        lo, hi = nu_p - band / 2.0, nu_p + band / 2.0
        center_s = awg_mod.channel_center(spec, d.signal_channel)
        center_i_m = 2.0 * nu_p - awg_mod.channel_center(spec, d.idler_channel)
        half_width = spec.passband_3db_hz / 2.0
        if spec.crosstalk_floor > 0.0:
            supports = [(lo, hi)]
        else:
            # outside +/- 7 half-widths a gaussian passband is below 2^-49
            reach = half_width * (7.0 if spec.passband_shape == "gaussian" else 1.0)
            supports = [
                (max(c - reach, lo), min(c + reach, hi)) for c in (center_s, center_i_m)
            ]
        support_lo, support_hi = _merge_intervals(supports)
        # the demux channel shape is sampled per pair; its peak moves to eta_rest
        return _SpectralRates(
            pair_density_per_hz=density,
            support_lo=support_lo,
            support_hi=support_hi,
            pump_frequency_hz=nu_p,
            center_signal=center_s,
            center_idler_mirrored=center_i_m,
            half_width_hz=half_width,
            gaussian=spec.passband_shape == "gaussian",
            crosstalk_floor=spec.crosstalk_floor,
            peak=spec.peak_transmittance,
            eta_rest_signal=eta_s_end / spec.peak_transmittance,
            eta_rest_idler=eta_i_end / spec.peak_transmittance,
            noise_signal=noise_s,
            noise_idler=noise_i,
            dark_signal=dark_s,
            dark_idler=dark_i,
            dead_signal=dead_s,
            dead_idler=dead_i,
        )

    pair_bw, bw_s, bw_i = cm.collection_bandwidths(chain, pump)
    mu_pair = density * pair_bw
    return _AggregateRates(
        mu_pair=mu_pair,
        eta_signal=eta_s_end,
        eta_idler=eta_i_end,
        noise_signal=noise_s,
        noise_idler=noise_i,
        extra_signal=density * max(bw_s - pair_bw, 0.0) * eta_s_end,
        extra_idler=density * max(bw_i - pair_bw, 0.0) * eta_i_end,
        dark_signal=dark_s,
        dark_idler=dark_i,
        dead_signal=dead_s,
        dead_idler=dead_i,
    )


def _aggregate_block(
    rates: _AggregateRates, trial: TrialConfig, seed: int, block_index: int, size: int
) -> np.ndarray:
    rng = _block_rng(seed, block_index)
    pairs = _draw_pairs(rng, rates.mu_pair, size, trial)
    hits_s = rng.binomial(pairs, rates.eta_signal) if rates.eta_signal > 0 else 0
    hits_i = rng.binomial(pairs, rates.eta_idler) if rates.eta_idler > 0 else 0
    causes_s = np.asarray(hits_s) + rng.poisson(rates.noise_signal + rates.extra_signal, size)
    causes_i = np.asarray(hits_i) + rng.poisson(rates.noise_idler + rates.extra_idler, size)
    fire_s = causes_s > 0
    fire_i = causes_i > 0
    if rates.dark_signal > 0:
        fire_s |= rng.random(size) < rates.dark_signal
    if rates.dark_idler > 0:
        fire_i |= rng.random(size) < rates.dark_idler
    return _count_block(fire_s, fire_i, trial, rates.dead_signal, rates.dead_idler)


def _spectral_block(
    rates: _SpectralRates, trial: TrialConfig, seed: int, block_index: int, size: int
) -> np.ndarray:
    rng = _block_rng(seed, block_index)
    widths = rates.support_hi - rates.support_lo
    total_width = float(widths.sum())
    mu_sample = rates.pair_density_per_hz * total_width
    pairs = _draw_pairs(rng, mu_sample, size, trial)
    total = int(pairs.sum())
    hit_s = np.zeros(size, dtype=bool)
    hit_i = np.zeros(size, dtype=bool)
    if total > 0:
        pulse_of_pair = np.repeat(np.arange(size), pairs)
        u = rng.random(total) * total_width
        # map uniform draws onto the merged support intervals
        edges = np.concatenate(([0.0], np.cumsum(widths)))
        k = np.searchsorted(edges, u, side="right") - 1
        nu = rates.support_lo[k] + (u - edges[k])

        def shape(detuning: np.ndarray) -> np.ndarray:
            if rates.gaussian:
                val = np.exp2(-np.square(detuning / rates.half_width_hz))
            else:
                val = (np.abs(detuning) <= rates.half_width_hz).astype(float)
            if rates.crosstalk_floor > 0.0:
                val = np.maximum(val, rates.crosstalk_floor)
            return val

        p_s = shape(nu - rates.center_signal) * (rates.peak * rates.eta_rest_signal)
        p_i = shape(nu - rates.center_idler_mirrored) * (rates.peak * rates.eta_rest_idler)
        kept_s = rng.random(total) < p_s
        kept_i = rng.random(total) < p_i
        np.logical_or.at(hit_s, pulse_of_pair[kept_s], True)
        np.logical_or.at(hit_i, pulse_of_pair[kept_i], True)
    fire_s = hit_s | (rng.poisson(rates.noise_signal, size) > 0)
    fire_i = hit_i | (rng.poisson(rates.noise_idler, size) > 0)
    if rates.dark_signal > 0:
        fire_s |= rng.random(size) < rates.dark_signal
    if rates.dark_idler > 0:
        fire_i |= rng.random(size) < rates.dark_idler
    return _count_block(fire_s, fire_i, trial, rates.dead_signal, rates.dead_idler)


# ---------------------------------------------------------------------------
# public entry points


def simulate(
    chain: ExperimentChain,
    pump: PumpConfig,
    trial: TrialConfig,
    threads: int = 1,
) -> CountSummary:
    """Run a full counting experiment pulse by pulse.

    Deterministic given (chain, pump, trial): the same inputs always produce
    the same CountSummary, regardless of ``threads``.
    """
    cm._check_gate_alignment(chain, pump)
    rates = _rate_parameters(chain, pump)
    if isinstance(rates, _AggregateRates):
        mu_check = rates.mu_pair + max(rates.noise_signal, rates.noise_idler)
    else:
        mu_check = rates.pair_density_per_hz * float(
            (rates.support_hi - rates.support_lo).sum()
        )
    if mu_check > 1.0:
        warnings.warn(
            f"per-pulse mean {mu_check:.3g} exceeds 1; multi-photon pile-up will be "
            "heavy and the analytic model unreliable",
            RuntimeWarning,
            stacklevel=2,
        )

    n = trial.n_pulses
    blocks = [
        (bi, min(_BLOCK_SIZE, n - bi * _BLOCK_SIZE))
        for bi in range((n + _BLOCK_SIZE - 1) // _BLOCK_SIZE)
    ]
    worker = _aggregate_block if isinstance(rates, _AggregateRates) else _spectral_block

    def run(block) -> np.ndarray:
        bi, size = block
        return worker(rates, trial, trial.seed, bi, size)

    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    totals = np.sum(parts, axis=0)
    return CountSummary(
        n_pulses=n,
        gate_rate_hz=pump.rep_rate_hz,
        singles_signal=int(totals[0]),
        singles_idler=int(totals[1]),
        coincidences=int(totals[2]),
        accidentals=int(totals[3]),
        active_gates_signal=int(totals[4]),
        active_gates_idler=int(totals[5]),
        accidental_pairs=int(totals[6]),
    )


def apply_sweep_value(
    chain: ExperimentChain, pump: PumpConfig, variable: str, value: float
) -> tuple[ExperimentChain, PumpConfig]:
    """Return (chain, pump) with one physical variable replaced.

    Values are SI: meters for lengths, watts for the peak power, dB for the
    demux insertion loss, hertz for the dark rate.
    """
    if variable == "l_si":
        idx = chain.nonlinear_index
        segments = list(chain.segments)
        segments[idx] = replace(segments[idx], length_m=value)
        return replace(chain, segments=tuple(segments)), pump
    if variable == "l_siox":
        idx = chain.nonlinear_index
        for j in range(idx + 1, len(chain.segments)):
            if chain.segments[j].kind == cm.KIND_PASSIVE:
                segments = list(chain.segments)
                segments[j] = replace(segments[j], length_m=value)
                return replace(chain, segments=tuple(segments)), pump
        raise ValueError("chain has no passive segment after the nonlinear one")
    if variable == "pp":
        avg = value * pump.rep_rate_hz * pump.pulse_fwhm_s
        return chain, replace(pump, average_power_w=avg)
    if variable == "awg_loss":
        if not isinstance(chain.demux, AwgDemux):
            raise ValueError("awg_loss sweep requires an AWG demultiplexer")
        spec = replace(chain.demux.spec, insertion_loss_db=value)
        return replace(chain, demux=replace(chain.demux, spec=spec)), pump
    if variable == "dark":
        return (
            replace(
                chain,
                detector_signal=replace(chain.detector_signal, dark_rate_hz=value),
                detector_idler=replace(chain.detector_idler, dark_rate_hz=value),
            ),
            pump,
        )
    raise ValueError(f"unknown sweep variable {variable!r}; expected one of {SWEEP_VARIABLES}")


def sweep(
    chain: ExperimentChain,
    pump: PumpConfig,
    variable: str,
    grid,
    trial: TrialConfig,
    threads: int = 1,
) -> list[tuple[float, CountSummary]]:
    """Independent simulations over a parameter grid.

    Each grid point runs with a child seed derived from (trial.seed, index),
    so a single-point grid reproduces a direct simulate call with that child
    seed, and the whole sweep is reproducible from the master seed.
    """
    grid = [float(v) for v in grid]
    if not grid:
        raise ValueError("grid must not be empty")
    out: list[tuple[float, CountSummary]] = []
    for index, value in enumerate(grid):
        chain_v, pump_v = apply_sweep_value(chain, pump, variable, value)
        trial_v = replace(trial, seed=derive_seed(trial.seed, index))
        out.append((value, simulate(chain_v, pump_v, trial_v, threads=threads)))
    return out
