"""Simulator and analysis toolkit for integrated-photonic photon-pair experiments."""

__version__ = "0.1.0"

from .awg import AwgSpec, channel_transmission, effective_pair_bandwidth, pair_transmittance
from .chainmodel import (
    AwgDemux,
    DetectorConfig,
    ExperimentChain,
    FilterDemux,
    FilterSpec,
    NoiseCoefficients,
    PumpConfig,
    RatePrediction,
    WaveguideSegment,
    car_estimate,
    chain_transmittances,
    click_probabilities,
    db_to_linear,
    db_to_neper,
    effective_length,
    expected_gate_statistics,
    gate_duty,
    pair_generation_rate,
    pair_rate_from_counts,
    peak_power,
    predict,
    singles_rate,
)
from .config import build_experiment, load_file, validate_config
from .fitting import DataSet, FitResult, fit_gamma_alpha, fit_singles_poly, fit_sio2_decay
from .montecarlo import CountSummary, TrialConfig, measured_gate_duty, simulate, sweep
from .presets import get_preset, preset_names

__all__ = [
    "AwgDemux",
    "AwgSpec",
    "CountSummary",
    "DataSet",
    "DetectorConfig",
    "ExperimentChain",
    "FilterDemux",
    "FilterSpec",
    "FitResult",
    "NoiseCoefficients",
    "PumpConfig",
    "RatePrediction",
    "TrialConfig",
    "WaveguideSegment",
    "build_experiment",
    "car_estimate",
    "chain_transmittances",
    "channel_transmission",
    "click_probabilities",
    "db_to_linear",
    "db_to_neper",
    "effective_length",
    "effective_pair_bandwidth",
    "expected_gate_statistics",
    "fit_gamma_alpha",
    "fit_singles_poly",
    "fit_sio2_decay",
    "gate_duty",
    "get_preset",
    "load_file",
    "measured_gate_duty",
    "pair_generation_rate",
    "pair_rate_from_counts",
    "pair_transmittance",
    "peak_power",
    "predict",
    "preset_names",
    "simulate",
    "singles_rate",
    "sweep",
    "validate_config",
]
