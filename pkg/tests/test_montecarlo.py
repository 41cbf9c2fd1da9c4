import math
from dataclasses import replace

import numpy as np
import pytest

from pairsim import chainmodel as cm
from pairsim import config as cfg
from pairsim import montecarlo as mc
from pairsim import presets
from conftest import make_rate_chain


def z_score(observed: float, expected: float, variance: float) -> float:
    return (observed - expected) / math.sqrt(max(variance, 1e-300))


class TestTrivialAndDeterminism:
    def test_all_zero(self):
        chain, pump = make_rate_chain(0.0)
        s = mc.simulate(chain, pump, mc.TrialConfig(n_pulses=200_000, seed=1))
        assert (s.singles_signal, s.singles_idler, s.coincidences, s.accidentals) == (0, 0, 0, 0)
        assert s.car is None

    def test_identical_runs(self):
        chain, pump = make_rate_chain(5e-3, 0.3, 0.3, dark_rate_hz=2e3, dead_time_us=10.0)
        trial = mc.TrialConfig(n_pulses=2_500_000, seed=99)
        assert mc.simulate(chain, pump, trial) == mc.simulate(chain, pump, trial)

    def test_thread_count_irrelevant(self):
        chain, pump = make_rate_chain(5e-3, 0.3, 0.3, dark_rate_hz=2e3, dead_time_us=10.0)
        trial = mc.TrialConfig(n_pulses=3_200_000, seed=7)
        assert mc.simulate(chain, pump, trial, threads=1) == mc.simulate(
            chain, pump, trial, threads=4
        )

    def test_spectral_path_deterministic(self, awg_chain):
        chain, pump = awg_chain
        trial = mc.TrialConfig(n_pulses=1_500_000, seed=11)
        assert mc.simulate(chain, pump, trial, threads=1) == mc.simulate(
            chain, pump, trial, threads=3
        )

    def test_seed_changes_counts(self):
        chain, pump = make_rate_chain(5e-3, 0.3, 0.3)
        a = mc.simulate(chain, pump, mc.TrialConfig(n_pulses=500_000, seed=1))
        b = mc.simulate(chain, pump, mc.TrialConfig(n_pulses=500_000, seed=2))
        assert a != b

    def test_mean_above_one_warns(self):
        chain, pump = make_rate_chain(1.4)
        with pytest.warns(RuntimeWarning, match="exceeds 1"):
            mc.simulate(chain, pump, mc.TrialConfig(n_pulses=1000, seed=0))


class TestAgainstPoissonOracle:
    def test_unit_efficiency_coincidences(self):
        # eta = 1, no noise, no dark, no dead time: a pulse gives a
        # coincidence exactly when at least one pair was created
        mu = 1e-3
        n = 10_000_000
        chain, pump = make_rate_chain(mu, 1.0, 1.0)
        s = mc.simulate(chain, pump, mc.TrialConfig(n_pulses=n, seed=5, dead_time_enabled=False))
        p_exact = -math.expm1(-mu)
        assert abs(z_score(s.coincidences, n * p_exact, n * p_exact)) < 3.0
        assert s.coincidences == s.singles_signal == s.singles_idler
        # offset-gate accidentals need two independent pulses to fire
        p_acc = p_exact**2
        assert abs(z_score(s.accidentals, s.accidental_pairs * p_acc, s.accidental_pairs * p_acc)) < 3.0
        assert s.accidentals / s.accidental_pairs == pytest.approx(1e-6, rel=1.0)

    @pytest.mark.parametrize(
        "mu,eta,dark",
        [
            (1e-2, 0.2, 0.0),
            (1e-1, 0.8, 0.0),
            (1e-3, 0.05, 2.1e3),
        ],
    )
    def test_counts_match_gate_statistics(self, mu, eta, dark):
        chain, pump = make_rate_chain(mu, eta, eta, dark_rate_hz=dark)
        stats = cm.expected_gate_statistics(chain, pump)
        n = 2_000_000
        s = mc.simulate(
            chain, pump, mc.TrialConfig(n_pulses=n, seed=13, dead_time_enabled=False)
        )
        for observed, p in (
            (s.singles_signal, stats.p_click_signal),
            (s.singles_idler, stats.p_click_idler),
            (s.coincidences, stats.p_coincidence),
        ):
            assert abs(z_score(observed, n * p, n * p * (1 - p))) < 4.0
        p_acc = stats.p_accidental
        assert (
            abs(
                z_score(
                    s.accidentals, s.accidental_pairs * p_acc, s.accidental_pairs * p_acc * (1 - p_acc)
                )
            )
            < 4.0
        )

    def test_thinning_consistency(self):
        # halving both channel efficiencies quarters coincidences and halves singles
        mu, n = 1e-2, 4_000_000
        chain_hi, pump = make_rate_chain(mu, 0.4, 0.4)
        chain_lo, _ = make_rate_chain(mu, 0.2, 0.2)
        hi = mc.simulate(chain_hi, pump, mc.TrialConfig(n_pulses=n, seed=21))
        lo = mc.simulate(chain_lo, pump, mc.TrialConfig(n_pulses=n, seed=22))
        ratio_singles = hi.singles_signal / lo.singles_signal
        sigma_singles = ratio_singles * math.sqrt(1 / hi.singles_signal + 1 / lo.singles_signal)
        assert abs(ratio_singles - 2.0) < 3 * sigma_singles + 0.01
        ratio_coinc = hi.coincidences / lo.coincidences
        sigma_coinc = ratio_coinc * math.sqrt(1 / hi.coincidences + 1 / lo.coincidences)
        assert abs(ratio_coinc - 4.0) < 3 * sigma_coinc + 0.05


class TestDeadTime:
    def test_monotonicity(self):
        chain, pump = make_rate_chain(2e-2, 0.5, 0.5, dark_rate_hz=5e3, dead_time_us=10.0)
        trial_on = mc.TrialConfig(n_pulses=1_000_000, seed=31, dead_time_enabled=True)
        trial_off = replace(trial_on, dead_time_enabled=False)
        on = mc.simulate(chain, pump, trial_on)
        off = mc.simulate(chain, pump, trial_off)
        assert on.singles_signal <= off.singles_signal
        assert on.singles_idler <= off.singles_idler
        assert on.coincidences <= off.coincidences
        assert on.accidentals <= off.accidentals

    def test_duty_exactly_one_when_disabled(self):
        chain, pump = make_rate_chain(1e-2, 0.3, 0.3, dead_time_us=10.0)
        s = mc.simulate(
            chain, pump, mc.TrialConfig(n_pulses=300_000, seed=41, dead_time_enabled=False)
        )
        assert mc.measured_gate_duty(s) == (1.0, 1.0)

    def test_duty_matches_renewal_fixed_point(self):
        # per-active-gate click probability 0.01 with 1000 dead gates per click
        chain, pump = make_rate_chain(0.0, dark_rate_hz=1e6, dead_time_us=10.0)
        s = mc.simulate(chain, pump, mc.TrialConfig(n_pulses=2_000_000, seed=51))
        expected = cm.gate_duty(0.01, 10e-6, 1e8)
        for measured in mc.measured_gate_duty(s):
            assert abs(measured - expected) / expected < 0.02

    def test_duty_dark_only_reference(self):
        # 2.1e-5 per gate with 1000 dead gates: duty 1/(1 + 0.021)
        chain, pump = make_rate_chain(0.0, dark_rate_hz=2.1e3, dead_time_us=10.0)
        s = mc.simulate(chain, pump, mc.TrialConfig(n_pulses=5_000_000, seed=61))
        expected = 0.979431929480901
        for measured in mc.measured_gate_duty(s):
            assert abs(measured - expected) / expected < 0.01


class TestAccidentalOffset:
    def test_offset_one_and_two_statistically_identical(self):
        chain, pump = make_rate_chain(8e-3, 0.5, 0.5, dark_rate_hz=1e4)
        totals = {1: 0, 2: 0}
        for seed in range(12):
            for offset in (1, 2):
                trial = mc.TrialConfig(
                    n_pulses=500_000, seed=seed, accidental_offset=offset, dead_time_enabled=False
                )
                totals[offset] += mc.simulate(chain, pump, trial).accidentals
        z = (totals[1] - totals[2]) / math.sqrt(totals[1] + totals[2])
        assert abs(z) < 2.576  # two-sided p > 0.01


class TestThermalStatistics:
    def test_single_mode_threshold_probability(self):
        # one thermal mode with mean mu: P(n >= 1) = mu / (1 + mu)
        mu, n = 5e-2, 2_000_000
        chain, pump = make_rate_chain(mu, 1.0, 1.0)
        trial = mc.TrialConfig(
            n_pulses=n, seed=71, pair_statistics="thermal", thermal_modes=1, dead_time_enabled=False
        )
        s = mc.simulate(chain, pump, trial)
        p = mu / (1.0 + mu)
        assert abs(z_score(s.singles_signal, n * p, n * p * (1 - p))) < 4.0

    def test_many_modes_approach_poisson(self):
        mu, n = 5e-2, 2_000_000
        chain, pump = make_rate_chain(mu, 1.0, 1.0)
        thermal = mc.simulate(
            chain,
            pump,
            mc.TrialConfig(n_pulses=n, seed=72, pair_statistics="thermal", thermal_modes=256),
        )
        p_poisson = -math.expm1(-mu)
        assert abs(z_score(thermal.singles_signal, n * p_poisson, n * p_poisson)) < 5.0


class TestSweep:
    def test_single_point_equals_direct_call(self):
        chain, pump = make_rate_chain(5e-3, 0.4, 0.4)
        trial = mc.TrialConfig(n_pulses=400_000, seed=81)
        [(value, summary)] = mc.sweep(chain, pump, "pp", [0.02], trial)
        chain_v, pump_v = mc.apply_sweep_value(chain, pump, "pp", 0.02)
        direct = mc.simulate(
            chain_v, pump_v, replace(trial, seed=mc.derive_seed(trial.seed, 0))
        )
        assert value == 0.02
        assert summary == direct

    def test_sweep_reproducible(self):
        chain, pump = make_rate_chain(5e-3, 0.4, 0.4)
        trial = mc.TrialConfig(n_pulses=200_000, seed=82)
        grid = [0.01, 0.02, 0.03]
        a = mc.sweep(chain, pump, "pp", grid, trial)
        b = mc.sweep(chain, pump, "pp", grid, trial)
        assert a == b

    def test_power_sweep_quadratic_slope(self):
        chain, pump = make_rate_chain(1e-3, 0.3, 0.3)
        trial = mc.TrialConfig(n_pulses=4_000_000, seed=83, dead_time_enabled=False)
        grid = np.geomspace(0.05, 0.5, 4)  # peak watts on the synthetic chain
        results = mc.sweep(chain, pump, "pp", grid, trial)
        rates = []
        for value, summary in results:
            mu = cm.pair_rate_from_counts(
                summary.coincidence_rate_hz,
                summary.accidental_rate_hz,
                pump.rep_rate_hz,
                0.3,
                0.3,
            )
            rates.append(mu)
        slope = np.polyfit(np.log(grid), np.log(rates), 1)[0]
        assert abs(slope - 2.0) < 0.05

    def test_l_siox_sweep_changes_passive_segment(self):
        chain, pump = make_rate_chain(1e-3)
        seg = cm.WaveguideSegment("passive", 0.01, 180.0)
        chain = replace(chain, segments=chain.segments + (seg,))
        chain2, _ = mc.apply_sweep_value(chain, pump, "l_siox", 0.03)
        assert chain2.segments[-1].length_m == 0.03
        with pytest.raises(ValueError):
            mc.apply_sweep_value(make_rate_chain(1e-3)[0], pump, "l_siox", 0.03)

    def test_awg_loss_sweep_requires_awg(self):
        chain, pump = make_rate_chain(1e-3)
        with pytest.raises(ValueError):
            mc.apply_sweep_value(chain, pump, "awg_loss", 0.0)

    def test_unknown_variable(self):
        chain, pump = make_rate_chain(1e-3)
        with pytest.raises(ValueError):
            mc.apply_sweep_value(chain, pump, "loss", 0.0)


class TestPresetEquivalence:
    """Counting runs agree with the closed-form gate statistics per preset."""

    @pytest.mark.parametrize("name", presets.preset_names())
    def test_counts_match_prediction(self, name):
        chain, pump = cfg.build_experiment(presets.get_preset(name))
        stats = cm.expected_gate_statistics(chain, pump)
        n = 2_000_000
        s = mc.simulate(chain, pump, mc.TrialConfig(n_pulses=n, seed=17))
        # dead time couples the two detectors and blocks; allow 5 sigma plus
        # the small renewal-model bias on the expected counts
        for observed, p in (
            (s.singles_signal, stats.p_click_signal),
            (s.singles_idler, stats.p_click_idler),
            (s.coincidences, stats.p_coincidence),
        ):
            sigma = math.sqrt(n * p * (1 - p))
            assert abs(observed - n * p) < 5 * sigma + 0.03 * n * p
        duty_s, duty_i = mc.measured_gate_duty(s)
        assert abs(duty_s - stats.duty_signal) / stats.duty_signal < 0.02
        assert abs(duty_i - stats.duty_idler) / stats.duty_idler < 0.02

    def test_wg_i_car_matches_estimate(self, wg_i):
        chain, pump = wg_i
        estimate = cm.car_estimate(chain, pump)
        s = mc.simulate(chain, pump, mc.TrialConfig(n_pulses=8_000_000, seed=19))
        assert s.car is not None
        assert abs(s.car - estimate) < 3 * s.car_stderr
