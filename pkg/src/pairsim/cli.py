"""Command-line front end.

Subcommands: predict (closed-form rates), simulate (per-pulse counting run),
sweep (grid over one physical variable, optionally with counting runs), fit
(parameter recovery from CSV rate data), reproduce (built-in study curves).

Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure.
Outputs are CSV with a '#'-prefixed metadata header, or JSON for single-shot
results; both are bit-identical for identical (config, flags, seed, version).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from . import chainmodel as cm
from . import config as cfg
from . import fitting, montecarlo, presets

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_GRID_UNITS = {"l_si": 1e-2, "l_siox": 1e-2, "pp": 1e-3, "awg_loss": 1.0, "dark": 1.0}
_GRID_LABELS = {
    "l_si": "l_si_cm",
    "l_siox": "l_siox_cm",
    "pp": "pp_mw",
    "awg_loss": "awg_loss_db",
    "dark": "dark_rate_hz",
}

FIGURES = ("3a", "3b", "3c", "3d", "5a", "5b")


@dataclass
class ResultTable:
    """Column-labeled rows plus a provenance header."""

    columns: list[str]
    rows: list[list] = field(default_factory=list)
    metadata: dict[str, str] = field(default_factory=dict)

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        for key, value in self.metadata.items():
            buf.write(f"# {key} = {value}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_format_cell(v) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv_text(cls, text: str) -> "ResultTable":
        metadata: dict[str, str] = {}
        body: list[str] = []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                metadata[key.strip()] = value.strip()
            elif line.strip():
                body.append(line)
        reader = csv.reader(body)
        columns = next(reader)
        rows = [[_parse_cell(v) for v in row] for row in reader]
        return cls(columns=columns, rows=rows, metadata=metadata)

    def to_json_text(self) -> str:
        return json.dumps(
            {"metadata": self.metadata, "columns": self.columns, "rows": self.rows},
            indent=2,
        )


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_cell(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _base_metadata(command: str, document: dict, seed: int | None = None) -> dict[str, str]:
    meta = {
        "tool": "pairsim",
        "version": __version__,
        "command": command,
        "config_hash": cfg.config_hash(document),
    }
    if seed is not None:
        meta["seed"] = str(seed)
    return meta


def _write_output(args, table: ResultTable) -> None:
    if args.out:
        text = table.to_json_text() if args.out.endswith(".json") else table.to_csv_text()
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(table.to_csv_text())


def _load_document(args, parser: argparse.ArgumentParser) -> dict:
    if getattr(args, "preset", None):
        try:
            return presets.get_preset(args.preset)
        except KeyError as exc:
            parser.error(str(exc))
    if not getattr(args, "config", None):
        parser.error("a configuration file or --preset is required")
    return cfg.load_file(args.config)


def _parse_grid(spec: str) -> np.ndarray:
    """Grid syntax: ``start:stop:count`` (linear) or ``log:start:stop:count``."""
    parts = spec.split(":")
    try:
        if parts[0] == "log":
            start, stop, count = float(parts[1]), float(parts[2]), int(parts[3])
            if start <= 0 or stop <= 0:
                raise ValueError("log grids need positive endpoints")
            return np.geomspace(start, stop, count)
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        return np.linspace(start, stop, count)
    except (IndexError, ValueError) as exc:
        raise cfg.ConfigError(f"bad grid spec {spec!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# subcommands


def _prediction_items(pred: cm.RatePrediction) -> list[tuple[str, float]]:
    return [
        ("peak_power_w", pred.peak_power_w),
        ("pair_bandwidth_hz", pred.pair_bandwidth_hz),
        ("mu_pair_generated", pred.mu_pair_generated),
        ("mu_pair_out", pred.mu_pair_out),
        ("mu_signal", pred.mu_signal),
        ("mu_idler", pred.mu_idler),
        ("p_click_signal", pred.p_click_signal),
        ("p_click_idler", pred.p_click_idler),
        ("p_coincidence", pred.p_coincidence),
        ("p_accidental", pred.p_accidental),
        ("car", pred.car),
        ("duty_signal", pred.duty_signal),
        ("duty_idler", pred.duty_idler),
    ]


def cmd_predict(args, parser) -> int:
    document = _load_document(args, parser)
    chain, pump = cfg.build_experiment(document)
    pred = cm.predict(chain, pump)
    items = _prediction_items(pred)
    for key, value in items:
        shown = "undefined" if isinstance(value, float) and math.isnan(value) else f"{value:.8g}"
        print(f"{key} = {shown}")
    table = ResultTable(
        columns=[k for k, _ in items],
        rows=[[v for _, v in items]],
        metadata=_base_metadata("predict", document),
    )
    if args.out:
        _write_output(args, table)
    return EXIT_OK


def _summary_items(summary: montecarlo.CountSummary) -> list[tuple[str, object]]:
    duty_s, duty_i = montecarlo.measured_gate_duty(summary)
    car = summary.car
    return [
        ("n_pulses", summary.n_pulses),
        ("singles_signal", summary.singles_signal),
        ("singles_idler", summary.singles_idler),
        ("coincidences", summary.coincidences),
        ("accidentals", summary.accidentals),
        ("singles_rate_signal_hz", summary.singles_rate_signal_hz),
        ("singles_rate_idler_hz", summary.singles_rate_idler_hz),
        ("coincidence_rate_hz", summary.coincidence_rate_hz),
        ("accidental_rate_hz", summary.accidental_rate_hz),
        ("car", math.nan if car is None else car),
        ("car_stderr", math.nan if summary.car_stderr is None else summary.car_stderr),
        ("duty_signal", duty_s),
        ("duty_idler", duty_i),
    ]


def _trial_from_args(args, parser) -> montecarlo.TrialConfig:
    if args.pulses < 1:
        parser.error("--pulses must be a positive integer")
    return montecarlo.TrialConfig(
        n_pulses=args.pulses,
        seed=args.seed,
        accidental_offset=args.accidental_offset,
        dead_time_enabled=not args.no_dead_time,
        pair_statistics=args.pair_statistics,
        thermal_modes=args.thermal_modes,
    )


def cmd_simulate(args, parser) -> int:
    document = _load_document(args, parser)
    chain, pump = cfg.build_experiment(document)
    trial = _trial_from_args(args, parser)
    summary = montecarlo.simulate(chain, pump, trial, threads=args.threads)
    items = _summary_items(summary)
    for key, value in items:
        shown = "undefined" if isinstance(value, float) and math.isnan(value) else f"{value:.8g}"
        print(f"{key} = {shown}")
    table = ResultTable(
        columns=[k for k, _ in items],
        rows=[[v for _, v in items]],
        metadata=_base_metadata("simulate", document, seed=trial.seed),
    )
    if args.out:
        _write_output(args, table)
    return EXIT_OK


def cmd_sweep(args, parser) -> int:
    document = _load_document(args, parser)
    chain, pump = cfg.build_experiment(document)
    grid_user = _parse_grid(args.grid)
    grid_si = grid_user * _GRID_UNITS[args.var]
    label = _GRID_LABELS[args.var]

    pred_cols = [
        "mu_pair_generated",
        "mu_pair_out",
        "mu_signal",
        "mu_idler",
        "p_click_signal",
        "p_click_idler",
        "p_coincidence",
        "p_accidental",
        "car",
    ]
    columns = [label] + pred_cols
    mc_results: list[montecarlo.CountSummary] | None = None
    if args.mc:
        trial = _trial_from_args(args, parser)
        mc_results = [
            s for _, s in montecarlo.sweep(chain, pump, args.var, grid_si, trial, threads=args.threads)
        ]
        columns += [
            "mc_singles_signal",
            "mc_singles_idler",
            "mc_coincidences",
            "mc_accidentals",
            "mc_car",
            "mc_car_stderr",
        ]

    rows = []
    for index, value in enumerate(grid_si):
        chain_v, pump_v = montecarlo.apply_sweep_value(chain, pump, args.var, float(value))
        pred = cm.predict(chain_v, pump_v)
        row: list = [float(grid_user[index])] + [
            getattr(pred, name) for name in pred_cols
        ]
        if mc_results is not None:
            s = mc_results[index]
            row += [
                s.singles_signal,
                s.singles_idler,
                s.coincidences,
                s.accidentals,
                math.nan if s.car is None else s.car,
                math.nan if s.car_stderr is None else s.car_stderr,
            ]
        rows.append(row)

    meta = _base_metadata("sweep", document, seed=args.seed if args.mc else None)
    meta["variable"] = args.var
    meta["grid"] = args.grid
    table = ResultTable(columns=columns, rows=rows, metadata=meta)
    _write_output(args, table)
    return EXIT_OK


def _read_xy_csv(path: str) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            cells = line.split(",")
            try:
                rows.append([float(c) for c in cells[:3] if c.strip() != ""])
            except ValueError:
                continue  # header line
    if not rows:
        raise cfg.ConfigError("no numeric rows found in data file")
    n_cols = min(len(r) for r in rows)
    data = np.array([r[:n_cols] for r in rows], dtype=float)
    sigma = data[:, 2] if n_cols >= 3 else None
    return data[:, 0], data[:, 1], sigma


def cmd_fit(args, parser) -> int:
    x, y, sigma = _read_xy_csv(args.data)
    fixed: dict = {}
    document = None
    if args.preset or args.config:
        document = _load_document(args, parser)
        chain, pump = cfg.build_experiment(document)
    if args.model == "decay":
        data = fitting.DataSet(x=x * 1e-2, y=y, sigma=sigma, role="l_siox")
        result = fitting.fit_sio2_decay(data)
    elif args.model == "gamma_alpha":
        if document is None:
            parser.error("--model gamma_alpha requires --config or --preset for fixed parameters")
        pair_bw, _, _ = cm.collection_bandwidths(chain, pump)
        fixed = {
            "peak_power_w": cm.pump_peak_power_at_source(chain, pump),
            "pair_bandwidth_hz": pair_bw,
            "pulse_fwhm_s": pump.pulse_fwhm_s,
            "downstream_transmittance": cm.downstream_passive_transmittance(chain),
        }
        data = fitting.DataSet(x=x * 1e-2, y=y, sigma=sigma, role="l_si", fixed_params=fixed)
        result = fitting.fit_gamma_alpha(data)
    else:
        data = fitting.DataSet(x=x * 1e-3, y=y, sigma=sigma, role="pp")
        result = fitting.fit_singles_poly(data)

    for name, value in result.params.items():
        print(f"{name} = {value:.10g}  (stderr {result.stderr[name]:.4g})")
    if "alpha_db_per_m" in result.params:
        print(f"alpha_db_per_cm = {result.params['alpha_db_per_m'] / 100.0:.10g}")
    print(f"rss = {result.rss:.6g}")
    print(f"converged = {result.converged}")
    for note in result.notes:
        print(f"note: {note}")
    if args.out:
        payload = {
            "model": args.model,
            "params": result.params,
            "stderr": result.stderr,
            "rss": result.rss,
            "converged": result.converged,
            "n_evaluations": result.n_evaluations,
            "notes": list(result.notes),
        }
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
    return EXIT_OK if result.converged else EXIT_NUMERICAL


# ---------------------------------------------------------------------------
# built-in study curves


def _figure_3a() -> ResultTable:
    document = presets.get_preset("wg-i")
    chain, pump = cfg.build_experiment(document)
    rows = []
    for l_cm in np.arange(0.0, 6.0 + 1e-9, 0.05):
        chain_v, _ = montecarlo.apply_sweep_value(chain, pump, "l_siox", l_cm * 1e-2)
        pred = cm.predict(chain_v, pump)
        eta_passive = cm.downstream_passive_transmittance(chain_v)
        rows.append([float(l_cm), pred.mu_pair_generated * eta_passive**2])
    meta = _base_metadata("reproduce", document)
    meta["figure"] = "3a"
    return ResultTable(["l_siox_cm", "pair_rate_per_pulse"], rows, meta)


def _figure_3b() -> ResultTable:
    document = presets.get_preset("wg-i")
    chain, pump = cfg.build_experiment(document)
    rows = []
    for l_cm in np.arange(0.30, 6.0 + 1e-9, 0.01):
        chain_v, _ = montecarlo.apply_sweep_value(chain, pump, "l_si", l_cm * 1e-2)
        pred = cm.predict(chain_v, pump)
        eta_passive = cm.downstream_passive_transmittance(chain_v)
        rows.append([float(l_cm), pred.mu_pair_generated * eta_passive**2])
    meta = _base_metadata("reproduce", document)
    meta["figure"] = "3b"
    return ResultTable(["l_si_cm", "pair_rate_per_pulse"], rows, meta)


def _figure_3c() -> ResultTable:
    document = presets.get_preset("wg-i")
    chain, pump = cfg.build_experiment(document)
    rows = []
    for pp_mw in np.geomspace(0.5, 50.0, 60):
        _, pump_v = montecarlo.apply_sweep_value(chain, pump, "pp", pp_mw * 1e-3)
        mu_s, mu_i = cm.singles_rate(chain, pump_v)
        rows.append([float(pp_mw), mu_s, mu_i])
    meta = _base_metadata("reproduce", document)
    meta["figure"] = "3c"
    return ResultTable(
        ["pp_mw", "singles_signal_per_pulse", "singles_idler_per_pulse"], rows, meta
    )


def _figure_3d() -> ResultTable:
    names = ["wg-i", "wg-v", "wg-vi"]
    built = [cfg.build_experiment(presets.get_preset(n)) for n in names]
    rows = []
    for pp_mw in np.geomspace(1.0, 60.0, 50):
        row = [float(pp_mw)]
        for chain, pump in built:
            _, pump_v = montecarlo.apply_sweep_value(chain, pump, "pp", pp_mw * 1e-3)
            row.append(cm.car_estimate(chain, pump_v))
        rows.append(row)
    meta = _base_metadata("reproduce", presets.get_preset("wg-i"))
    meta["figure"] = "3d"
    return ResultTable(["pp_mw", "car_wg_i", "car_wg_v", "car_wg_vi"], rows, meta)


def _figure_5a() -> ResultTable:
    document = presets.get_preset("awg")
    chain, pump = cfg.build_experiment(document)
    peak = chain.demux.spec.peak_transmittance
    rows = []
    for pp_mw in np.geomspace(1.0, 60.0, 50):
        _, pump_v = montecarlo.apply_sweep_value(chain, pump, "pp", pp_mw * 1e-3)
        pred = cm.predict(chain, pump_v)
        rows.append([float(pp_mw), pred.mu_pair_generated * peak**2])
    meta = _base_metadata("reproduce", document)
    meta["figure"] = "5a"
    return ResultTable(["pp_mw", "pair_rate_per_pulse"], rows, meta)


def _figure_5b() -> ResultTable:
    document = presets.get_preset("awg")
    chain, pump = cfg.build_experiment(document)
    chain_lossless, _ = montecarlo.apply_sweep_value(chain, pump, "awg_loss", 0.0)
    chain_low_dark, _ = montecarlo.apply_sweep_value(chain, pump, "dark", 20.0)
    rows = []
    for pp_mw in np.geomspace(1.0, 60.0, 60):
        _, pump_v = montecarlo.apply_sweep_value(chain, pump, "pp", pp_mw * 1e-3)
        rows.append(
            [
                float(pp_mw),
                cm.car_estimate(chain, pump_v),
                cm.car_estimate(chain_lossless, pump_v),
                cm.car_estimate(chain_low_dark, pump_v),
            ]
        )
    meta = _base_metadata("reproduce", document)
    meta["figure"] = "5b"
    return ResultTable(["pp_mw", "car", "car_no_demux_loss", "car_low_dark"], rows, meta)


_FIGURE_BUILDERS = {
    "3a": _figure_3a,
    "3b": _figure_3b,
    "3c": _figure_3c,
    "3d": _figure_3d,
    "5a": _figure_5a,
    "5b": _figure_5b,
}


def cmd_reproduce(args, parser) -> int:
    table = _FIGURE_BUILDERS[args.figure]()
    _write_output(args, table)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_config_arguments(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("config", nargs="?", help="path to a JSON experiment configuration")
    sub.add_argument("--preset", help="name of a built-in configuration")


def _add_mc_arguments(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--pulses", type=int, default=1_000_000, help="number of pump pulses")
    sub.add_argument("--seed", type=int, default=0, help="master random seed")
    sub.add_argument("--threads", type=int, default=1, help="worker threads")
    sub.add_argument("--accidental-offset", type=int, default=1, help="accidental gate offset")
    sub.add_argument("--no-dead-time", action="store_true", help="disable detector dead time")
    sub.add_argument(
        "--pair-statistics", choices=montecarlo.PAIR_STATISTICS, default="poisson"
    )
    sub.add_argument("--thermal-modes", type=int, default=24)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pairsim",
        description="Photon-pair experiment simulator: closed-form rates, "
        "per-pulse counting runs, parameter sweeps and fits.",
    )
    parser.add_argument("--version", action="version", version=f"pairsim {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("predict", help="closed-form rate prediction")
    _add_config_arguments(p)
    p.add_argument("--out", help="write result to a .json or .csv file")
    p.set_defaults(func=cmd_predict)

    p = subs.add_parser("simulate", help="per-pulse counting run")
    _add_config_arguments(p)
    _add_mc_arguments(p)
    p.add_argument("--out", help="write result to a .json or .csv file")
    p.set_defaults(func=cmd_simulate)

    p = subs.add_parser("sweep", help="grid over one physical variable")
    _add_config_arguments(p)
    p.add_argument("--var", required=True, choices=montecarlo.SWEEP_VARIABLES)
    p.add_argument(
        "--grid",
        required=True,
        help="start:stop:count or log:start:stop:count "
        "(cm for lengths, mW for pp, dB for awg_loss, Hz for dark)",
    )
    p.add_argument("--mc", action="store_true", help="add a counting run per grid point")
    _add_mc_arguments(p)
    p.add_argument("--out", help="write table to a .json or .csv file")
    p.set_defaults(func=cmd_sweep)

    p = subs.add_parser("fit", help="fit model parameters to CSV data")
    p.add_argument("data", help="CSV with columns x,y[,sigma]")
    p.add_argument("--model", required=True, choices=["decay", "gamma_alpha", "poly"])
    p.add_argument("--config", help="configuration supplying fixed parameters")
    p.add_argument("--preset", help="preset supplying fixed parameters")
    p.add_argument("--out", help="write fit result as JSON")
    p.set_defaults(func=cmd_fit)

    p = subs.add_parser("reproduce", help="emit a built-in study curve")
    p.add_argument("--figure", required=True, choices=FIGURES)
    p.add_argument("--out", help="write table to a .json or .csv file")
    p.set_defaults(func=cmd_reproduce)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except cm.InvalidProbabilityError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (cfg.ConfigError, fitting.DegenerateDataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
