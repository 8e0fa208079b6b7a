"""Command-line interface: simulate, expect, decoy, reproduce, calibrate.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 data error, 4 calibration error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .calibrate import calibrate, load_targets, write_overlays
from .decoy import IntensityStats, load_stats_table, secure_rate
from .errors import CalibrationError, DataError, ScenarioError
from .report import (
    build_report,
    decoy_section,
    expectation_section,
    render_report,
    stats_section,
    verify_section,
    write_report,
)
from .scenario import PRESETS, load_scenario
from .simulate import LinkScenario, run_analytic, run_montecarlo, time_series

__all__ = ["main"]

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_CALIBRATION = 4

# Distances, window counts and durations of the two reference field runs.
_FIG2_RUNS = (
    ("65km", 1800.0, 12),
    ("97km", 4800.0, 22),
)
_FIG3_MU = (0.05, 0.15, 0.4)
_FIG3_DISTANCES = ("65km", "97km")
_FIG3_MODES = ("wdm", "nowdm")

FIG2_SCHEMA = "fig2 schema v1: t_s,sifted_rate_bps,qber"
FIG3_SCHEMA = (
    "fig3 schema v1: distance_km,sync_mode,mu,gain_mc,qber_mc,sifted_bps_mc,"
    "gain_analytic,qber_analytic,sifted_bps_analytic"
)


def _int_arg(text: str) -> int:
    # accepts 1e8-style counts
    value = float(text)
    if value < 1 or value != int(value):
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return int(value)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qkdlink",
        description=(
            "Decoy-state BB84 link simulator: Monte-Carlo and analytic link "
            "statistics, decoy-state secure-rate bounds, field-run reproduction."
        ),
    )
    parser.add_argument("--version", action="version", version=f"qkdlink {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="Monte-Carlo run of a scenario or preset")
    sim.add_argument("scenario", help=f"scenario file or preset ({', '.join(PRESETS)})")
    sim.add_argument("--pulses", type=_int_arg, default=100_000_000)
    sim.add_argument("--seed", type=int, default=1)
    sim.add_argument("--threads", type=int, default=1)
    sim.add_argument("--verify", action="store_true",
                     help="cross-check tallies against the analytic model (4 sigma)")
    sim.add_argument("--output", help="write the JSON report here")
    sim.add_argument("--events", help="dump per-detection events to this CSV")

    exp = sub.add_parser("expect", help="closed-form expectations of a scenario")
    exp.add_argument("scenario")
    exp.add_argument("--output")

    dec = sub.add_parser("decoy", help="decoy-state bounds and secure key rate")
    dec.add_argument("source", help="stats CSV (mu,value,value_kind,qber), scenario file, or preset")
    dec.add_argument("--clock-hz", type=float, default=625e6)
    dec.add_argument("--sifting-q", type=float, default=0.5)
    dec.add_argument("--f-ec", type=float, default=1.0)
    dec.add_argument("--output")

    rep = sub.add_parser("reproduce", help="regenerate the reference-run datasets")
    rep.add_argument("figure", choices=("fig2", "fig3"))
    rep.add_argument("--output-dir", default=".")
    rep.add_argument("--pulses", type=_int_arg, default=None,
                     help="pulses per point (fig3) or per window (fig2)")
    rep.add_argument("--seed", type=int, default=1)
    rep.add_argument("--threads", type=int, default=1)

    cal = sub.add_parser("calibrate", help="fit link constants to measured targets")
    cal.add_argument("targets", help="CSV of measured (distance, mu, sifted_bps, qber) rows")
    cal.add_argument("--output-dir", help="write per-distance receiver overlays here")
    return parser


def _single_intensity(scenario: LinkScenario, label: str) -> LinkScenario:
    table = scenario.intensities.restricted([label])
    return replace(scenario, transmitter=replace(scenario.transmitter, intensities=table))


def _label_for_mu(scenario: LinkScenario, mu: float) -> str:
    for label, value in zip(scenario.intensities.labels, scenario.intensities.mu):
        if abs(value - mu) < 1e-12:
            return label
    raise ScenarioError(f"scenario has no intensity class with mu = {mu}")


def _decoy_from_stats(stats, clock_rate_hz: float, q: float, f_ec: float):
    inputs = [
        IntensityStats(mu=stats.mu[i], gain=stats.gain(label), qber=stats.qber(label))
        for i, label in enumerate(stats.labels)
    ]
    return inputs, secure_rate(inputs, q_sifting=q, f_ec=f_ec, clock_rate_hz=clock_rate_hz)


def _cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    clock = scenario.transmitter.clock_rate_hz
    stats = run_montecarlo(
        scenario, args.pulses, args.seed, threads=args.threads, events_path=args.events
    )
    sections = {"results": stats_section(stats, clock)}

    mus = scenario.intensities.mu
    if len(mus) >= 3 and 0.0 in mus:
        inputs, estimate = _decoy_from_stats(stats, clock, 0.5, 1.0)
        sections["decoy"] = decoy_section(estimate, inputs)
    else:
        sections["decoy"] = None

    verify_ok = True
    if args.verify:
        expectation = run_analytic(scenario)
        sections["verify"] = verify_section(stats, expectation)
        verify_ok = sections["verify"]["pass"]
    else:
        sections["verify"] = None

    report = build_report("simulate", scenario, seed=args.seed, pulses=args.pulses, **sections)
    _emit(report, args.output)
    return EXIT_OK if verify_ok else EXIT_VERIFY_FAILED


def _cmd_expect(args) -> int:
    scenario = load_scenario(args.scenario)
    expectation = run_analytic(scenario)
    sections = {"analytic": expectation_section(expectation)}
    mus = scenario.intensities.mu
    if len(mus) >= 3 and 0.0 in mus:
        inputs = [
            IntensityStats(mu=e.mu, gain=e.gain, qber=e.qber)
            for e in expectation.per_intensity
        ]
        estimate = secure_rate(inputs, clock_rate_hz=scenario.transmitter.clock_rate_hz)
        sections["decoy"] = decoy_section(estimate, inputs)
    else:
        sections["decoy"] = None
    report = build_report("expect", scenario, **sections)
    _emit(report, args.output)
    return EXIT_OK


def _cmd_decoy(args) -> int:
    source = args.source
    if source in PRESETS or source.endswith(".ini"):
        scenario = load_scenario(source)
        clock = scenario.transmitter.clock_rate_hz
        expectation = run_analytic(scenario)
        inputs = [
            IntensityStats(mu=e.mu, gain=e.gain, qber=e.qber)
            for e in expectation.per_intensity
        ]
    else:
        clock = args.clock_hz
        inputs = load_stats_table(source, clock_rate_hz=clock)
    estimate = secure_rate(
        inputs, q_sifting=args.sifting_q, f_ec=args.f_ec, clock_rate_hz=clock
    )
    report = {
        "schema_version": 1,
        "generator": {"tool": "qkdlink", "version": __version__},
        "command": "decoy",
        "source": source,
        "decoy": decoy_section(estimate, inputs),
    }
    _emit(report, args.output)
    return EXIT_OK


def _cmd_reproduce(args) -> int:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.figure == "fig2":
        pulses = args.pulses or 200_000_000
        for dist, duration, n_windows in _FIG2_RUNS:
            scenario = _single_intensity(load_scenario(f"{dist}-wdm"), "signal")
            points = time_series(
                scenario,
                duration_s=duration,
                window_s=duration / n_windows,
                seed=args.seed,
                pulses_per_window=pulses,
                threads=args.threads,
            )
            path = out / f"fig2_{dist}.csv"
            with path.open("w", newline="", encoding="utf-8") as fh:
                fh.write(f"# {FIG2_SCHEMA}\n")
                writer = csv.writer(fh)
                writer.writerow(["t_s", "sifted_rate_bps", "qber"])
                for p in points:
                    writer.writerow([f"{p.t_s:.3f}", f"{p.sifted_rate_bps:.6f}", f"{p.qber:.8f}"])
            print(f"wrote {path}")
    else:
        pulses = args.pulses or 100_000_000
        path = out / "fig3.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            fh.write(f"# {FIG3_SCHEMA}\n")
            writer = csv.writer(fh)
            writer.writerow(
                ["distance_km", "sync_mode", "mu", "gain_mc", "qber_mc", "sifted_bps_mc",
                 "gain_analytic", "qber_analytic", "sifted_bps_analytic"]
            )
            for dist in _FIG3_DISTANCES:
                for mode in _FIG3_MODES:
                    preset = load_scenario(f"{dist}-{mode}")
                    for mu in _FIG3_MU:
                        scenario = _single_intensity(preset, _label_for_mu(preset, mu))
                        label = scenario.intensities.labels[0]
                        stats = run_montecarlo(
                            scenario, pulses, args.seed, threads=args.threads
                        )
                        exp = run_analytic(scenario).intensity(label)
                        clock = scenario.transmitter.clock_rate_hz
                        sifted_bps = stats.sifted_count[0] / stats.pulses_sent[0] * clock
                        writer.writerow([
                            dist[:-2],
                            preset.channel.sync_mode.value,
                            mu,
                            f"{stats.gain(label):.8e}",
                            f"{stats.qber(label):.8f}",
                            f"{sifted_bps:.6f}",
                            f"{exp.gain:.8e}",
                            f"{exp.qber:.8f}",
                            f"{exp.sifted_rate_bps(clock):.6f}",
                        ])
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    targets = load_targets(args.targets)
    result = calibrate(targets)
    print(f"insertion transmittance (shared fit): {result.eta_rx:.6f}")
    for dist, eta in sorted(result.eta_rx_per_distance.items()):
        print(f"  exact single-distance solve {dist:g} km: {eta:.6f}")
    print(f"dark yield Y0 (from detector specs): {result.y0:.4e}")
    for dist in sorted(result.visibility):
        print(
            f"{dist:g} km: optical error {result.e_opt[dist]:.6f}, "
            f"visibility {result.visibility[dist]:.6f}"
        )
    print("residuals:")
    for r in result.residuals:
        t = r.target
        print(
            f"  {t.distance_km:g} km mu={t.mu:g}: "
            f"rate {r.predicted_bps:.1f} bps vs {t.sifted_bps:g} "
            f"({100 * r.rate_rel_error:+.1f}%), "
            f"QBER {100 * r.predicted_qber:.3f}% vs {100 * t.qber:.3f}% "
            f"({100 * r.qber_abs_error:+.3f} abs) "
            f"[{'ok' if r.within_tolerance else 'OUT OF TOLERANCE'}]"
        )
    print(f"all targets within tolerance: {result.all_within_tolerance}")
    if args.output_dir:
        for path in write_overlays(result, args.output_dir):
            print(f"wrote {path}")
    return EXIT_OK


def _emit(report: dict, output: str | None) -> None:
    text = render_report(report)
    if output:
        write_report(report, output)
        print(f"wrote {output}")
    else:
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "simulate": _cmd_simulate,
        "expect": _cmd_expect,
        "decoy": _cmd_decoy,
        "reproduce": _cmd_reproduce,
        "calibrate": _cmd_calibrate,
    }
    try:
        return handlers[args.command](args)
    except ScenarioError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except CalibrationError as exc:
        print(f"calibration error: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION


if __name__ == "__main__":
    sys.exit(main())
