"""Machine-readable run reports.

Reports are JSON with sorted keys; re-running the recorded command with the
recorded scenario and seed reproduces the document byte-for-byte except for
the ``timestamp`` field.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .decoy import DecoyEstimate, IntensityStats
from .scenario import scenario_to_dict
from .simulate import LinkExpectation, LinkScenario, RunStats

__all__ = [
    "REPORT_SCHEMA_VERSION",
    "build_report",
    "stats_section",
    "expectation_section",
    "verify_section",
    "decoy_section",
    "write_report",
    "render_report",
]

REPORT_SCHEMA_VERSION = 1

# z-score bound for the Monte-Carlo vs analytic cross check: binomial
# fluctuations stay inside 4 sigma for any realistic run count.
VERIFY_SIGMA = 4.0


def build_report(
    command: str,
    scenario: LinkScenario,
    seed: int | None = None,
    pulses: int | None = None,
    **sections,
) -> dict:
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "generator": {"tool": "qkdlink", "version": __version__},
        "command": command,
        "seed": seed,
        "pulses": pulses,
        "scenario": scenario_to_dict(scenario),
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    report.update(sections)
    return report


def stats_section(stats: RunStats, clock_rate_hz: float) -> dict:
    total = stats.total_pulses
    per_intensity = {}
    for i, label in enumerate(stats.labels):
        sent = int(stats.pulses_sent[i])
        sifted = int(stats.sifted_count[i])
        errors = int(stats.error_count[i])
        qber = errors / sifted if sifted else 0.0
        stderr = math.sqrt(qber * (1 - qber) / sifted) if sifted else 0.0
        duty = sent / total if total else 0.0
        per_intensity[label] = {
            "mu": stats.mu[i],
            "pulses_sent": sent,
            "clicks_in_gate": int(stats.clicks_in_gate[i]),
            "clicks_out_of_gate": int(stats.clicks_out_of_gate[i]),
            "sifted_count": sifted,
            "error_count": errors,
            "gain": stats.gain(label),
            "qber": qber,
            "qber_stderr": stderr,
            "sifted_rate_bps": (sifted / sent * clock_rate_hz * duty) if sent else 0.0,
        }
    return {
        "per_intensity": per_intensity,
        "totals": {
            "pulses": total,
            "clicks_in_gate": int(stats.clicks_in_gate.sum()),
            "clicks_out_of_gate": int(stats.clicks_out_of_gate.sum()),
            "sifted_count": int(stats.sifted_count.sum()),
            "error_count": int(stats.error_count.sum()),
        },
    }


def expectation_section(expectation: LinkExpectation) -> dict:
    per_intensity = {}
    for e in expectation.per_intensity:
        per_intensity[e.label] = {
            "mu": e.mu,
            "gain": e.gain,
            "qber": e.qber,
            "signal_gain": e.signal_gain,
            "background_yield": e.background_yield,
            "dark_yield": e.dark_yield,
            "dark_qber_share": e.dark_qber_share,
            "out_of_gate_gain": e.out_of_gate_gain,
            "sifted_fraction": e.sifted_fraction,
            "sifted_rate_bps": e.sifted_rate_bps(expectation.clock_rate_hz),
        }
    return {
        "per_intensity": per_intensity,
        "signal_gate_fraction": expectation.signal_gate_fraction,
        "noise_gate_fraction": expectation.noise_gate_fraction,
    }


def verify_section(stats: RunStats, expectation: LinkExpectation) -> dict:
    """Cross-check Monte-Carlo tallies against the analytic oracle."""
    checks = {}
    ok = True
    for i, label in enumerate(stats.labels):
        e = expectation.intensity(label)
        sent = int(stats.pulses_sent[i])
        sifted = int(stats.sifted_count[i])
        gain_sigma = math.sqrt(max(e.gain * (1 - e.gain) / sent, 1e-300)) if sent else 0.0
        gain_z = (stats.gain(label) - e.gain) / gain_sigma if gain_sigma else 0.0
        if sifted and 0 < e.qber < 1:
            qber_sigma = math.sqrt(e.qber * (1 - e.qber) / sifted)
            qber_z = (stats.qber(label) - e.qber) / qber_sigma
        else:
            qber_z = 0.0
        passed = bool(abs(gain_z) <= VERIFY_SIGMA and abs(qber_z) <= VERIFY_SIGMA)
        ok = ok and passed
        checks[label] = {
            "gain_z": float(gain_z),
            "qber_z": float(qber_z),
            "pass": passed,
        }
    return {"sigma_bound": VERIFY_SIGMA, "per_intensity": checks, "pass": ok}


def decoy_section(estimate: DecoyEstimate, inputs: list[IntensityStats]) -> dict:
    return {
        "inputs": [asdict(s) for s in sorted(inputs, key=lambda s: s.mu)],
        "estimate": asdict(estimate),
    }


def render_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def write_report(report: dict, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_report(report), encoding="utf-8")
    return path
