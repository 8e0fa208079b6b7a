"""Fit the unpublished link constants to measured rate/QBER targets.

The device datasheets pin everything except the lumped receiver insertion
transmittance and the per-distance interferometer visibility. This module
solves for them: a shared insertion transmittance by weighted least squares
over all sifted-rate targets, then a per-distance visibility from the QBER
targets with the extinction ratio held at its specified value.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

from scipy.optimize import brentq, minimize_scalar

from .core import IntensityTable
from .errors import CalibrationError, DataError
from .optics import ChannelModel, ReceiverModel, TransmitterModel
from .simulate import LinkScenario, run_analytic
from .timing import DriftModel, GateModel

__all__ = [
    "CalibrationTarget",
    "CalibrationResult",
    "load_targets",
    "calibrate",
    "write_overlays",
]


@dataclass(frozen=True)
class CalibrationTarget:
    distance_km: float
    loss_db: float
    clock_launch_power_dbm: float
    mu: float
    sifted_bps: float
    qber: float
    sifted_tol_rel: float = 0.20
    qber_tol_abs: float = 0.005


@dataclass(frozen=True)
class TargetResidual:
    target: CalibrationTarget
    predicted_bps: float
    predicted_qber: float

    @property
    def rate_rel_error(self) -> float:
        return (self.predicted_bps - self.target.sifted_bps) / self.target.sifted_bps

    @property
    def qber_abs_error(self) -> float:
        return self.predicted_qber - self.target.qber

    @property
    def within_tolerance(self) -> bool:
        return (
            abs(self.rate_rel_error) <= self.target.sifted_tol_rel
            and abs(self.qber_abs_error) <= self.target.qber_tol_abs
        )


@dataclass(frozen=True)
class CalibrationResult:
    eta_rx: float
    y0: float
    e_opt: dict[float, float]          # per distance
    visibility: dict[float, float]     # per distance
    eta_rx_per_distance: dict[float, float]  # exact single-distance solves
    residuals: tuple[TargetResidual, ...]

    @property
    def all_within_tolerance(self) -> bool:
        return all(r.within_tolerance for r in self.residuals)


def load_targets(path: str) -> list[CalibrationTarget]:
    """Read calibration targets from CSV ('#' lines are comments)."""
    targets = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read calibration targets: {exc}") from exc
    with fh:
        filtered = (line for line in fh if line.strip() and not line.lstrip().startswith("#"))
        reader = csv.DictReader(filtered)
        required = {
            "distance_km", "loss_db", "clock_launch_power_dbm",
            "mu", "sifted_bps", "qber",
        }
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise DataError(
                f"calibration targets need columns {sorted(required)}, got {reader.fieldnames}"
            )
        for lineno, row in enumerate(reader, start=2):
            try:
                targets.append(
                    CalibrationTarget(
                        distance_km=float(row["distance_km"]),
                        loss_db=float(row["loss_db"]),
                        clock_launch_power_dbm=float(row["clock_launch_power_dbm"]),
                        mu=float(row["mu"]),
                        sifted_bps=float(row["sifted_bps"]),
                        qber=float(row["qber"]),
                        sifted_tol_rel=float(row.get("sifted_tol_rel") or 0.20),
                        qber_tol_abs=float(row.get("qber_tol_abs") or 0.005),
                    )
                )
            except (TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    if not targets:
        raise DataError(f"{path}: no calibration targets found")
    return targets


def _scenario_for(
    target: CalibrationTarget, receiver: ReceiverModel, clock_rate_hz: float
) -> LinkScenario:
    return LinkScenario(
        transmitter=TransmitterModel(
            intensities=IntensityTable.single(target.mu), clock_rate_hz=clock_rate_hz
        ),
        channel=ChannelModel(
            loss_db=target.loss_db,
            length_km=target.distance_km,
            clock_launch_power_dbm=target.clock_launch_power_dbm,
        ),
        receiver=receiver,
        drift=DriftModel(fiber_length_km=target.distance_km),
        gate=GateModel(),
    )


def _predict(
    target: CalibrationTarget, receiver: ReceiverModel, clock_rate_hz: float
) -> tuple[float, float]:
    exp = run_analytic(_scenario_for(target, receiver, clock_rate_hz))
    e = exp.per_intensity[0]
    return e.sifted_rate_bps(clock_rate_hz), e.qber


def calibrate(
    targets: list[CalibrationTarget],
    receiver: ReceiverModel | None = None,
    clock_rate_hz: float = 625e6,
) -> CalibrationResult:
    """Solve for (shared eta_rx, per-distance visibility) against the targets.

    The dark yield Y0 comes from the receiver's dark-rate specification
    (midpoint detectors by default), not from the fit. Raises
    CalibrationError when the problem is underdetermined (fewer than two
    targets) or infeasible (a rate target below the dark floor, or a QBER
    target below the extinction-limited floor).
    """
    if len(targets) < 2:
        raise CalibrationError(
            "underdetermined: need at least two target rows to separate the "
            "shared insertion transmittance from a per-distance error floor"
        )
    base = receiver or ReceiverModel()
    gate = GateModel()
    y0 = sum(base.dark_count_rate_hz) / clock_rate_hz * gate.noise_fraction

    # Feasibility: every rate target must exceed the detector dark floor.
    dark_floor_bps = 0.5 * y0 * clock_rate_hz
    for t in targets:
        if t.sifted_bps <= dark_floor_bps:
            raise CalibrationError(
                f"infeasible: target {t.sifted_bps} bps at {t.distance_km} km "
                f"is below the dark floor {dark_floor_bps:.2f} bps"
            )

    def rate_objective(eta_rx: float) -> float:
        trial = replace(base, insertion_transmittance=eta_rx)
        total = 0.0
        for t in targets:
            pred, _ = _predict(t, trial, clock_rate_hz)
            total += ((pred - t.sifted_bps) / t.sifted_bps) ** 2 / t.sifted_tol_rel**2
        return total

    fit = minimize_scalar(rate_objective, bounds=(1e-4, 1.0), method="bounded")
    eta_rx = float(fit.x)
    if not fit.success or eta_rx >= 0.999:
        raise CalibrationError("infeasible: rate targets require eta_rx >= 1")

    # Exact per-distance solves (diagnostic: how consistent is one shared value?)
    eta_rx_per_distance: dict[float, float] = {}
    for dist in sorted({t.distance_km for t in targets}):
        rows = [t for t in targets if t.distance_km == dist]
        anchor = max(rows, key=lambda t: t.mu)

        def one(eta: float, t=anchor) -> float:
            pred, _ = _predict(t, replace(base, insertion_transmittance=eta), clock_rate_hz)
            return pred - t.sifted_bps

        try:
            eta_rx_per_distance[dist] = float(brentq(one, 1e-5, 0.9999))
        except ValueError as exc:
            raise CalibrationError(
                f"infeasible: no insertion transmittance reproduces "
                f"{anchor.sifted_bps} bps at {dist} km"
            ) from exc

    # Per-distance visibility from the QBER rows, extinction ratio held fixed.
    shared = replace(base, insertion_transmittance=eta_rx)
    time_err = shared.time_error_probability
    e_opt: dict[float, float] = {}
    visibility: dict[float, float] = {}
    for dist in sorted({t.distance_km for t in targets}):
        rows = [t for t in targets if t.distance_km == dist]
        num = den = 0.0
        for t in rows:
            exp = run_analytic(_scenario_for(t, shared, clock_rate_hz)).per_intensity[0]
            q = exp.gain
            background = exp.background_yield
            signal = q - background
            a = 0.5 * background / q
            b = signal / q
            w = 1.0 / t.qber_tol_abs**2
            num += w * b * (t.qber - a)
            den += w * b * b
        e_fit = num / den
        phase_err = 2.0 * e_fit - time_err
        if phase_err < 0 or phase_err > 1:
            raise CalibrationError(
                f"infeasible: QBER targets at {dist} km imply a phase error "
                f"of {phase_err:.4f} outside [0, 1] (extinction-limited floor "
                f"is {time_err / 2:.4f})"
            )
        e_opt[dist] = e_fit
        visibility[dist] = 1.0 - 2.0 * phase_err

    residuals = []
    for t in targets:
        trial = replace(
            shared, visibility=visibility[t.distance_km]
        )
        pred_bps, pred_qber = _predict(t, trial, clock_rate_hz)
        residuals.append(TargetResidual(t, pred_bps, pred_qber))

    return CalibrationResult(
        eta_rx=eta_rx,
        y0=y0,
        e_opt=e_opt,
        visibility=visibility,
        eta_rx_per_distance=eta_rx_per_distance,
        residuals=tuple(residuals),
    )


def write_overlays(result: CalibrationResult, output_dir: str) -> list[Path]:
    """Write one receiver-overlay INI per calibrated distance."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for dist in sorted(result.visibility):
        path = out / f"receiver_overlay_{dist:g}km.ini"
        path.write_text(
            "# Calibrated receiver constants; merge into the [receiver]\n"
            "# section of a scenario for this distance.\n"
            "[receiver]\n"
            f"insertion_transmittance = {result.eta_rx:.6f}\n"
            f"visibility = {result.visibility[dist]:.6f}\n",
            encoding="utf-8",
        )
        paths.append(path)
    return paths
