"""Photon-arrival drift, clock-recovery tracking, and timing-gate acceptance.

Fiber length changes with temperature move the photon arrival time by
several slots over a field run; the classical clock channel exists to track
that drift. The models here reduce the whole chain to one number per
instant: the residual misalignment of the 400 ps counting gate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .optics import SyncMode

__all__ = [
    "DriftModel",
    "GateModel",
    "arrival_offset",
    "gate_acceptance",
    "track_gate",
]


@dataclass(frozen=True)
class DriftModel:
    """Arrival-time drift from fiber length change.

    ``temperature_profile`` is a piecewise-linear Delta-T(t) in degrees C
    given as (t_seconds, delta_t) breakpoints over the run duration. One
    degree on 100 km shifts the arrival by ``coefficient_ns`` nanoseconds
    (default 5, about three slots of a 625 MHz system). In paired-fiber
    operation only ``differential_fraction`` of the drift is uncompensated
    (the two fibers share the environment but not perfectly); with WDM the
    clock rides the same fiber and the drift is fully common-mode.
    """

    fiber_length_km: float
    temperature_profile: tuple[tuple[float, float], ...] = ((0.0, 0.0),)
    coefficient_ns: float = 5.0
    differential_fraction: float = 0.05

    def __post_init__(self) -> None:
        if self.fiber_length_km < 0:
            raise ValueError("fiber length must be >= 0 km")
        if self.coefficient_ns < 0:
            raise ValueError("drift coefficient must be >= 0")
        if not 0.0 <= self.differential_fraction <= 1.0:
            raise ValueError("differential_fraction must be in [0, 1]")
        profile = tuple((float(t), float(dt)) for t, dt in self.temperature_profile)
        if not profile:
            raise ValueError("temperature profile must have at least one breakpoint")
        times = [t for t, _ in profile]
        if sorted(times) != times:
            raise ValueError("temperature profile breakpoints must be time-ordered")
        object.__setattr__(self, "temperature_profile", profile)

    def delta_t(self, t: float) -> float:
        """Interpolated temperature change at time t (seconds)."""
        times = np.array([p[0] for p in self.temperature_profile])
        temps = np.array([p[1] for p in self.temperature_profile])
        if t < times[0] or t > times[-1]:
            raise ValueError(
                f"t={t} s outside the profile domain [{times[0]}, {times[-1]}]"
            )
        return float(np.interp(t, times, temps))


@dataclass(frozen=True)
class GateModel:
    """Counting gate inside each clock slot plus system timing jitter.

    ``alignment_error_ps`` is the dynamic offset of the gate center from the
    mean photon arrival, produced by the tracking model.
    """

    gate_width_ps: float = 400.0
    slot_width_ps: float = 1600.0
    jitter_sigma_ps: float = 110.0
    alignment_error_ps: float = 0.0

    def __post_init__(self) -> None:
        if not 0 < self.gate_width_ps <= self.slot_width_ps:
            raise ValueError("gate width must be in (0, slot width]")
        if self.jitter_sigma_ps < 0:
            raise ValueError("jitter sigma must be >= 0")

    def with_alignment_error(self, alignment_error_ps: float) -> "GateModel":
        return GateModel(
            self.gate_width_ps,
            self.slot_width_ps,
            self.jitter_sigma_ps,
            alignment_error_ps,
        )

    @property
    def noise_fraction(self) -> float:
        return self.gate_width_ps / self.slot_width_ps


def arrival_offset(t: float, drift: DriftModel) -> float:
    """Raw arrival-time offset in ns at time t, before any compensation.

    Linear in the temperature change and the fiber length:
    offset = coefficient * Delta-T(t) * (length / 100 km).
    """
    return drift.coefficient_ns * drift.delta_t(t) * (drift.fiber_length_km / 100.0)


def track_gate(
    offsets_ns: "np.ndarray | list[float] | float",
    sync_mode: SyncMode,
    tracking: bool = True,
    differential_fraction: float = 0.05,
) -> np.ndarray:
    """Gate alignment error (ns) left after clock recovery.

    With tracking enabled, WDM recovery cancels the drift entirely (clock
    and photons share the fiber, so the shift is common-mode); paired-fiber
    recovery leaves the differential part. With tracking disabled the raw
    offset walks the gate away from the arrivals.
    """
    offsets = np.atleast_1d(np.asarray(offsets_ns, dtype=float))
    if not tracking:
        return offsets
    if sync_mode is SyncMode.WDM:
        return np.zeros_like(offsets)
    return offsets * differential_fraction


def gate_acceptance(gate: GateModel) -> tuple[float, float]:
    """(signal_fraction, noise_fraction) of the counting gate.

    Signal arrivals are Gaussian around the gate center offset by the
    alignment error with the system jitter as sigma; background is uniform
    over the slot, so its acceptance is exactly the gate duty fraction.
    """
    half = gate.gate_width_ps / 2.0
    a = gate.alignment_error_ps
    sigma = gate.jitter_sigma_ps
    if sigma == 0.0:
        signal = 1.0 if abs(a) <= half else 0.0
    else:
        z_hi = (half - a) / (sigma * math.sqrt(2.0))
        z_lo = (-half - a) / (sigma * math.sqrt(2.0))
        signal = 0.5 * (math.erf(z_hi) - math.erf(z_lo))
    return signal, gate.noise_fraction
