"""Physical models of transmitter, fiber channel, WDM noise, decoder, and SSPDs.

All models are reduced to per-pulse probabilities: fiber and receiver
insertion losses thin the photon stream, the passive 2x4 interferometric
decoder is a conditional routing matrix over four detectors, and detector
dark counts plus channel noise photons enter as per-slot background click
probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import Basis, IntensityTable, QuantumSymbol, db_to_transmittance

__all__ = [
    "SyncMode",
    "TransmitterModel",
    "ChannelModel",
    "ReceiverModel",
    "RoutingMatrix",
    "DETECTOR_COUNT",
    "detector_basis",
    "detector_bit",
    "total_transmittance",
    "routing_probabilities",
    "noise_photons_per_pulse",
    "dark_click_probability",
]

DETECTOR_COUNT = 4

# Detector layout: 0, 1 measure the time basis (bits 0, 1); 2, 3 the phase
# basis. This symmetric assignment is an assumption; the decoder hardware
# fixes only that two outputs serve each basis.
_TIME_DETECTORS = (0, 1)
_PHASE_DETECTORS = (2, 3)


def detector_basis(detector_id: int) -> Basis:
    return Basis.TIME if detector_id < 2 else Basis.PHASE


def detector_bit(detector_id: int) -> int:
    return detector_id % 2


class SyncMode(Enum):
    """How the classical clock reaches the receiver."""

    WDM = "wdm"            # multiplexed onto the quantum fiber
    PAIRED_FIBER = "paired_fiber"  # separate fiber of the same cable


@dataclass(frozen=True)
class TransmitterModel:
    """Pulsed weak-coherent source with time-bin encoding.

    ``stray_mu`` is the residual classical leakage into the quantum channel
    at the transmitter output, in photons/pulse; it propagates with the
    signal and is attenuated by the full fiber loss.
    """

    intensities: IntensityTable
    clock_rate_hz: float = 625e6
    double_pulse_delay_ps: float = 800.0
    pulse_width_ps: float = 100.0
    stray_mu: float = 1e-4

    def __post_init__(self) -> None:
        if self.clock_rate_hz <= 0:
            raise ValueError("clock rate must be positive")
        slot_ps = 1e12 / self.clock_rate_hz
        if not 0 < self.double_pulse_delay_ps < slot_ps:
            raise ValueError(
                f"double-pulse delay must lie inside one {slot_ps:.0f} ps slot"
            )
        if self.pulse_width_ps <= 0:
            raise ValueError("pulse width must be positive")
        if self.stray_mu < 0:
            raise ValueError("stray_mu must be >= 0")

    @property
    def slot_width_ps(self) -> float:
        return 1e12 / self.clock_rate_hz


@dataclass(frozen=True)
class ChannelModel:
    """Installed-fiber span plus the co-propagating classical clock.

    ``raman_coefficient`` parametrizes spontaneous-scattering noise reaching
    the receiver input: photons/pulse per mW of launched clock power per
    100 GHz of quantum-channel filter bandwidth, before the anti-Stokes
    penalty. In PAIRED_FIBER mode the clock travels on a separate fiber and
    contributes no in-band noise.
    """

    loss_db: float
    length_km: float
    clock_launch_power_dbm: float = -33.3
    raman_coefficient: float = 0.008
    anti_stokes_penalty_db: float = 1.5
    sync_mode: SyncMode = SyncMode.WDM

    def __post_init__(self) -> None:
        if self.loss_db < 0:
            raise ValueError("loss must be >= 0 dB")
        if self.length_km < 0:
            raise ValueError("length must be >= 0 km")
        if self.anti_stokes_penalty_db < 0:
            raise ValueError("anti-Stokes penalty must be >= 0 dB")
        if self.raman_coefficient < 0:
            raise ValueError("raman_coefficient must be >= 0")

    @property
    def transmittance(self) -> float:
        return db_to_transmittance(self.loss_db)

    @property
    def clock_launch_power_mw(self) -> float:
        return 10.0 ** (self.clock_launch_power_dbm / 10.0)


@dataclass(frozen=True)
class ReceiverModel:
    """Receiver front end: lumped insertion loss, decoder quality, detectors.

    ``insertion_transmittance`` lumps the dispersion compensator, WDM
    coupler, narrowband filter, decoder insertion loss, and non-interfering
    time-slot loss into one calibration constant. ``visibility`` sets the
    phase-basis error (1-V)/2 and ``extinction_ratio_db`` the time-basis
    error eps/(1+eps). Per-detector efficiency and dark rate may be scalars
    (applied to all four detectors) or 4-tuples.
    """

    insertion_transmittance: float = 0.138315
    visibility: float = 0.960761
    extinction_ratio_db: float = 20.0
    detector_efficiency: tuple[float, ...] = (0.014,) * DETECTOR_COUNT
    dark_count_rate_hz: tuple[float, ...] = (125.0,) * DETECTOR_COUNT

    def __post_init__(self) -> None:
        for name in ("detector_efficiency", "dark_count_rate_hz"):
            value = getattr(self, name)
            if isinstance(value, (int, float)):
                value = (float(value),) * DETECTOR_COUNT
            else:
                value = tuple(float(v) for v in value)
            if len(value) != DETECTOR_COUNT:
                raise ValueError(f"{name} needs {DETECTOR_COUNT} entries, got {len(value)}")
            object.__setattr__(self, name, value)
        if not 0.0 <= self.insertion_transmittance <= 1.0:
            raise ValueError("insertion transmittance must be in [0, 1]")
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError("visibility must be in [0, 1]")
        if self.extinction_ratio_db < 0:
            raise ValueError("extinction ratio must be >= 0 dB")
        if any(not 0.0 <= e <= 1.0 for e in self.detector_efficiency):
            raise ValueError("detector efficiencies must be in [0, 1]")
        if any(d < 0 for d in self.dark_count_rate_hz):
            raise ValueError("dark count rates must be >= 0")

    @property
    def mean_detector_efficiency(self) -> float:
        return float(np.mean(self.detector_efficiency))

    @property
    def time_error_probability(self) -> float:
        """Wrong-bit probability within the time basis, eps/(1+eps)."""
        eps = db_to_transmittance(self.extinction_ratio_db)
        return eps / (1.0 + eps)

    @property
    def phase_error_probability(self) -> float:
        """Wrong-bit probability within the phase basis, (1-V)/2."""
        return (1.0 - self.visibility) / 2.0

    @property
    def matched_basis_error(self) -> float:
        """Optical error probability averaged over the four states."""
        return 0.5 * (self.time_error_probability + self.phase_error_probability)


@dataclass(frozen=True)
class RoutingMatrix:
    """Conditional detector probabilities P(detector | state), 4 states x 4 detectors.

    Rows follow the state index order (time-0, time-1, phase-0, phase-1);
    columns the detector ids. Ideal rows sum to one: decoder losses are
    accounted in the receiver insertion transmittance, not here.
    """

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (4, DETECTOR_COUNT):
            raise ValueError(f"routing matrix must be 4x{DETECTOR_COUNT}, got {m.shape}")
        if np.any(m < 0):
            raise ValueError("routing probabilities must be >= 0")
        if np.any(m.sum(axis=1) > 1.0 + 1e-12):
            raise ValueError("routing rows must sum to <= 1")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def ideal(cls, receiver: ReceiverModel) -> "RoutingMatrix":
        """Symmetric passive decoder with the receiver's visibility/extinction."""
        rows = [
            routing_probabilities(QuantumSymbol(Basis.TIME, 0), receiver),
            routing_probabilities(QuantumSymbol(Basis.TIME, 1), receiver),
            routing_probabilities(QuantumSymbol(Basis.PHASE, 0), receiver),
            routing_probabilities(QuantumSymbol(Basis.PHASE, 1), receiver),
        ]
        return cls(np.vstack(rows))

    def row(self, state_index: int) -> np.ndarray:
        return self.matrix[state_index]


def routing_probabilities(symbol: QuantumSymbol, receiver: ReceiverModel) -> np.ndarray:
    """Per-detector click probabilities for one photon at the decoder input.

    The decoder is passive: each photon picks a measurement basis with
    probability 1/2. In the matched basis the wrong-bit probability is
    eps/(1+eps) (time states, interferometer extinction) or (1-V)/2 (phase
    states, interference visibility); in the unmatched basis the outcome is
    an even split.
    """
    probs = np.empty(DETECTOR_COUNT)
    if symbol.basis is Basis.TIME:
        err = receiver.time_error_probability
        matched, unmatched = _TIME_DETECTORS, _PHASE_DETECTORS
    else:
        err = receiver.phase_error_probability
        matched, unmatched = _PHASE_DETECTORS, _TIME_DETECTORS
    correct = matched[symbol.bit]
    wrong = matched[1 - symbol.bit]
    probs[correct] = 0.5 * (1.0 - err)
    probs[wrong] = 0.5 * err
    probs[unmatched[0]] = 0.25
    probs[unmatched[1]] = 0.25
    return probs


def total_transmittance(
    channel: ChannelModel, receiver: ReceiverModel, gate_acceptance: float
) -> float:
    """End-to-end detection probability for one launched photon.

    Composition of fiber transmittance, lumped receiver insertion, mean
    detector efficiency, and the timing-gate acceptance for signal photons.
    """
    if not 0.0 <= gate_acceptance <= 1.0:
        raise ValueError("gate acceptance must be in [0, 1]")
    return (
        channel.transmittance
        * receiver.insertion_transmittance
        * receiver.mean_detector_efficiency
        * gate_acceptance
    )


def noise_photons_per_pulse(
    channel: ChannelModel,
    filter_bandwidth_ghz: float = 100.0,
    gate_fraction: float = 1.0,
    stray_mu: float = 1e-4,
) -> float:
    """Background photons/pulse at the receiver input, inside the gate.

    Two sources: spontaneous scattering of the co-propagating clock
    (suppressed by the anti-Stokes penalty when the quantum channel sits on
    the short-wavelength side, zero in paired-fiber mode) and transmitter
    stray light ``stray_mu`` attenuated by the full fiber loss. Receiver
    insertion loss and detector efficiency are applied downstream of this
    figure. The scattering term scales linearly with the quantum-channel
    filter bandwidth, referenced to 100 GHz.
    """
    if not 0.0 <= gate_fraction <= 1.0:
        raise ValueError("gate fraction must be in [0, 1]")
    if filter_bandwidth_ghz < 0:
        raise ValueError("filter bandwidth must be >= 0")
    if stray_mu < 0:
        raise ValueError("stray_mu must be >= 0")
    raman = 0.0
    if channel.sync_mode is SyncMode.WDM:
        raman = (
            channel.raman_coefficient
            * channel.clock_launch_power_mw
            * db_to_transmittance(channel.anti_stokes_penalty_db)
            * (filter_bandwidth_ghz / 100.0)
        )
    stray = stray_mu * channel.transmittance
    return (raman + stray) * gate_fraction


def dark_click_probability(
    receiver: ReceiverModel, gate_width_ps: float, clock_rate_hz: float
) -> float:
    """Per-pulse dark click probability summed over detectors, inside the gate.

    Each detector contributes dark_rate/clock_rate per slot; restricting
    counting to a gate of width w inside the 1/clock slot keeps the fraction
    w/slot of that background.
    """
    slot_ps = 1e12 / clock_rate_hz
    if not 0 < gate_width_ps <= slot_ps:
        raise ValueError(f"gate width must be in (0, {slot_ps:.0f}] ps")
    gate_fraction = gate_width_ps / slot_ps
    per_slot = sum(receiver.dark_count_rate_hz) / clock_rate_hz
    return per_slot * gate_fraction
