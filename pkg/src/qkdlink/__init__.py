"""Decoy-state BB84 fiber-link simulator and key-rate analyzer.

Models a 625 MHz time-bin BB84 system end to end: weak-coherent source,
installed-fiber channel with a WDM-multiplexed classical clock, passive 2x4
interferometric decoding, gated superconducting single-photon detectors,
sifting/QBER accounting, and three-intensity decoy-state estimation of the
asymptotic secure key rate.
"""

from .core import (
    Basis,
    IntensityTable,
    Prbs7,
    QuantumSymbol,
    RngStream,
    binary_entropy,
    db_to_transmittance,
    poisson_sample,
)
from .optics import (
    ChannelModel,
    ReceiverModel,
    SyncMode,
    TransmitterModel,
    dark_click_probability,
    noise_photons_per_pulse,
    routing_probabilities,
    total_transmittance,
)
from .timing import DriftModel, GateModel, arrival_offset, gate_acceptance, track_gate
from .simulate import (
    DetectionEvent,
    DoubleClickPolicy,
    LinkScenario,
    RunStats,
    resolve_double_clicks,
    run_analytic,
    run_montecarlo,
    time_series,
)
from .distill import SiftedBatch, ec_cost, sift, sifted_rate
from .decoy import DecoyEstimate, IntensityStats, e1_upper, secure_rate, y1_lower

__version__ = "0.1.0"

__all__ = [
    "Basis",
    "ChannelModel",
    "DecoyEstimate",
    "DetectionEvent",
    "DoubleClickPolicy",
    "DriftModel",
    "GateModel",
    "IntensityStats",
    "IntensityTable",
    "LinkScenario",
    "Prbs7",
    "QuantumSymbol",
    "ReceiverModel",
    "RngStream",
    "RunStats",
    "SiftedBatch",
    "SyncMode",
    "TransmitterModel",
    "arrival_offset",
    "binary_entropy",
    "dark_click_probability",
    "db_to_transmittance",
    "e1_upper",
    "ec_cost",
    "gate_acceptance",
    "noise_photons_per_pulse",
    "poisson_sample",
    "resolve_double_clicks",
    "routing_probabilities",
    "run_analytic",
    "run_montecarlo",
    "secure_rate",
    "sift",
    "sifted_rate",
    "time_series",
    "track_gate",
    "y1_lower",
    "__version__",
]
