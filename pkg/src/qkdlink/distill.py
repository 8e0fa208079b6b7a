"""Classical post-processing: sifting, QBER, rate conversion, EC cost.

Only the asymptotic accounting is implemented: the simulator knows ground
truth, so QBER is computed over the full sifted batch instead of a
disclosed sample, and error correction enters as its Shannon-limit cost.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import QuantumSymbol, binary_entropy
from .errors import DataError
from .optics import detector_basis, detector_bit
from .simulate import DetectionEvent, DoubleClickPolicy, RunStats

__all__ = ["SiftedBatch", "sift", "sifted_rate", "ec_cost"]


@dataclass(frozen=True)
class SiftedBatch:
    """Matched-basis (alice_bit, bob_bit) pairs grouped by intensity label."""

    pairs: Mapping[str, np.ndarray]  # arrays of shape (n, 2), columns alice/bob

    def count(self, label: str | None = None) -> int:
        if label is not None:
            return len(self.pairs.get(label, ()))
        return sum(len(v) for v in self.pairs.values())

    def errors(self, label: str | None = None) -> int:
        labels = [label] if label is not None else list(self.pairs)
        total = 0
        for lab in labels:
            arr = self.pairs.get(lab)
            if arr is not None and len(arr):
                total += int(np.sum(arr[:, 0] != arr[:, 1]))
        return total

    def qber(self, label: str | None = None) -> float:
        n = self.count(label)
        return self.errors(label) / n if n else 0.0


def sift(
    alice_symbols: Sequence[QuantumSymbol],
    detections: Iterable[DetectionEvent],
    policy: DoubleClickPolicy = DoubleClickPolicy.DISCARD,
    rng: np.random.Generator | None = None,
) -> SiftedBatch:
    """Keep in-gate events whose detector basis matches Alice's basis.

    Out-of-gate events are dropped. Pulses with in-gate clicks on several
    detectors are collapsed per ``policy`` (RANDOM_BIT requires ``rng``).
    Event pulse indices must reference ``alice_symbols``.
    """
    per_pulse: dict[int, list[int]] = defaultdict(list)
    n_symbols = len(alice_symbols)
    for ev in detections:
        if not 0 <= ev.pulse_index < n_symbols:
            raise DataError(
                f"detection references pulse {ev.pulse_index}, "
                f"but only {n_symbols} symbols were provided"
            )
        if ev.within_gate:
            per_pulse[ev.pulse_index].append(ev.detector_id)

    if policy is DoubleClickPolicy.RANDOM_BIT and rng is None:
        rng = np.random.default_rng(0)

    pairs: dict[str, list[tuple[int, int]]] = defaultdict(list)
    for pulse_index in sorted(per_pulse):
        dets = per_pulse[pulse_index]
        if len(dets) == 1:
            winner = dets[0]
        elif policy is DoubleClickPolicy.DISCARD:
            continue
        else:
            winner = dets[int(rng.integers(0, len(dets)))]
        symbol = alice_symbols[pulse_index]
        if detector_basis(winner) is symbol.basis:
            pairs[symbol.intensity_class].append((symbol.bit, detector_bit(winner)))

    return SiftedBatch(
        {lab: np.array(v, dtype=np.int8).reshape(-1, 2) for lab, v in pairs.items()}
    )


def sifted_rate(stats: RunStats, clock_rate_hz: float) -> dict[str, float]:
    """Sifted key rate in bits/s for each intensity class.

    rate = sifted/pulses_sent * clock * duty, where duty is the fraction of
    pulses carrying that intensity, so rates are what a wall-clock counter
    would measure during a mixed-intensity run.
    """
    total = stats.total_pulses
    if total <= 0:
        raise ValueError("stats contain no pulses")
    rates = {}
    for i, label in enumerate(stats.labels):
        sent = int(stats.pulses_sent[i])
        if sent == 0:
            rates[label] = 0.0
            continue
        duty = sent / total
        rates[label] = stats.sifted_count[i] / sent * clock_rate_hz * duty
    return rates


def ec_cost(qber: float, f_inefficiency: float = 1.0) -> float:
    """Bits disclosed per sifted bit by error correction: f * H2(E)."""
    if not 0.0 <= qber <= 0.5:
        raise ValueError(f"QBER must be in [0, 0.5], got {qber}")
    if f_inefficiency < 1.0:
        raise ValueError("error-correction inefficiency must be >= 1")
    return f_inefficiency * binary_entropy(qber)
