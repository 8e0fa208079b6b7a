"""Shared domain types, deterministic randomness, and elementary math.

Everything here is either immutable or advanced by pure state-transition
functions, so instances can be shared freely across worker threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Basis",
    "QuantumSymbol",
    "IntensityTable",
    "Prbs7",
    "PRBS7_PERIOD",
    "prbs7_next",
    "prbs7_sequence",
    "RngStream",
    "binary_entropy",
    "db_to_transmittance",
    "poisson_sample",
]


class Basis(Enum):
    """Encoding basis of a time-bin qubit."""

    TIME = 0
    PHASE = 1


@dataclass(frozen=True)
class QuantumSymbol:
    """Alice's per-pulse choice: basis, bit, and intensity class.

    The (basis, bit) pair maps one-to-one onto the four prepared states:
    the two polar states for the time basis and the two equatorial
    superpositions for the phase basis.
    """

    basis: Basis
    bit: int
    intensity_class: str = "signal"

    def __post_init__(self) -> None:
        if self.bit not in (0, 1):
            raise ValueError(f"bit must be 0 or 1, got {self.bit}")

    @property
    def state_index(self) -> int:
        """Index 0..3 into routing tables: 2*basis + bit."""
        return 2 * self.basis.value + self.bit


@dataclass(frozen=True)
class IntensityTable:
    """Ordered mean-photon-number classes with per-pulse selection weights.

    Args:
        labels: unique class names, e.g. ("vacuum", "decoy", "signal").
        mu: mean photons/pulse per label, all >= 0, at most one zero entry.
        weights: relative selection probabilities; normalized internally.
    """

    labels: tuple[str, ...]
    mu: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.labels) != len(self.mu) or len(self.labels) != len(self.weights):
            raise ValueError("labels, mu, and weights must have equal length")
        if not self.labels:
            raise ValueError("intensity table must not be empty")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("intensity labels must be unique")
        if any(m < 0 for m in self.mu):
            raise ValueError("mean photon numbers must be >= 0")
        if sum(1 for m in self.mu if m == 0.0) > 1:
            raise ValueError("at most one vacuum (mu = 0) entry is allowed")
        if any(w < 0 for w in self.weights) or sum(self.weights) <= 0:
            raise ValueError("selection weights must be >= 0 with positive sum")

    @classmethod
    def from_items(cls, items: Iterable[tuple[str, float, float]]) -> "IntensityTable":
        """Build from (label, mu, weight) triples."""
        labels, mu, weights = zip(*items)
        return cls(tuple(labels), tuple(float(m) for m in mu), tuple(float(w) for w in weights))

    @classmethod
    def single(cls, mu: float, label: str = "signal") -> "IntensityTable":
        return cls((label,), (float(mu),), (1.0,))

    @property
    def probabilities(self) -> tuple[float, ...]:
        total = sum(self.weights)
        return tuple(w / total for w in self.weights)

    def mu_of(self, label: str) -> float:
        return self.mu[self.labels.index(label)]

    def with_weights(self, weights: Sequence[float]) -> "IntensityTable":
        return IntensityTable(self.labels, self.mu, tuple(float(w) for w in weights))

    def restricted(self, labels: Sequence[str]) -> "IntensityTable":
        """Sub-table with the given labels, equal weights."""
        idx = [self.labels.index(lab) for lab in labels]
        return IntensityTable(
            tuple(self.labels[i] for i in idx),
            tuple(self.mu[i] for i in idx),
            tuple(1.0 for _ in idx),
        )


# ---------------------------------------------------------------------------
# PRBS 2^7 - 1

PRBS7_PERIOD = 127

# Fibonacci LFSR with feedback polynomial x^7 + x^6 + 1 (a maximal tap set,
# period 2^7 - 1). Stage 7 is bit 6 of the register and is the output.
_PRBS7_MASK = 0x7F


@dataclass(frozen=True)
class Prbs7:
    """State of a 7-bit maximal-length LFSR (pattern length 127).

    The register must never be all-zero; the all-zero state is a fixed
    point of the recurrence and produces a constant output.
    """

    register: int = 0x7F

    def __post_init__(self) -> None:
        if not 0 < self.register <= _PRBS7_MASK:
            raise ValueError(
                f"PRBS-7 register must be a nonzero 7-bit value, got {self.register:#x}"
            )

    def next(self) -> tuple[int, "Prbs7"]:
        """Return (output bit, advanced state)."""
        return prbs7_next(self)

    def sequence(self, n: int) -> np.ndarray:
        """First n output bits from this state as a uint8 array."""
        return prbs7_sequence(self, n)


def prbs7_next(state: Prbs7) -> tuple[int, Prbs7]:
    """Advance the PRBS-7 register by one step.

    Returns the output bit (stage 7) and the new state. Raises ValueError
    for an all-zero register, which cannot occur through normal stepping.
    """
    s = state.register
    if s == 0:
        raise ValueError("PRBS-7 register is all-zero (degenerate fixed point)")
    out = (s >> 6) & 1
    feedback = ((s >> 6) ^ (s >> 5)) & 1
    return out, Prbs7(((s << 1) | feedback) & _PRBS7_MASK)


def prbs7_sequence(state: Prbs7, n: int) -> np.ndarray:
    """Generate n successive PRBS-7 output bits starting from `state`."""
    if n < 0:
        raise ValueError("sequence length must be >= 0")
    out = np.empty(n, dtype=np.uint8)
    cur = state
    for i in range(n):
        bit, cur = prbs7_next(cur)
        out[i] = bit
    return out


# ---------------------------------------------------------------------------
# Deterministic random streams

@dataclass(frozen=True)
class RngStream:
    """A named, reproducible random stream.

    Streams are identified by (master seed, stream key). Identical
    identifiers reproduce byte-identical draw sequences; distinct keys give
    statistically independent streams. Keys are tuples so that hierarchical
    indexing (window, block, purpose) stays collision-free.
    """

    master_seed: int
    key: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        if isinstance(self.key, int):  # tolerate a bare block index
            object.__setattr__(self, "key", (self.key,))

    def child(self, *indices: int) -> "RngStream":
        return RngStream(self.master_seed, self.key + tuple(indices))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.master_seed, spawn_key=self.key)
        return np.random.Generator(np.random.PCG64(seq))


# ---------------------------------------------------------------------------
# Elementary math

def binary_entropy(x: float) -> float:
    """Binary Shannon entropy H2(x) in bits, with H2(0) = H2(1) = 0.

    Raises ValueError outside [0, 1].
    """
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary_entropy domain is [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def db_to_transmittance(loss_db: float) -> float:
    """Convert a non-negative loss in dB to a transmittance 10^(-loss/10)."""
    if loss_db < 0:
        raise ValueError(f"loss must be >= 0 dB, got {loss_db}")
    return 10.0 ** (-loss_db / 10.0)


def poisson_sample(mean: float, rng: "RngStream | np.random.Generator") -> int:
    """Draw one sample from Poisson(mean); mean 0 always returns 0."""
    if mean < 0:
        raise ValueError(f"Poisson mean must be >= 0, got {mean}")
    if mean == 0:
        return 0
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    return int(gen.poisson(mean))
