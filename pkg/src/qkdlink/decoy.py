"""Three-intensity decoy-state bounds and the asymptotic secure key rate.

Implements the standard vacuum + weak-decoy closed forms: a lower bound on
the single-photon yield from the signal/decoy gains, an upper bound on the
single-photon error rate from the decoy QBER, and the asymptotic key rate
with Shannon-limit error correction.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

from .core import binary_entropy
from .errors import DataError

__all__ = [
    "IntensityStats",
    "DecoyEstimate",
    "y1_lower",
    "e1_upper",
    "secure_rate",
    "load_stats_table",
    "gain_from_sifted_rate",
]


@dataclass(frozen=True)
class IntensityStats:
    """(mu, gain, QBER) of one intensity class."""

    mu: float
    gain: float
    qber: float

    def __post_init__(self) -> None:
        if self.mu < 0:
            raise ValueError("mu must be >= 0")
        if not 0.0 <= self.gain <= 1.0:
            raise ValueError("gain must be in [0, 1]")
        if not 0.0 <= self.qber <= 1.0:
            raise ValueError("QBER must be in [0, 1]")


@dataclass(frozen=True)
class DecoyEstimate:
    """Outputs of the decoy analysis."""

    y0: float
    y1_lower: float
    e1_upper: float
    q1: float
    rate_per_pulse: float
    rate_bps: float
    signal_mu: float
    decoy_mu: float


def y1_lower(signal: IntensityStats, decoy: IntensityStats, y0: float) -> float:
    """Lower bound on the single-photon yield from two intensities plus vacuum.

    Y1 >= mu / (mu*nu - nu^2) * [Q_nu e^nu - Q_mu e^mu (nu/mu)^2
                                  - (mu^2 - nu^2)/mu^2 * Y0]
    clamped to [0, 1]. Requires mu > nu > 0.
    """
    mu, nu = signal.mu, decoy.mu
    if not mu > nu > 0:
        raise ValueError(f"need signal mu > decoy mu > 0, got mu={mu}, nu={nu}")
    if y0 < 0:
        raise ValueError("Y0 must be >= 0")
    bracket = (
        decoy.gain * math.exp(nu)
        - signal.gain * math.exp(mu) * (nu * nu) / (mu * mu)
        - (mu * mu - nu * nu) / (mu * mu) * y0
    )
    bound = mu / (mu * nu - nu * nu) * bracket
    if bound < 0:
        warnings.warn(
            f"single-photon yield bound is negative ({bound:.3e}); clamping to 0",
            stacklevel=2,
        )
        return 0.0
    return min(bound, 1.0)


def e1_upper(decoy: IntensityStats, y0: float, y1_lower_bound: float) -> float:
    """Upper bound on the single-photon error rate.

    e1 <= (E_nu Q_nu e^nu - Y0/2) / (Y1_lower * nu), clamped to [0, 1].
    """
    if decoy.mu <= 0:
        raise ValueError("decoy mu must be > 0")
    if y1_lower_bound <= 0:
        raise ValueError("e1 bound undefined: single-photon yield bound is zero")
    numerator = decoy.qber * decoy.gain * math.exp(decoy.mu) - 0.5 * y0
    bound = numerator / (y1_lower_bound * decoy.mu)
    return min(max(bound, 0.0), 1.0)


def secure_rate(
    stats: Sequence[IntensityStats],
    q_sifting: float = 0.5,
    f_ec: float = 1.0,
    clock_rate_hz: float = 625e6,
) -> DecoyEstimate:
    """Asymptotic secure key rate from vacuum + decoy + signal statistics.

    R/pulse = q * { -Q_mu f H2(E_mu) + Q1 [1 - H2(e1)] } with
    Q1 = Y1_lower * mu * e^-mu, clamped at zero. The vacuum gain supplies
    Y0. When more than three intensities are given, the largest is the
    signal and the next largest the decoy; extras are ignored.
    """
    if not 0 < q_sifting <= 1:
        raise ValueError("sifting factor must be in (0, 1]")
    ordered = sorted(stats, key=lambda s: s.mu)
    if len(ordered) < 3:
        raise DataError("decoy analysis needs vacuum, decoy, and signal statistics")
    vacuum = ordered[0]
    if vacuum.mu != 0.0:
        raise DataError("no vacuum (mu = 0) entry in the statistics table")
    signal, decoy = ordered[-1], ordered[-2]
    if not signal.mu > decoy.mu > 0:
        raise DataError("need two distinct nonzero intensities above vacuum")

    y0 = vacuum.gain
    y1 = y1_lower(signal, decoy, y0)
    e1 = e1_upper(decoy, y0, y1) if y1 > 0 else 1.0
    q1 = y1 * signal.mu * math.exp(-signal.mu)
    bracket = -signal.gain * f_ec * binary_entropy(signal.qber) + q1 * (
        1.0 - binary_entropy(e1)
    )
    rate_per_pulse = max(q_sifting * bracket, 0.0)
    return DecoyEstimate(
        y0=y0,
        y1_lower=y1,
        e1_upper=e1,
        q1=q1,
        rate_per_pulse=rate_per_pulse,
        rate_bps=rate_per_pulse * clock_rate_hz,
        signal_mu=signal.mu,
        decoy_mu=decoy.mu,
    )


def gain_from_sifted_rate(sifted_bps: float, clock_rate_hz: float) -> float:
    """Invert rate = gain * clock / 2 (basis sifting, unit duty)."""
    if clock_rate_hz <= 0:
        raise ValueError("clock rate must be positive")
    return 2.0 * sifted_bps / clock_rate_hz


def load_stats_table(path: str, clock_rate_hz: float = 625e6) -> list[IntensityStats]:
    """Read measured statistics from CSV columns (mu, value, value_kind, qber).

    ``value_kind`` names what the value column holds for that row: ``gain``
    (clicks/pulse) or ``sifted_bps`` (converted via gain = 2*rate/clock).
    Lines starting with '#' are comments.
    """
    rows: list[IntensityStats] = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read stats table: {exc}") from exc
    with fh:
        filtered = (line for line in fh if line.strip() and not line.lstrip().startswith("#"))
        reader = csv.DictReader(filtered)
        required = {"mu", "value", "value_kind", "qber"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise DataError(
                f"stats table needs columns {sorted(required)}, "
                f"got {reader.fieldnames}"
            )
        for lineno, row in enumerate(reader, start=2):
            try:
                mu = float(row["mu"])
                value = float(row["value"])
                qber = float(row["qber"])
            except (TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: non-numeric field ({exc})") from exc
            kind = (row["value_kind"] or "").strip().lower()
            if kind == "gain":
                gain = value
            elif kind == "sifted_bps":
                gain = gain_from_sifted_rate(value, clock_rate_hz)
            else:
                raise DataError(
                    f"{path}:{lineno}: value_kind must be 'gain' or 'sifted_bps', got {kind!r}"
                )
            try:
                rows.append(IntensityStats(mu=mu, gain=gain, qber=qber))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: no statistics rows found")
    return rows
