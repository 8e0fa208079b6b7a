"""Monte-Carlo link engine and its closed-form analytic counterpart.

The engine draws per-pulse detection events from the optics and timing
models. Pulses are processed in fixed-size blocks; every block owns
independent random streams keyed by (master seed, block index, purpose), so
tallies merge associatively and the result is identical for any worker
count. The analytic engine computes the same per-intensity expectations in
closed form and doubles as the oracle for the stochastic path.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .core import Prbs7, RngStream
from .optics import (
    DETECTOR_COUNT,
    ChannelModel,
    ReceiverModel,
    RoutingMatrix,
    SyncMode,
    TransmitterModel,
    noise_photons_per_pulse,
)
from .timing import DriftModel, GateModel, arrival_offset, gate_acceptance, track_gate

__all__ = [
    "AliceSource",
    "DoubleClickPolicy",
    "LinkScenario",
    "DetectionEvent",
    "RunStats",
    "LinkExpectation",
    "IntensityExpectation",
    "run_montecarlo",
    "run_analytic",
    "time_series",
    "resolve_double_clicks",
    "WindowPoint",
    "PHOTON_NUMBER_CAP",
]

# Pulses per simulation block. Fixed (not caller-tunable) so that results for
# a given (seed, pulses) are reproducible regardless of how blocks are
# scheduled onto workers.
_BLOCK_SIZE = 1 << 20

# Photon-number tallies are capped; the last bin collects n >= cap.
PHOTON_NUMBER_CAP = 8


class AliceSource(Enum):
    """Where Alice's basis/bit choices come from."""

    PRBS = "prbs"  # two maximal-length PRBS-7 generators (field-test mode)
    RNG = "rng"    # seeded uniform stream (secure mode)


class DoubleClickPolicy(Enum):
    RANDOM_BIT = "random_bit"
    DISCARD = "discard"


@dataclass(frozen=True)
class LinkScenario:
    """Full parameter set for one experiment run."""

    transmitter: TransmitterModel
    channel: ChannelModel
    receiver: ReceiverModel
    drift: DriftModel
    gate: GateModel
    alice_source: AliceSource = AliceSource.PRBS
    double_click_policy: DoubleClickPolicy = DoubleClickPolicy.RANDOM_BIT
    tracking: bool = True
    filter_bandwidth_ghz: float = 100.0
    prbs_basis_seed: int = 0x7F
    prbs_bit_seed: int = 0x55

    def __post_init__(self) -> None:
        slot_ps = self.transmitter.slot_width_ps
        if abs(self.gate.slot_width_ps - slot_ps) > 1e-6 * slot_ps:
            raise ValueError(
                f"gate slot width {self.gate.slot_width_ps} ps does not match "
                f"the {slot_ps:.1f} ps clock period"
            )
        if self.filter_bandwidth_ghz < 0:
            raise ValueError("filter bandwidth must be >= 0")
        # PRBS seeds validated eagerly so a bad config fails before simulation.
        Prbs7(self.prbs_basis_seed)
        Prbs7(self.prbs_bit_seed)

    @property
    def intensities(self):
        return self.transmitter.intensities

    def residual_alignment_ns(self, t: float) -> float:
        """Gate misalignment at time t after clock-recovery compensation."""
        raw = arrival_offset(t, self.drift)
        residual = track_gate(
            raw,
            self.channel.sync_mode,
            tracking=self.tracking,
            differential_fraction=self.drift.differential_fraction,
        )
        return float(residual[0]) + self.gate.alignment_error_ps / 1000.0

    def gate_at(self, t: float) -> GateModel:
        return self.gate.with_alignment_error(self.residual_alignment_ns(t) * 1000.0)


@dataclass(frozen=True)
class DetectionEvent:
    pulse_index: int
    detector_id: int
    within_gate: bool


def resolve_double_clicks(
    detector_ids: Sequence[int],
    policy: DoubleClickPolicy,
    rng: np.random.Generator,
) -> int | None:
    """Collapse simultaneous clicks on one pulse to at most one detector.

    RANDOM_BIT picks uniformly among the clicked detectors (the standard
    squashing convention); DISCARD drops the pulse.
    """
    ids = list(detector_ids)
    if not ids:
        return None
    if len(ids) == 1:
        return ids[0]
    if policy is DoubleClickPolicy.DISCARD:
        return None
    return ids[int(rng.integers(0, len(ids)))]


# ---------------------------------------------------------------------------
# Tallies


@dataclass
class RunStats:
    """Per-intensity tallies of one simulation run.

    ``clicks_in_gate`` counts pulses with at least one in-gate click;
    ``clicks_out_of_gate`` counts pulses whose only clicks fell outside the
    gate (so the two are disjoint and their sum is the number of detected
    pulses). Sifted and error counts refer to in-gate winners after
    double-click resolution. ``duration_s`` is wall time and is excluded
    from equality comparisons.
    """

    labels: tuple[str, ...]
    mu: tuple[float, ...]
    pulses_sent: np.ndarray
    clicks_in_gate: np.ndarray
    clicks_out_of_gate: np.ndarray
    sifted_count: np.ndarray
    error_count: np.ndarray
    sent_by_n: np.ndarray | None = None
    clicks_by_n: np.ndarray | None = None
    sifted_by_n: np.ndarray | None = None
    errors_by_n: np.ndarray | None = None
    duration_s: float = 0.0

    @classmethod
    def zeros(cls, labels: Sequence[str], mu: Sequence[float], photon_tallies: bool) -> "RunStats":
        n = len(labels)
        shape_n = (n, PHOTON_NUMBER_CAP + 1)
        return cls(
            labels=tuple(labels),
            mu=tuple(mu),
            pulses_sent=np.zeros(n, dtype=np.int64),
            clicks_in_gate=np.zeros(n, dtype=np.int64),
            clicks_out_of_gate=np.zeros(n, dtype=np.int64),
            sifted_count=np.zeros(n, dtype=np.int64),
            error_count=np.zeros(n, dtype=np.int64),
            sent_by_n=np.zeros(shape_n, dtype=np.int64) if photon_tallies else None,
            clicks_by_n=np.zeros(shape_n, dtype=np.int64) if photon_tallies else None,
            sifted_by_n=np.zeros(shape_n, dtype=np.int64) if photon_tallies else None,
            errors_by_n=np.zeros(shape_n, dtype=np.int64) if photon_tallies else None,
        )

    def accumulate(self, other: "RunStats") -> None:
        self.pulses_sent += other.pulses_sent
        self.clicks_in_gate += other.clicks_in_gate
        self.clicks_out_of_gate += other.clicks_out_of_gate
        self.sifted_count += other.sifted_count
        self.error_count += other.error_count
        for name in ("sent_by_n", "clicks_by_n", "sifted_by_n", "errors_by_n"):
            mine, theirs = getattr(self, name), getattr(other, name)
            if mine is not None and theirs is not None:
                mine += theirs

    def index_of(self, label: str) -> int:
        return self.labels.index(label)

    def gain(self, label: str) -> float:
        i = self.index_of(label)
        sent = self.pulses_sent[i]
        return float(self.clicks_in_gate[i] / sent) if sent else 0.0

    def qber(self, label: str) -> float:
        i = self.index_of(label)
        sifted = self.sifted_count[i]
        return float(self.error_count[i] / sifted) if sifted else 0.0

    @property
    def total_pulses(self) -> int:
        return int(self.pulses_sent.sum())

    def yield_by_photon_number(self) -> np.ndarray:
        """Ground-truth conditional yields Y_n aggregated over intensities."""
        if self.sent_by_n is None:
            raise ValueError("run was executed without photon-number tallies")
        sent = self.sent_by_n.sum(axis=0).astype(float)
        clicks = self.clicks_by_n.sum(axis=0).astype(float)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(sent > 0, clicks / sent, np.nan)

    def error_by_photon_number(self) -> np.ndarray:
        """Ground-truth conditional error rates e_n aggregated over intensities."""
        if self.sifted_by_n is None:
            raise ValueError("run was executed without photon-number tallies")
        sifted = self.sifted_by_n.sum(axis=0).astype(float)
        errors = self.errors_by_n.sum(axis=0).astype(float)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(sifted > 0, errors / sifted, np.nan)

    def comparison_key(self) -> tuple:
        """Deterministic content (everything except wall duration)."""
        arrays = [
            self.pulses_sent,
            self.clicks_in_gate,
            self.clicks_out_of_gate,
            self.sifted_count,
            self.error_count,
        ]
        optional = [
            a for a in (self.sent_by_n, self.clicks_by_n, self.sifted_by_n, self.errors_by_n)
        ]
        return (
            self.labels,
            self.mu,
            tuple(tuple(a.tolist()) for a in arrays),
            tuple(None if a is None else tuple(map(tuple, a.tolist())) for a in optional),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RunStats):
            return NotImplemented
        return self.comparison_key() == other.comparison_key()


# ---------------------------------------------------------------------------
# Engine internals


@dataclass(frozen=True)
class _EngineParams:
    mu: np.ndarray                  # per-label mean photon number
    cum_probs: np.ndarray           # cumulative label selection probabilities
    eta_pre: float                  # fiber x receiver insertion transmittance
    eta_d: np.ndarray               # per-detector efficiency
    routing: np.ndarray             # 4 states x 4 detectors
    bg_in: np.ndarray               # per-detector in-gate background prob/slot
    bg_out: np.ndarray              # per-detector out-of-gate background prob/slot
    alignment_ps: float
    jitter_ps: float
    half_gate_ps: float
    alice_source: AliceSource
    prbs_basis: np.ndarray | None   # 127-entry tables, PRBS mode only
    prbs_bit: np.ndarray | None
    policy: DoubleClickPolicy
    photon_tallies: bool
    n_labels: int = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "n_labels", len(self.mu))


def _engine_params(scenario: LinkScenario, t_start: float, photon_tallies: bool) -> _EngineParams:
    table = scenario.intensities
    receiver = scenario.receiver
    channel = scenario.channel
    gate = scenario.gate_at(t_start)
    gate_noise = gate.noise_fraction

    eta_pre = channel.transmittance * receiver.insertion_transmittance
    eta_d = np.asarray(receiver.detector_efficiency, dtype=float)
    # Renormalize rows so float round-off cannot push a multinomial pvals
    # sum above one.
    routing = RoutingMatrix.ideal(receiver).matrix.copy()
    routing /= routing.sum(axis=1, keepdims=True)

    clock = scenario.transmitter.clock_rate_hz
    dark_slot = np.asarray(receiver.dark_count_rate_hz, dtype=float) / clock
    noise_in = noise_photons_per_pulse(
        channel,
        scenario.filter_bandwidth_ghz,
        gate_fraction=1.0,
        stray_mu=scenario.transmitter.stray_mu,
    )
    # Noise photons pass the receiver insertion loss, spread evenly over the
    # four decoder outputs, and see each detector's efficiency.
    noise_det = noise_in * receiver.insertion_transmittance * 0.25 * eta_d
    bg_slot = dark_slot + noise_det

    prbs_basis = prbs_bit = None
    if scenario.alice_source is AliceSource.PRBS:
        prbs_basis = Prbs7(scenario.prbs_basis_seed).sequence(127)
        prbs_bit = Prbs7(scenario.prbs_bit_seed).sequence(127)

    return _EngineParams(
        mu=np.asarray(table.mu, dtype=float),
        cum_probs=np.cumsum(np.asarray(table.probabilities, dtype=float)),
        eta_pre=eta_pre,
        eta_d=eta_d,
        routing=routing,
        bg_in=bg_slot * gate_noise,
        bg_out=bg_slot * (1.0 - gate_noise),
        alignment_ps=gate.alignment_error_ps,
        jitter_ps=gate.jitter_sigma_ps,
        half_gate_ps=gate.gate_width_ps / 2.0,
        alice_source=scenario.alice_source,
        prbs_basis=prbs_basis,
        prbs_bit=prbs_bit,
        policy=scenario.double_click_policy,
        photon_tallies=photon_tallies,
    )


def _alice_states(
    p: _EngineParams, global_indices: np.ndarray, src: np.random.Generator
) -> np.ndarray:
    """State index (2*basis + bit) of Alice's symbols at the given pulses.

    PRBS mode is a pure table lookup; RNG mode draws lazily for exactly the
    requested (sorted) indices, which is deterministic because the request
    set is a pure function of earlier draws.
    """
    if p.alice_source is AliceSource.PRBS:
        basis = p.prbs_basis[global_indices % 127]
        bit = p.prbs_bit[global_indices % 127]
        return (2 * basis + bit).astype(np.int8)
    draws = src.integers(0, 4, size=len(global_indices), dtype=np.int8)
    return draws


def _simulate_block(
    p: _EngineParams,
    master_seed: int,
    block_index: int,
    start: int,
    length: int,
    stats: RunStats,
    collect_events: bool,
) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]] | None:
    src = RngStream(master_seed, (block_index, 0)).generator()
    ch = RngStream(master_seed, (block_index, 1)).generator()
    bg = RngStream(master_seed, (block_index, 2)).generator()
    tm = RngStream(master_seed, (block_index, 3)).generator()

    # --- source: intensity class and photon number per pulse
    if p.n_labels == 1:
        labels = None
        n = ch.poisson(p.mu[0], size=length)
        stats.pulses_sent[0] += length
    else:
        u = src.random(length)
        labels = np.searchsorted(p.cum_probs, u, side="right").astype(np.int8)
        np.clip(labels, 0, p.n_labels - 1, out=labels)
        n = ch.poisson(p.mu[labels])
        stats.pulses_sent += np.bincount(labels, minlength=p.n_labels)

    # --- channel: photons surviving to the decoder input
    m = ch.binomial(n, p.eta_pre) if p.eta_pre > 0 else np.zeros(length, dtype=np.int64)
    sig_local = np.nonzero(m > 0)[0]

    # --- decoder + detectors for pulses with surviving photons
    sig_states = _alice_states(p, start + sig_local, src)
    detected = np.zeros((len(sig_local), DETECTOR_COUNT), dtype=np.int64)
    m_sig = m[sig_local]
    for s in range(4):
        rows = np.nonzero(sig_states == s)[0]
        if len(rows):
            counts = ch.multinomial(m_sig[rows], p.routing[s])
            detected[rows] = counts
    detected = ch.binomial(detected, p.eta_d[None, :])
    sig_click = detected > 0

    # --- signal gating: one arrival-time draw per clicked (pulse, detector)
    n_sig_clicks = int(sig_click.sum())
    if p.jitter_ps > 0:
        t_arr = tm.normal(p.alignment_ps, p.jitter_ps, size=n_sig_clicks)
    else:
        t_arr = np.full(n_sig_clicks, p.alignment_ps)
    in_flat = np.abs(t_arr) <= p.half_gate_ps
    sig_in = np.zeros_like(sig_click)
    sig_in[sig_click] = in_flat
    sig_out = sig_click & ~sig_in

    # --- background clicks (dark counts + channel noise), uniform over slot
    bg_in_pulse, bg_in_det = _background_positions(bg, p.bg_in, length)
    bg_out_pulse, bg_out_det = _background_positions(bg, p.bg_out, length)

    # --- combine in-gate clicks into unique (pulse, detector) pairs
    sig_rows, sig_cols = np.nonzero(sig_in)
    pair_keys = np.concatenate(
        [sig_local[sig_rows] * DETECTOR_COUNT + sig_cols,
         bg_in_pulse * DETECTOR_COUNT + bg_in_det]
    )
    pair_keys = np.unique(pair_keys)
    click_pulse = pair_keys // DETECTOR_COUNT
    click_det = (pair_keys % DETECTOR_COUNT).astype(np.int8)

    # winner per pulse after double-click resolution
    uniq_pulse, first_idx, counts = np.unique(
        click_pulse, return_index=True, return_counts=True
    )
    winner_pulse = uniq_pulse
    winner_det = click_det[first_idx].copy()
    multi = np.nonzero(counts > 1)[0]
    discard_mask = np.zeros(len(uniq_pulse), dtype=bool)
    if len(multi):
        if p.policy is DoubleClickPolicy.DISCARD:
            discard_mask[multi] = True
        else:
            picks = tm.random(len(multi))
            for j, row in enumerate(multi):
                i0, k = first_idx[row], counts[row]
                winner_det[row] = click_det[i0 + int(picks[j] * k)]

    # --- out-of-gate-only pulses
    out_pulse = np.unique(np.concatenate([sig_local[np.nonzero(sig_out)[0]], bg_out_pulse]))
    out_only = out_pulse[~np.isin(out_pulse, uniq_pulse, assume_unique=True)]

    # --- sifting against Alice's symbols
    # Reuse the states already drawn for routing; draw fresh ones only for
    # pulses whose sole click came from background (no surviving photon).
    winner_states = np.empty(len(winner_pulse), dtype=np.int8)
    if len(sig_local):
        pos = np.searchsorted(sig_local, winner_pulse)
        pos_safe = np.minimum(pos, len(sig_local) - 1)
        from_signal = sig_local[pos_safe] == winner_pulse
        winner_states[from_signal] = sig_states[pos_safe[from_signal]]
    else:
        from_signal = np.zeros(len(winner_pulse), dtype=bool)
    bg_only = ~from_signal
    if bg_only.any():
        winner_states[bg_only] = _alice_states(p, start + winner_pulse[bg_only], src)
    alice_basis = winner_states >> 1
    alice_bit = winner_states & 1
    bob_basis = winner_det >> 1
    bob_bit = winner_det & 1
    sifted_mask = (bob_basis == alice_basis) & ~discard_mask
    error_mask = sifted_mask & (bob_bit != alice_bit)

    # --- tallies
    def _label_counts(pulses: np.ndarray) -> np.ndarray:
        if labels is None:
            return np.array([len(pulses)], dtype=np.int64)
        return np.bincount(labels[pulses], minlength=p.n_labels)

    stats.clicks_in_gate += _label_counts(uniq_pulse)
    stats.clicks_out_of_gate += _label_counts(out_only)
    stats.sifted_count += _label_counts(winner_pulse[sifted_mask])
    stats.error_count += _label_counts(winner_pulse[error_mask])

    if p.photon_tallies:
        cap = PHOTON_NUMBER_CAP
        n_c = np.minimum(n, cap)

        def _n_counts(pulses: np.ndarray) -> np.ndarray:
            if labels is None:
                flat = np.bincount(n_c[pulses], minlength=cap + 1)
                return flat[np.newaxis, :]
            keys = labels[pulses].astype(np.int64) * (cap + 1) + n_c[pulses]
            flat = np.bincount(keys, minlength=p.n_labels * (cap + 1))
            return flat.reshape(p.n_labels, cap + 1)

        stats.sent_by_n += _n_counts(np.arange(length))
        stats.clicks_by_n += _n_counts(uniq_pulse)
        stats.sifted_by_n += _n_counts(winner_pulse[sifted_mask])
        stats.errors_by_n += _n_counts(winner_pulse[error_mask])

    if collect_events:
        events = []
        if len(click_pulse):
            events.append((start + click_pulse, click_det.astype(np.int64), np.ones(len(click_pulse), dtype=np.int64)))
        out_rows, out_cols = np.nonzero(sig_out)
        out_pairs = np.concatenate(
            [sig_local[out_rows] * DETECTOR_COUNT + out_cols,
             bg_out_pulse * DETECTOR_COUNT + bg_out_det]
        )
        out_pairs = np.unique(out_pairs)
        if len(out_pairs):
            events.append(
                (start + out_pairs // DETECTOR_COUNT,
                 (out_pairs % DETECTOR_COUNT).astype(np.int64),
                 np.zeros(len(out_pairs), dtype=np.int64))
            )
        return events
    return None


def _background_positions(
    bg: np.random.Generator, rates: np.ndarray, length: int
) -> tuple[np.ndarray, np.ndarray]:
    """Sample background click positions for each detector over one block.

    Per-pulse probabilities are ~1e-7, so the per-block count is Poisson to
    excellent accuracy and positions are uniform.
    """
    pulses, dets = [], []
    for d in range(DETECTOR_COUNT):
        k = int(bg.poisson(length * rates[d]))
        if k:
            pos = bg.integers(0, length, size=k)
            pulses.append(pos)
            dets.append(np.full(k, d, dtype=np.int64))
    if not pulses:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    return np.concatenate(pulses), np.concatenate(dets)


def run_montecarlo(
    scenario: LinkScenario,
    pulses: int,
    seed: int,
    threads: int = 1,
    photon_tallies: bool = False,
    events_path: str | None = None,
    t_start: float = 0.0,
) -> RunStats:
    """Simulate ``pulses`` clock periods and tally per-intensity statistics.

    Deterministic for fixed (scenario, pulses, seed) regardless of
    ``threads``. ``photon_tallies`` additionally records ground-truth
    conditional tallies by emitted photon number (forbound soundness
    checks); ``events_path`` dumps one CSV record per detection.
    """
    if pulses < 1:
        raise ValueError("pulses must be >= 1")
    table = scenario.intensities
    params = _engine_params(scenario, t_start, photon_tallies)
    started = time.perf_counter()

    blocks = [
        (i, i * _BLOCK_SIZE, min(_BLOCK_SIZE, pulses - i * _BLOCK_SIZE))
        for i in range((pulses + _BLOCK_SIZE - 1) // _BLOCK_SIZE)
    ]
    collect_events = events_path is not None

    def _run_block(args):
        index, start, length = args
        local = RunStats.zeros(table.labels, table.mu, photon_tallies)
        events = _simulate_block(params, seed, index, start, length, local, collect_events)
        return index, local, events

    results = []
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_block, blocks))
    else:
        results = [_run_block(b) for b in blocks]

    total = RunStats.zeros(table.labels, table.mu, photon_tallies)
    results.sort(key=lambda r: r[0])
    for _, local, _ in results:
        total.accumulate(local)
    total.duration_s = time.perf_counter() - started

    if collect_events:
        with open(events_path, "w", encoding="utf-8") as fh:
            fh.write("pulse_index,detector_id,within_gate\n")
            for _, _, events in results:
                for pulse_arr, det_arr, flag_arr in events or []:
                    order = np.argsort(pulse_arr, kind="stable")
                    for i in order:
                        fh.write(f"{pulse_arr[i]},{det_arr[i]},{flag_arr[i]}\n")
    return total


# ---------------------------------------------------------------------------
# Analytic expectations


@dataclass(frozen=True)
class IntensityExpectation:
    """Closed-form per-intensity expectations for one scenario."""

    label: str
    mu: float
    gain: float                 # P(pulse yields an in-gate click)
    qber: float
    signal_gain: float          # in-gate clicks from signal photons alone
    background_yield: float     # in-gate clicks from dark + channel noise
    dark_yield: float           # dark-count part of background_yield
    out_of_gate_gain: float     # P(only out-of-gate clicks)
    sifted_fraction: float      # sifted / in-gate clicks
    selection_probability: float

    @property
    def dark_qber_share(self) -> float:
        """QBER percentage points contributed by dark counts alone."""
        return 0.5 * self.dark_yield / self.gain if self.gain else 0.0

    def sifted_rate_bps(self, clock_rate_hz: float) -> float:
        return self.gain * self.sifted_fraction * self.selection_probability * clock_rate_hz


@dataclass(frozen=True)
class LinkExpectation:
    """Analytic counterpart of RunStats."""

    per_intensity: tuple[IntensityExpectation, ...]
    clock_rate_hz: float
    signal_gate_fraction: float
    noise_gate_fraction: float

    def intensity(self, label: str) -> IntensityExpectation:
        for e in self.per_intensity:
            if e.label == label:
                return e
        raise KeyError(label)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(e.label for e in self.per_intensity)


def run_analytic(scenario: LinkScenario, t_start: float = 0.0) -> LinkExpectation:
    """Expected per-intensity statistics in closed form.

    Gain is Q(mu) = 1 - (1 - Q_signal)(1 - Y_background); the error rate
    satisfies E*Q = 0.5*Y_background + e_opt*Q_signal with e_opt given by
    the decoder routing errors. Double-click corrections are O(Q^2) and
    neglected.
    """
    p = _engine_params(scenario, t_start, photon_tallies=False)
    gate = scenario.gate_at(t_start)
    g_sig, g_noise = gate_acceptance(gate)
    clock = scenario.transmitter.clock_rate_hz
    table = scenario.intensities
    probs = table.probabilities

    dark_in = float(np.sum(np.asarray(scenario.receiver.dark_count_rate_hz) / clock) * g_noise)
    bg_in = p.bg_in
    y_bg = 1.0 - float(np.prod(1.0 - bg_in))
    y_bg_out = 1.0 - float(np.prod(1.0 - p.bg_out))

    # per-state routing shares including detector efficiencies
    eta_d = p.eta_d
    kappa = p.routing @ eta_d                     # per-state detection weight
    detector_basis = np.array([0, 0, 1, 1])
    detector_bit = np.array([0, 1, 0, 1])

    expectations = []
    for i, label in enumerate(table.labels):
        mu = table.mu[i]
        q_sig = err_sig = sift_sig = q_out_states = 0.0
        bg_sift = bg_err = 0.0
        for s in range(4):
            lam_in = mu * p.eta_pre * kappa[s] * g_sig
            lam_out = mu * p.eta_pre * kappa[s] * (1.0 - g_sig)
            p_in = 1.0 - np.exp(-lam_in)
            p_out = 1.0 - np.exp(-lam_out)
            share = p.routing[s] * eta_d / kappa[s] if kappa[s] > 0 else np.zeros(4)
            matched = detector_basis == (s >> 1)
            wrong = matched & (detector_bit != (s & 1))
            q_sig += 0.25 * p_in
            sift_sig += 0.25 * p_in * float(share[matched].sum())
            err_sig += 0.25 * p_in * float(share[wrong].sum())
            q_out_states += 0.25 * p_out
            # Background-won pulses: no signal click, a lone background
            # detector fires. Its bit is uncorrelated with Alice's, so the
            # wrong-bit detector of the matched basis counts as an error.
            p_none = 1.0 - p_in
            bg_sift += 0.25 * p_none * float(bg_in[matched].sum())
            bg_err += 0.25 * p_none * float(bg_in[wrong].sum())

        gain = 1.0 - (1.0 - q_sig) * (1.0 - y_bg)
        sifted = sift_sig + bg_sift
        errors = err_sig + bg_err
        qber = errors / sifted if sifted > 0 else 0.0
        out_only = (1.0 - gain) * (1.0 - (1.0 - q_out_states) * (1.0 - y_bg_out))
        expectations.append(
            IntensityExpectation(
                label=label,
                mu=float(mu),
                gain=float(gain),
                qber=float(qber),
                signal_gain=float(q_sig),
                background_yield=float(y_bg),
                dark_yield=float(dark_in),
                out_of_gate_gain=float(out_only),
                sifted_fraction=float(sifted / gain) if gain > 0 else 0.0,
                selection_probability=float(probs[i]),
            )
        )
    return LinkExpectation(
        per_intensity=tuple(expectations),
        clock_rate_hz=clock,
        signal_gate_fraction=g_sig,
        noise_gate_fraction=g_noise,
    )


# ---------------------------------------------------------------------------
# Windowed time series


@dataclass(frozen=True)
class WindowPoint:
    t_s: float
    sifted_rate_bps: float
    qber: float


def time_series(
    scenario: LinkScenario,
    duration_s: float,
    window_s: float,
    seed: int,
    pulses_per_window: int = 10_000_000,
    threads: int = 1,
) -> list[WindowPoint]:
    """Windowed sifted-rate / QBER evolution across the drift profile.

    Each window simulates ``pulses_per_window`` pulses with the gate
    alignment frozen at the window midpoint (field runs span far more
    pulses than a desk simulation; rates are per-pulse statistics scaled by
    the clock, so the window size only sets the statistical resolution).
    Windows use independent random streams keyed by the window index.
    """
    if window_s <= 0 or window_s > duration_s:
        raise ValueError("window must be positive and no longer than the duration")
    clock = scenario.transmitter.clock_rate_hz
    n_windows = int(round(duration_s / window_s))
    points = []
    for w in range(n_windows):
        t_mid = (w + 0.5) * window_s
        window_seed = int(
            np.random.SeedSequence(entropy=seed, spawn_key=(w,)).generate_state(1)[0]
        )
        stats = run_montecarlo(
            scenario, pulses_per_window, window_seed, threads=threads, t_start=t_mid
        )
        sifted = int(stats.sifted_count.sum())
        errors = int(stats.error_count.sum())
        rate = sifted / stats.total_pulses * clock
        qber = errors / sifted if sifted else 0.0
        points.append(WindowPoint(t_s=t_mid, sifted_rate_bps=rate, qber=qber))
    return points
