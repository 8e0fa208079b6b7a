"""Scenario files: strict key-value configuration for a full link setup.

Scenarios are INI documents with sections transmitter / intensities /
channel / receiver / drift / gate / run. Keys carry their units
(``loss_db``, ``gate_width_ps``); unknown sections or keys are rejected so
a typo cannot silently fall back to a default.
"""

from __future__ import annotations

import configparser
from importlib import resources
from pathlib import Path

from .core import IntensityTable
from .errors import ScenarioError
from .optics import ChannelModel, ReceiverModel, SyncMode, TransmitterModel
from .simulate import AliceSource, DoubleClickPolicy, LinkScenario
from .timing import DriftModel, GateModel

__all__ = [
    "load_scenario",
    "parse_scenario",
    "scenario_to_dict",
    "list_presets",
    "preset_path",
    "PRESETS",
]

PRESETS = ("65km-wdm", "97km-wdm", "65km-nowdm", "97km-nowdm")

_KNOWN_KEYS = {
    "transmitter": {
        "clock_rate_hz",
        "double_pulse_delay_ps",
        "pulse_width_ps",
        "stray_mu",
    },
    "intensities": None,  # free-form: every key is an intensity label
    "channel": {
        "loss_db",
        "length_km",
        "clock_launch_power_dbm",
        "raman_coefficient",
        "anti_stokes_penalty_db",
        "sync_mode",
    },
    "receiver": {
        "insertion_transmittance",
        "visibility",
        "extinction_ratio_db",
        "detector_efficiency",
        "dark_count_rate_hz",
    },
    "drift": {
        "temperature_profile",
        "coefficient_ns_per_degc_per_100km",
        "differential_fraction",
    },
    "gate": {"gate_width_ps", "slot_width_ps", "jitter_sigma_ps"},
    "run": {
        "alice_source",
        "double_click_policy",
        "tracking",
        "filter_bandwidth_ghz",
        "prbs_basis_seed",
        "prbs_bit_seed",
    },
}

_REQUIRED = {"channel": ("loss_db", "length_km"), "intensities": ()}

_BOOL_VALUES = {"on": True, "true": True, "1": True, "yes": True,
                "off": False, "false": False, "0": False, "no": False}


def list_presets() -> tuple[str, ...]:
    return PRESETS


def preset_path(name: str) -> Path:
    if name not in PRESETS:
        raise ScenarioError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return Path(str(resources.files("qkdlink").joinpath("presets", f"{name}.ini")))


def load_scenario(path_or_preset: str) -> LinkScenario:
    """Load a scenario from a preset name or an INI file path."""
    if path_or_preset in PRESETS:
        path = preset_path(path_or_preset)
    else:
        path = Path(path_or_preset)
        if not path.exists():
            raise ScenarioError(f"scenario file not found: {path}")
    return parse_scenario(path.read_text(encoding="utf-8"), source=str(path))


def parse_scenario(text: str, source: str = "<string>") -> LinkScenario:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ScenarioError(f"{source}: {exc}") from exc

    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            raise ScenarioError(f"{source}: unknown section [{section}]")
        allowed = _KNOWN_KEYS[section]
        if allowed is not None:
            for key in parser[section]:
                if key not in allowed:
                    raise ScenarioError(
                        f"{source}: unknown key {key!r} in section [{section}]"
                    )
    for section, keys in _REQUIRED.items():
        if section not in parser:
            raise ScenarioError(f"{source}: missing required section [{section}]")
        for key in keys:
            if key not in parser[section]:
                raise ScenarioError(
                    f"{source}: missing required key {key!r} in section [{section}]"
                )
    if not parser["intensities"]:
        raise ScenarioError(f"{source}: section [intensities] must define at least one class")

    get = _Getter(parser, source)
    try:
        intensities = _parse_intensities(parser, source)
        transmitter = TransmitterModel(
            intensities=intensities,
            clock_rate_hz=get.number("transmitter", "clock_rate_hz", 625e6),
            double_pulse_delay_ps=get.number("transmitter", "double_pulse_delay_ps", 800.0),
            pulse_width_ps=get.number("transmitter", "pulse_width_ps", 100.0),
            stray_mu=get.number("transmitter", "stray_mu", 1e-4),
        )
        channel = ChannelModel(
            loss_db=get.number("channel", "loss_db"),
            length_km=get.number("channel", "length_km"),
            clock_launch_power_dbm=get.number("channel", "clock_launch_power_dbm", -33.3),
            raman_coefficient=get.number("channel", "raman_coefficient", 0.008),
            anti_stokes_penalty_db=get.number("channel", "anti_stokes_penalty_db", 1.5),
            sync_mode=get.choice(
                "channel", "sync_mode",
                {"wdm": SyncMode.WDM, "paired_fiber": SyncMode.PAIRED_FIBER},
                SyncMode.WDM,
            ),
        )
        receiver = ReceiverModel(
            insertion_transmittance=get.number("receiver", "insertion_transmittance", 0.138315),
            visibility=get.number("receiver", "visibility", 0.960761),
            extinction_ratio_db=get.number("receiver", "extinction_ratio_db", 20.0),
            detector_efficiency=get.scalar_or_four("receiver", "detector_efficiency", 0.014),
            dark_count_rate_hz=get.scalar_or_four("receiver", "dark_count_rate_hz", 125.0),
        )
        drift = DriftModel(
            fiber_length_km=channel.length_km,
            temperature_profile=get.profile("drift", "temperature_profile", ((0.0, 0.0), (7200.0, 0.0))),
            coefficient_ns=get.number("drift", "coefficient_ns_per_degc_per_100km", 5.0),
            differential_fraction=get.number("drift", "differential_fraction", 0.05),
        )
        gate = GateModel(
            gate_width_ps=get.number("gate", "gate_width_ps", 400.0),
            slot_width_ps=get.number("gate", "slot_width_ps", 1600.0),
            jitter_sigma_ps=get.number("gate", "jitter_sigma_ps", 110.0),
        )
        return LinkScenario(
            transmitter=transmitter,
            channel=channel,
            receiver=receiver,
            drift=drift,
            gate=gate,
            alice_source=get.choice(
                "run", "alice_source",
                {"prbs": AliceSource.PRBS, "rng": AliceSource.RNG},
                AliceSource.PRBS,
            ),
            double_click_policy=get.choice(
                "run", "double_click_policy",
                {"random_bit": DoubleClickPolicy.RANDOM_BIT, "discard": DoubleClickPolicy.DISCARD},
                DoubleClickPolicy.RANDOM_BIT,
            ),
            tracking=get.boolean("run", "tracking", True),
            filter_bandwidth_ghz=get.number("run", "filter_bandwidth_ghz", 100.0),
            prbs_basis_seed=int(get.number("run", "prbs_basis_seed", 0x7F)),
            prbs_bit_seed=int(get.number("run", "prbs_bit_seed", 0x55)),
        )
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(f"{source}: {exc}") from exc


def _parse_intensities(parser: configparser.ConfigParser, source: str) -> IntensityTable:
    items = []
    for label, raw in parser["intensities"].items():
        parts = [p.strip() for p in raw.split(",")]
        if len(parts) != 2:
            raise ScenarioError(
                f"{source}: intensity {label!r} must be 'mu, weight', got {raw!r}"
            )
        try:
            items.append((label, float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise ScenarioError(f"{source}: intensity {label!r}: {exc}") from exc
    return IntensityTable.from_items(items)


class _Getter:
    def __init__(self, parser: configparser.ConfigParser, source: str):
        self.parser = parser
        self.source = source

    def _raw(self, section: str, key: str) -> str | None:
        if section in self.parser and key in self.parser[section]:
            return self.parser[section][key]
        return None

    def number(self, section: str, key: str, default: float | None = None) -> float:
        raw = self._raw(section, key)
        if raw is None:
            if default is None:
                raise ScenarioError(
                    f"{self.source}: missing required key {key!r} in section [{section}]"
                )
            return default
        try:
            return float(raw)
        except ValueError as exc:
            raise ScenarioError(
                f"{self.source}: key {key!r} in [{section}] is not a number: {raw!r}"
            ) from exc

    def scalar_or_four(self, section: str, key: str, default: float) -> tuple[float, ...]:
        raw = self._raw(section, key)
        if raw is None:
            return (default,) * 4
        parts = [p.strip() for p in raw.split(",")]
        try:
            values = tuple(float(p) for p in parts)
        except ValueError as exc:
            raise ScenarioError(
                f"{self.source}: key {key!r} in [{section}] must be a number "
                f"or four comma-separated numbers"
            ) from exc
        if len(values) == 1:
            return values * 4
        if len(values) == 4:
            return values
        raise ScenarioError(
            f"{self.source}: key {key!r} in [{section}] needs 1 or 4 values, got {len(values)}"
        )

    def choice(self, section: str, key: str, mapping: dict, default):
        raw = self._raw(section, key)
        if raw is None:
            return default
        value = raw.strip().lower()
        if value not in mapping:
            raise ScenarioError(
                f"{self.source}: key {key!r} in [{section}] must be one of "
                f"{sorted(mapping)}, got {raw!r}"
            )
        return mapping[value]

    def boolean(self, section: str, key: str, default: bool) -> bool:
        raw = self._raw(section, key)
        if raw is None:
            return default
        value = raw.strip().lower()
        if value not in _BOOL_VALUES:
            raise ScenarioError(
                f"{self.source}: key {key!r} in [{section}] must be on/off, got {raw!r}"
            )
        return _BOOL_VALUES[value]

    def profile(self, section: str, key: str, default: tuple) -> tuple:
        raw = self._raw(section, key)
        if raw is None:
            return default
        points = []
        for chunk in raw.split(","):
            chunk = chunk.strip()
            if not chunk:
                continue
            if ":" not in chunk:
                raise ScenarioError(
                    f"{self.source}: profile point {chunk!r} must be 't_s:delta_t'"
                )
            t_str, dt_str = chunk.split(":", 1)
            try:
                points.append((float(t_str), float(dt_str)))
            except ValueError as exc:
                raise ScenarioError(
                    f"{self.source}: bad profile point {chunk!r}"
                ) from exc
        if not points:
            raise ScenarioError(f"{self.source}: empty temperature profile")
        return tuple(points)


def scenario_to_dict(scenario: LinkScenario) -> dict:
    """JSON-ready echo of a scenario (used in reports)."""
    table = scenario.intensities
    return {
        "transmitter": {
            "clock_rate_hz": scenario.transmitter.clock_rate_hz,
            "double_pulse_delay_ps": scenario.transmitter.double_pulse_delay_ps,
            "pulse_width_ps": scenario.transmitter.pulse_width_ps,
            "stray_mu": scenario.transmitter.stray_mu,
        },
        "intensities": {
            label: {"mu": mu, "weight": w}
            for label, mu, w in zip(table.labels, table.mu, table.weights)
        },
        "channel": {
            "loss_db": scenario.channel.loss_db,
            "length_km": scenario.channel.length_km,
            "clock_launch_power_dbm": scenario.channel.clock_launch_power_dbm,
            "raman_coefficient": scenario.channel.raman_coefficient,
            "anti_stokes_penalty_db": scenario.channel.anti_stokes_penalty_db,
            "sync_mode": scenario.channel.sync_mode.value,
        },
        "receiver": {
            "insertion_transmittance": scenario.receiver.insertion_transmittance,
            "visibility": scenario.receiver.visibility,
            "extinction_ratio_db": scenario.receiver.extinction_ratio_db,
            "detector_efficiency": list(scenario.receiver.detector_efficiency),
            "dark_count_rate_hz": list(scenario.receiver.dark_count_rate_hz),
        },
        "drift": {
            "temperature_profile": [list(p) for p in scenario.drift.temperature_profile],
            "coefficient_ns_per_degc_per_100km": scenario.drift.coefficient_ns,
            "differential_fraction": scenario.drift.differential_fraction,
        },
        "gate": {
            "gate_width_ps": scenario.gate.gate_width_ps,
            "slot_width_ps": scenario.gate.slot_width_ps,
            "jitter_sigma_ps": scenario.gate.jitter_sigma_ps,
        },
        "run": {
            "alice_source": scenario.alice_source.value,
            "double_click_policy": scenario.double_click_policy.value,
            "tracking": scenario.tracking,
            "filter_bandwidth_ghz": scenario.filter_bandwidth_ghz,
            "prbs_basis_seed": scenario.prbs_basis_seed,
            "prbs_bit_seed": scenario.prbs_bit_seed,
        },
    }
