"""Shared builders for test scenarios."""

from __future__ import annotations

import pytest

from qkdlink.core import IntensityTable
from qkdlink.optics import ChannelModel, ReceiverModel, SyncMode, TransmitterModel
from qkdlink.simulate import AliceSource, DoubleClickPolicy, LinkScenario
from qkdlink.timing import DriftModel, GateModel


def make_scenario(
    loss_db: float = 3.0,
    length_km: float = 15.0,
    intensities: IntensityTable | None = None,
    visibility: float = 0.960761,
    insertion_transmittance: float = 0.138315,
    detector_efficiency=0.014,
    dark_count_rate_hz=125.0,
    sync_mode: SyncMode = SyncMode.WDM,
    alice_source: AliceSource = AliceSource.PRBS,
    double_click_policy: DoubleClickPolicy = DoubleClickPolicy.RANDOM_BIT,
    tracking: bool = True,
    temperature_profile=((0.0, 0.0), (7200.0, 0.0)),
    stray_mu: float = 1e-4,
    raman_coefficient: float = 0.008,
) -> LinkScenario:
    """A complete scenario with low-loss defaults for fast statistics."""
    table = intensities or IntensityTable.single(0.4)
    return LinkScenario(
        transmitter=TransmitterModel(intensities=table, stray_mu=stray_mu),
        channel=ChannelModel(
            loss_db=loss_db,
            length_km=length_km,
            raman_coefficient=raman_coefficient,
            sync_mode=sync_mode,
        ),
        receiver=ReceiverModel(
            insertion_transmittance=insertion_transmittance,
            visibility=visibility,
            detector_efficiency=detector_efficiency,
            dark_count_rate_hz=dark_count_rate_hz,
        ),
        drift=DriftModel(
            fiber_length_km=length_km, temperature_profile=temperature_profile
        ),
        gate=GateModel(),
        alice_source=alice_source,
        double_click_policy=double_click_policy,
        tracking=tracking,
    )


@pytest.fixture
def fast_scenario() -> LinkScenario:
    return make_scenario()
