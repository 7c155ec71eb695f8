"""Air-to-ground channel primitives: pathloss, LoS probability, SNR,
throughput, and uplink interference.

All functions are pure and stateless; identical inputs give bit-identical
outputs, so they are safe to call from any number of threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

# Ground UEs are modelled at handset height with unit antenna gain; their
# link to the serving BS uses the NLoS pathloss (conservative ground
# assumption, no dedicated terrestrial model).
UE_HEIGHT_M = 1.5


class ChannelMode(str, Enum):
    """How the LoS/NLoS mixture enters the total pathloss."""

    PROBABILISTIC = "probabilistic"
    LOS_ONLY = "los"


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    if watts <= 0.0:
        raise ValueError("power must be positive to express in dBm")
    return 10.0 * math.log10(watts) + 30.0


@dataclass(frozen=True)
class ChannelParams:
    """Static link-budget parameters shared by every link in a scenario.

    ``noise_power_w`` is the receiver noise power per resource block in
    watts.  ``uav_antenna_gain`` is the combined (linear) antenna gain of
    the UAV/BS pair; BS down-tilt patterns are out of scope.
    """

    carrier_freq_hz: float = 2e9
    eta_los_db: float = 1.6
    eta_nlos_db: float = 23.0
    c1: float = 12.076
    c2: float = 0.114
    noise_power_w: float = dbm_to_watts(-90.0)
    rb_bandwidth_hz: float = 1e6
    num_rbs: int = 1
    uav_antenna_gain: float = 100.0
    ue_tx_power_w: float = 0.002
    channel_mode: ChannelMode = ChannelMode.PROBABILISTIC

    def __post_init__(self) -> None:
        if self.carrier_freq_hz <= 0:
            raise ValueError("carrier_freq_hz must be > 0")
        if self.rb_bandwidth_hz <= 0:
            raise ValueError("rb_bandwidth_hz must be > 0")
        if self.num_rbs < 1:
            raise ValueError("num_rbs must be >= 1")
        if self.eta_nlos_db <= self.eta_los_db:
            raise ValueError("eta_nlos_db must exceed eta_los_db")
        if self.noise_power_w <= 0:
            raise ValueError("noise_power_w must be > 0")
        if self.c1 <= 0 or self.c2 <= 0:
            raise ValueError("c1 and c2 must be > 0")
        if self.uav_antenna_gain <= 0:
            raise ValueError("uav_antenna_gain must be > 0")
        if self.ue_tx_power_w < 0:
            raise ValueError("ue_tx_power_w must be >= 0")


@dataclass(frozen=True)
class LinkGeometry:
    """UAV-to-BS geometry. Pathloss uses the 3-D slant distance; the LoS
    probability uses the elevation angle from the horizontal distance."""

    horizontal_dist_m: float
    uav_height_m: float

    def __post_init__(self) -> None:
        if self.horizontal_dist_m < 0:
            raise ValueError("horizontal_dist_m must be >= 0")
        if self.uav_height_m <= 0:
            raise ValueError("uav_height_m must be > 0")

    @property
    def slant_dist_m(self) -> float:
        return math.hypot(self.horizontal_dist_m, self.uav_height_m)


def pathloss_los(geom: LinkGeometry, params: ChannelParams) -> float:
    """LoS pathloss in dB at the slant distance."""
    return (
        20.0 * math.log10(geom.slant_dist_m)
        + 20.0 * math.log10(params.carrier_freq_hz)
        - 147.55
        + params.eta_los_db
    )


def pathloss_nlos(geom: LinkGeometry, params: ChannelParams) -> float:
    """NLoS pathloss in dB; differs from LoS only in the excess-loss term."""
    return (
        20.0 * math.log10(geom.slant_dist_m)
        + 20.0 * math.log10(params.carrier_freq_hz)
        - 147.55
        + params.eta_nlos_db
    )


def p_los(geom: LinkGeometry, params: ChannelParams) -> float:
    """Probability of a LoS link as a function of the elevation angle.

    Directly overhead (zero horizontal distance) the elevation angle is
    90 degrees, so there is no singularity at the cell centre.
    """
    if geom.horizontal_dist_m == 0.0:
        angle_deg = 90.0
    else:
        angle_deg = math.degrees(
            math.atan(geom.uav_height_m / geom.horizontal_dist_m)
        )
    return 1.0 / (
        1.0 + params.c1 * math.exp(-params.c2 * (angle_deg - params.c1))
    )


def pathloss_total(geom: LinkGeometry, params: ChannelParams) -> float:
    """Expected pathloss in dB.

    Probabilistic mode mixes LoS and NLoS by the LoS probability; LoS-only
    mode returns the LoS pathloss unchanged.
    """
    los = pathloss_los(geom, params)
    if params.channel_mode is ChannelMode.LOS_ONLY:
        return los
    p = p_los(geom, params)
    return p * los + (1.0 - p) * pathloss_nlos(geom, params)


def channel_gain(pathloss_db: float, antenna_gain: float) -> float:
    """Linear channel gain G * 10^(-pathloss/10); strictly positive."""
    if antenna_gain <= 0:
        raise ValueError("antenna_gain must be > 0")
    return antenna_gain * 10.0 ** (-pathloss_db / 10.0)


def snr_uplink(tx_power_w: float, gain: float, params: ChannelParams) -> float:
    """Uplink SNR (linear ratio) at the serving BS."""
    if tx_power_w < 0:
        raise ValueError("tx_power_w must be >= 0")
    return tx_power_w * gain / params.noise_power_w


def throughput(tx_power_w: float, gain: float, params: ChannelParams) -> float:
    """Uplink throughput in bits/s, power split equally across resource blocks."""
    if tx_power_w < 0:
        raise ValueError("tx_power_w must be >= 0")
    per_rb_power = tx_power_w / params.num_rbs
    per_rb_snr = snr_uplink(per_rb_power, gain, params)
    return params.num_rbs * params.rb_bandwidth_hz * math.log2(1.0 + per_rb_snr)


def interference_contribution(tx_power_w: float, gain_to_neighbor_bs: float) -> float:
    """Interference power (W) the UAV injects at one neighbor BS."""
    if tx_power_w < 0 or gain_to_neighbor_bs < 0:
        raise ValueError("inputs must be >= 0")
    return tx_power_w * gain_to_neighbor_bs


def ue_sinr_throughput(
    ue_tx_power_w: float,
    ue_gain: float,
    interference_w: float,
    params: ChannelParams,
) -> tuple[float, float]:
    """SINR (linear) and throughput (bits/s) of a ground UE under UAV
    interference, over the UE's full bandwidth."""
    if min(ue_tx_power_w, ue_gain, interference_w) < 0:
        raise ValueError("inputs must be >= 0")
    sinr = ue_tx_power_w * ue_gain / (interference_w + params.noise_power_w)
    full_bandwidth = params.num_rbs * params.rb_bandwidth_hz
    return sinr, full_bandwidth * math.log2(1.0 + sinr)


def ue_ground_gain(horizontal_dist_m: float, params: ChannelParams) -> float:
    """Linear gain of a ground UE to its serving BS (NLoS at handset height,
    unit antenna gain)."""
    geom = LinkGeometry(horizontal_dist_m=horizontal_dist_m, uav_height_m=UE_HEIGHT_M)
    return channel_gain(pathloss_nlos(geom, params), 1.0)
