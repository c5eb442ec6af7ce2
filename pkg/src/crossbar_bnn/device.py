"""Single magnetic tunnel junction: binary state, sampled parameters, threshold switching.

Units: conductance in uS, voltage in V, current in uA.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from enum import IntEnum

import numpy as np


class State(IntEnum):
    ANTIPARALLEL = 0  # off, low conductance
    PARALLEL = 1  # on, high conductance


OFF, ON = State.ANTIPARALLEL, State.PARALLEL


@dataclass(frozen=True)
class DeviceParams:
    g_off_mean: float  # uS
    g_off_std: float
    tmr_mean: float
    tmr_std: float
    vsw_mean: float  # V, magnitude for both polarities
    vsw_std: float
    read_noise_std: float = 10.0  # nA per current measurement
    nonlinearity: float = 0.0  # alpha, 1/V^2

    def __post_init__(self):
        if self.g_off_mean <= 0 or self.tmr_mean <= 0 or self.vsw_mean <= 0:
            raise ValueError("g_off_mean, tmr_mean and vsw_mean must be positive")
        stds = (self.g_off_std, self.tmr_std, self.vsw_std, self.read_noise_std)
        if min(stds) < 0 or self.nonlinearity < 0:
            raise ValueError("standard deviations and nonlinearity must be >= 0")

    @property
    def g_on_mean(self) -> float:
        return self.g_off_mean * (1.0 + self.tmr_mean)

    def without_variation(self) -> "DeviceParams":
        """Same means with every device-to-device spread removed (read noise kept)."""
        return replace(self, g_off_std=0.0, tmr_std=0.0, vsw_std=0.0)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class MtjDevice:
    g_off: float
    g_on: float
    v_switch_to_on: float
    v_switch_to_off: float
    state: State = OFF

    def __post_init__(self):
        if not self.g_on > self.g_off > 0:
            raise ValueError("need g_on > g_off > 0")
        if self.v_switch_to_on <= 0 or self.v_switch_to_off <= 0:
            raise ValueError("switching thresholds must be positive")


def _truncated(rng: np.random.Generator, mean: float, std: float, floor: float, size=None):
    return np.maximum(rng.normal(mean, std, size), floor)


def sample_arrays(params: DeviceParams, rng: np.random.Generator, shape=(15, 15)):
    """Vectorized draw of (g_off, g_on, v_to_on, v_to_off) arrays.

    Draw order is fixed (g_off, tmr, v_to_on, v_to_off) so a seed fully determines a grid.
    Normals are clipped at their floors rather than redrawn.
    """
    g_off = _truncated(rng, params.g_off_mean, params.g_off_std, 0.1 * params.g_off_mean, shape)
    tmr = _truncated(rng, params.tmr_mean, params.tmr_std, 0.05, shape)
    v_on = _truncated(rng, params.vsw_mean, params.vsw_std, 0.3 * params.vsw_mean, shape)
    v_off = _truncated(rng, params.vsw_mean, params.vsw_std, 0.3 * params.vsw_mean, shape)
    return g_off, g_off * (1.0 + tmr), v_on, v_off


def sample_device(params: DeviceParams, rng: np.random.Generator) -> MtjDevice:
    g_off, g_on, v_on, v_off = (float(a) for a in sample_arrays(params, rng, None))
    return MtjDevice(g_off, g_on, v_on, v_off, OFF)


def base_conductance(dev: MtjDevice) -> float:
    return dev.g_on if dev.state == ON else dev.g_off


def conductance(dev: MtjDevice, v_bias: float = 0.0, nonlinearity: float = 0.0) -> float:
    """Conductance at a bias; alpha = 0 gives the linear element."""
    return base_conductance(dev) / (1.0 + nonlinearity * v_bias * v_bias)


def apply_write_voltage(dev: MtjDevice, v_device: float) -> bool:
    """Deterministic threshold switching. Positive voltage drives AP -> P."""
    if dev.state == OFF and v_device >= dev.v_switch_to_on:
        dev.state = ON
        return True
    if dev.state == ON and v_device <= -dev.v_switch_to_off:
        dev.state = OFF
        return True
    return False


def tmr(dev: MtjDevice) -> float:
    return (dev.g_on - dev.g_off) / dev.g_off
