"""Single-path geometric channels and the link budget behind them."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import ArrayGeometry, steering_vector, virtual_grid

SPEED_OF_LIGHT = 299_792_458.0
THERMAL_NOISE_DBM_HZ = -174.0


class GainModel(str, enum.Enum):
    CONSTANT_LOS = "constant_los"
    COMPLEX_GAUSSIAN = "complex_gaussian"


class AngleModel(str, enum.Enum):
    ON_GRID = "on_grid"
    CONTINUOUS = "continuous"


@dataclass(frozen=True)
class LinkBudget:
    carrier_frequency_hz: float = 28e9
    bandwidth_hz: float = 50e6
    distance_m: float = 500.0
    tx_power_dbm: float = 37.0
    noise_figure_db: float = 0.0

    def __post_init__(self):
        for name in ("carrier_frequency_hz", "bandwidth_hz", "distance_m"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ValueError(f"{name} must be positive, got {v}")
        if not np.isfinite(self.tx_power_dbm):
            raise ValueError("tx_power_dbm must be finite")
        if not np.isfinite(self.noise_figure_db) or self.noise_figure_db < 0:
            raise ValueError(f"noise_figure_db must be non-negative, got {self.noise_figure_db}")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency_hz

    @property
    def tx_power_w(self) -> float:
        return dbm_to_watts(self.tx_power_dbm)


@dataclass(frozen=True)
class ChannelConfig:
    bs_geometry: ArrayGeometry = field(default_factory=lambda: ArrayGeometry(64))
    ms_geometry: ArrayGeometry = field(default_factory=lambda: ArrayGeometry(32))
    n_users: int = 4
    link: LinkBudget = field(default_factory=LinkBudget)
    gain_model: GainModel = GainModel.CONSTANT_LOS
    angle_model: AngleModel = AngleModel.ON_GRID
    rf_chains: Optional[int] = None

    def __post_init__(self):
        if self.n_users < 1:
            raise ValueError(f"n_users must be >= 1, got {self.n_users}")
        if self.rf_chains is not None and self.n_users > self.rf_chains:
            raise ValueError(f"n_users ({self.n_users}) exceeds rf_chains ({self.rf_chains})")
        object.__setattr__(self, "gain_model", GainModel(self.gain_model))
        object.__setattr__(self, "angle_model", AngleModel(self.angle_model))


@dataclass(frozen=True)
class ChannelRealization:
    """One user's path: complex gain (path loss included), AoA, AoD."""

    gain: complex
    aoa: float
    aod: float
    aoa_grid_index: Optional[int] = None
    aod_grid_index: Optional[int] = None

    @property
    def on_grid(self) -> bool:
        return self.aoa_grid_index is not None and self.aod_grid_index is not None


def dbm_to_watts(p_dbm: float) -> float:
    return 10.0 ** (p_dbm / 10.0) / 1e3


def noise_power(link: LinkBudget) -> float:
    """Thermal noise power in watts over the link bandwidth."""
    p_dbm = THERMAL_NOISE_DBM_HZ + 10.0 * np.log10(link.bandwidth_hz) + link.noise_figure_db
    return dbm_to_watts(p_dbm)


def free_space_path_loss_db(link: LinkBudget) -> float:
    return 20.0 * np.log10(4.0 * np.pi * link.distance_m / link.wavelength_m)


def los_path_gain(link: LinkBudget) -> float:
    """Magnitude of the LOS path amplitude under free-space propagation."""
    return 10.0 ** (-free_space_path_loss_db(link) / 20.0)


def nominal_snr(link: LinkBudget) -> float:
    """Transmit SNR, total transmit power over noise power (linear)."""
    return link.tx_power_w / noise_power(link)


def sample_channel(config: ChannelConfig, rng: np.random.Generator) -> list[ChannelRealization]:
    """Draw one single-path realization per user.

    Gains use ``los_path_gain`` for their magnitude (constant LOS) or for
    their RMS value (complex Gaussian). On-grid angles are drawn uniformly
    over the virtual grids; continuous angles uniformly over [-pi/2, pi/2).
    """
    n_bs = config.bs_geometry.n_antennas
    n_ms = config.ms_geometry.n_antennas
    amplitude = los_path_gain(config.link)
    if config.angle_model is AngleModel.ON_GRID:
        bs_grid = virtual_grid(n_bs, config.bs_geometry.element_spacing_wavelengths)
        ms_grid = virtual_grid(n_ms, config.ms_geometry.element_spacing_wavelengths)

    users = []
    for _ in range(config.n_users):
        if config.gain_model is GainModel.CONSTANT_LOS:
            gain = amplitude * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi))
        else:
            gain = amplitude * (rng.standard_normal() + 1j * rng.standard_normal()) / np.sqrt(2.0)

        if config.angle_model is AngleModel.ON_GRID:
            aoa_idx = int(rng.integers(n_ms))
            aod_idx = int(rng.integers(n_bs))
            users.append(ChannelRealization(complex(gain), ms_grid[aoa_idx], bs_grid[aod_idx], aoa_idx, aod_idx))
        else:
            aoa, aod = rng.uniform(-np.pi / 2, np.pi / 2, size=2)
            users.append(ChannelRealization(complex(gain), float(aoa), float(aod)))
    return users


def channel_matrix(real: ChannelRealization, bs: ArrayGeometry, ms: ArrayGeometry) -> np.ndarray:
    """N_MS x N_BS rank-one channel ``sqrt(N_BS N_MS) * gain * a_MS a_BS^H``."""
    a_ms = steering_vector(ms, real.aoa)
    a_bs = steering_vector(bs, real.aod)
    scale = np.sqrt(bs.n_antennas * ms.n_antennas) * real.gain
    return scale * np.outer(a_ms, a_bs.conj())
