import math

import numpy as np
import pytest

from csmmwave.channel import (
    AngleModel,
    ChannelConfig,
    ChannelRealization,
    GainModel,
    LinkBudget,
    channel_matrix,
    los_path_gain,
    noise_power,
    nominal_snr,
    sample_channel,
)
from csmmwave.geometry import ArrayGeometry, steering_vector, virtual_grid

# independent evaluations (mpmath, 30 digits) of the link-budget formulas
NOISE_50MHZ_W = 1.99053585276748625e-13
FSPL_28GHZ_500M_DB = 115.370343935448134
LOS_GAIN_28GHZ_500M = 1.70405184258462224e-06
SNR_NOMINAL = 25178508235883.344


def test_noise_power():
    assert noise_power(LinkBudget(bandwidth_hz=50e6)) == pytest.approx(NOISE_50MHZ_W, rel=1e-12)
    assert noise_power(LinkBudget(bandwidth_hz=1.0)) == pytest.approx(10 ** (-17.4) / 1e3, rel=1e-12)
    nf5 = 10 * math.log10(noise_power(LinkBudget(bandwidth_hz=50e6, noise_figure_db=5)) * 1e3)
    assert nf5 == pytest.approx(-92.0103, abs=1e-4)


def test_los_path_gain():
    link = LinkBudget(carrier_frequency_hz=28e9, distance_m=500)
    assert los_path_gain(link) == pytest.approx(LOS_GAIN_28GHZ_500M, rel=1e-12)
    assert -20 * math.log10(los_path_gain(link)) == pytest.approx(FSPL_28GHZ_500M_DB, abs=1e-9)
    zero_point = LinkBudget(distance_m=link.wavelength_m / (4 * math.pi))
    assert los_path_gain(zero_point) == pytest.approx(1.0, rel=1e-12)
    assert los_path_gain(LinkBudget(distance_m=1000)) == pytest.approx(los_path_gain(link) / 2, rel=1e-12)


def test_nominal_snr():
    assert nominal_snr(LinkBudget()) == pytest.approx(SNR_NOMINAL, rel=1e-12)
    equal = LinkBudget(tx_power_dbm=-174 + 10 * math.log10(50e6))
    assert nominal_snr(equal) == pytest.approx(1.0, rel=1e-12)
    doubled = LinkBudget(tx_power_dbm=37 + 10 * math.log10(2))
    assert nominal_snr(doubled) / nominal_snr(LinkBudget()) == pytest.approx(2.0, rel=1e-3)


def test_link_validation():
    with pytest.raises(ValueError):
        LinkBudget(distance_m=0)
    with pytest.raises(ValueError):
        LinkBudget(noise_figure_db=-1)
    with pytest.raises(ValueError):
        ChannelConfig(n_users=5, rf_chains=4)


def test_sample_on_grid_is_reproducible():
    cfg = ChannelConfig()
    a = sample_channel(cfg, np.random.default_rng(7))
    b = sample_channel(cfg, np.random.default_rng(7))
    assert a == b and len(a) == 4
    bs_grid, ms_grid = virtual_grid(64), virtual_grid(32)
    for r in a:
        assert 0 <= r.aoa_grid_index < 32 and 0 <= r.aod_grid_index < 64
        assert r.aoa == ms_grid[r.aoa_grid_index] and r.aod == bs_grid[r.aod_grid_index]


def test_constant_los_gain_magnitude():
    (r,) = sample_channel(ChannelConfig(n_users=1), np.random.default_rng(1))
    assert abs(r.gain) == pytest.approx(los_path_gain(LinkBudget()), rel=1e-14)


def test_continuous_angles_have_no_indices():
    cfg = ChannelConfig(angle_model=AngleModel.CONTINUOUS)
    for r in sample_channel(cfg, np.random.default_rng(2)):
        assert not r.on_grid
        assert -np.pi / 2 <= r.aoa < np.pi / 2 and -np.pi / 2 <= r.aod < np.pi / 2


def test_complex_gaussian_second_moment():
    cfg = ChannelConfig(n_users=1, gain_model=GainModel.COMPLEX_GAUSSIAN)
    rng = np.random.default_rng(3)
    power = np.mean([abs(sample_channel(cfg, rng)[0].gain) ** 2 for _ in range(100_000)])
    assert power == pytest.approx(los_path_gain(LinkBudget()) ** 2, rel=0.03)


@pytest.mark.parametrize("seed", range(5))
def test_channel_rank_norm_and_gain(seed):
    rng = np.random.default_rng(seed)
    bs, ms = ArrayGeometry(64), ArrayGeometry(32)
    real = ChannelRealization(complex(rng.normal(), rng.normal()), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5))
    H = channel_matrix(real, bs, ms)
    assert H.shape == (32, 64)
    s = np.linalg.svd(H, compute_uv=False)
    assert s[1] < 1e-9 * s[0]
    assert np.linalg.norm(H) == pytest.approx(math.sqrt(2048) * abs(real.gain), rel=1e-9)
    g = steering_vector(ms, real.aoa).conj() @ H @ steering_vector(bs, real.aod)
    assert abs(g - math.sqrt(2048) * real.gain) < 1e-9 * math.sqrt(2048) * abs(real.gain)


def test_unit_gain_and_zero_gain_channels():
    bs, ms = ArrayGeometry(64), ArrayGeometry(32)
    assert np.linalg.norm(channel_matrix(ChannelRealization(1.0, 0.3, -0.2), bs, ms)) == pytest.approx(45.254834, rel=1e-7)
    assert not np.any(channel_matrix(ChannelRealization(0.0, 0.3, -0.2), bs, ms))
