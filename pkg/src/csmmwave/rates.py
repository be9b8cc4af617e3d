"""Conjugate analog beamforming and achievable-rate expressions."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .channel import ChannelRealization
from .geometry import AngleGrid, ArrayGeometry, steering_vector
from .recovery import SupportEstimate


@dataclass(frozen=True, eq=False)
class BeamformingSolution:
    """Analog precoder ``F`` (N_BS x U) and combiners ``W`` (N_MS x U), one column per user."""

    precoder: np.ndarray
    combiners: np.ndarray
    fed_back_bits_per_user: int

    @property
    def n_users(self) -> int:
        return self.precoder.shape[1]


@dataclass(frozen=True)
class RateReport:
    per_user_rate_bps_hz: tuple[float, ...]
    single_user_rate_bps_hz: tuple[float, ...]

    @property
    def sum_rate_bps_hz(self) -> float:
        return float(sum(self.per_user_rate_bps_hz))


def feedback_bits(g_bs: int) -> int:
    return math.ceil(math.log2(g_bs)) if g_bs > 1 else 0


def quantize_phases(weights: np.ndarray, nq_bits: int) -> np.ndarray:
    """Round every entry's phase to the nearest multiple of 2*pi / 2**nq_bits, keeping its modulus."""
    step = 2.0 * np.pi / 2**nq_bits
    return np.abs(weights) * np.exp(1j * step * np.round(np.angle(weights) / step))


def steering_beamformers(
    aoas: Sequence[float],
    aods: Sequence[float],
    bs: ArrayGeometry,
    ms: ArrayGeometry,
    g_bs: int,
    requantize_bits: Optional[int] = None,
) -> BeamformingSolution:
    """Point combiner ``u`` at ``aoas[u]`` and precoder column ``u`` at ``aods[u]``."""
    F = np.column_stack([steering_vector(bs, a) for a in aods])
    W = np.column_stack([steering_vector(ms, a) for a in aoas])
    if requantize_bits is not None:
        F = quantize_phases(F, requantize_bits)
    return BeamformingSolution(F, W, feedback_bits(g_bs))


def conjugate_beamformers(
    estimates: Sequence[SupportEstimate],
    bs_grid: AngleGrid,
    ms_grid: AngleGrid,
    bs: ArrayGeometry,
    ms: ArrayGeometry,
    requantize_bits: Optional[int] = None,
) -> BeamformingSolution:
    """Beamformers from recovered supports.

    Each MS combines with the steering vector at its estimated AoA and feeds
    its estimated AoD index back (error-free); the BS precodes user ``u``
    with the steering vector at that AoD.
    """
    aoas = [ms_grid[e.aoa_index] for e in estimates]
    aods = [bs_grid[e.aod_index] for e in estimates]
    return steering_beamformers(aoas, aods, bs, ms, bs_grid.size, requantize_bits)


def sinr_rate(H_u, solution: BeamformingSolution, u: int, tx_power_w: float, noise_power_w: float) -> float:
    """Gaussian-signaling rate of user ``u`` with equal power ``P_T/U`` per stream."""
    w = solution.combiners[:, u]
    g = w.conj() @ np.asarray(H_u) @ solution.precoder
    p = tx_power_w / solution.n_users
    power = p * np.abs(g) ** 2
    interference = power.sum() - power[u]
    sinr = power[u] / (noise_power_w * np.vdot(w, w).real + interference)
    return float(np.log2(1.0 + sinr))


def single_user_rate(gain, snr: float, n_users: int, n_bs: int, n_ms: int) -> float:
    """Interference-free rate ``log2(1 + SNR/U * N_BS * N_MS * |gain|^2)``."""
    return float(np.log2(1.0 + snr / n_users * n_bs * n_ms * abs(gain) ** 2))


def indicator_rate(
    u: int,
    truth_u: ChannelRealization,
    estimates: Sequence[SupportEstimate],
    snr: float,
    n_bs: int,
    n_ms: int,
) -> float:
    """Rate of user ``u`` written with support-recovery indicators.

    Valid for on-grid channels with virtual-grid dictionaries, where
    mismatched steering vectors are exactly orthogonal. Interference counts
    the other users ``r != u`` whose fed-back AoD equals the true AoD of
    ``u``.
    """
    if not truth_u.on_grid:
        raise ValueError("indicator rate requires on-grid angles")
    est = estimates[u]
    aoa_ok = est.aoa_index == truth_u.aoa_grid_index
    success = aoa_ok and est.aod_index == truth_u.aod_grid_index
    if not success:
        return 0.0
    collisions = sum(1 for r, e in enumerate(estimates) if r != u and e.aod_index == truth_u.aod_grid_index)
    received = snr / len(estimates) * n_bs * n_ms * abs(truth_u.gain) ** 2
    if received == 0:
        return 0.0
    return float(np.log2(1.0 + 1.0 / (collisions + 1.0 / received)))


def rate_lower_bound(r_single: float, n_users: int, n_bs: int, p_success: float) -> float:
    """``R_single * (1 - U/N_BS) * p_success``."""
    if not 0.0 <= p_success <= 1.0:
        raise ValueError(f"p_success must lie in [0, 1], got {p_success}")
    if n_users > n_bs:
        raise ValueError(f"n_users ({n_users}) exceeds n_bs ({n_bs})")
    return r_single * (1.0 - n_users / n_bs) * p_success


def effective_rate(
    r_single: float,
    n_users: int,
    n_bs: int,
    m_eps: float,
    coherence_length: float,
    eps: float,
    clamp: bool = False,
) -> float:
    """Lower bound on the rate net of training overhead and estimation failures."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps must lie in [0, 1], got {eps}")
    if m_eps < 0:
        raise ValueError(f"m_eps must be non-negative, got {m_eps}")
    if m_eps > coherence_length and not clamp:
        raise ValueError(f"training length {m_eps} exceeds coherence length {coherence_length}")
    overhead = max(0.0, 1.0 - m_eps / coherence_length)
    return rate_lower_bound(r_single, n_users, n_bs, 1.0 - eps) * overhead
