"""Random quantized-phase training and the Kronecker-factored sensing operator.

Vectorization is column-major throughout: sample ``y[m * M_MS + n]`` is the
output of combiner ``n`` during beam ``m``, which is what makes the
measurement matrix ``P^T kron Q^H``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class TrainingConfig:
    m_bs: int
    m_ms: int
    nq_bs: int = 4
    nq_ms: int = 4
    training_power_w: float = 1.0
    normalize_columns: bool = True

    def __post_init__(self):
        for name in ("m_bs", "m_ms", "nq_bs", "nq_ms"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not self.training_power_w > 0:
            raise ValueError(f"training_power_w must be positive, got {self.training_power_w}")

    @property
    def n_measurements(self) -> int:
        return self.m_bs * self.m_ms


@dataclass(frozen=True, eq=False)
class SensingOperator:
    """``Theta = bs_factor kron ms_factor`` kept in factored form.

    ``bs_factor = P^T conj(A_BS)`` is M_BS x G_BS and ``ms_factor = Q^H A_MS``
    is M_MS x G_MS. Column ``k * G_MS + l`` of Theta is the atom for AoD
    index ``k`` and AoA index ``l``.
    """

    bs_factor: np.ndarray
    ms_factor: np.ndarray

    @property
    def n_measurements(self) -> int:
        return self.bs_factor.shape[0] * self.ms_factor.shape[0]

    @property
    def n_atoms(self) -> int:
        return self.bs_factor.shape[1] * self.ms_factor.shape[1]

    @property
    def grid_shape(self) -> tuple[int, int]:
        """(G_MS, G_BS)"""
        return self.ms_factor.shape[1], self.bs_factor.shape[1]

    def column(self, aoa_index: int, aod_index: int) -> np.ndarray:
        return np.kron(self.bs_factor[:, aod_index], self.ms_factor[:, aoa_index])

    def dense(self) -> np.ndarray:
        """Materialize Theta. Only meant for small problems and checks."""
        return np.kron(self.bs_factor, self.ms_factor)


@dataclass(frozen=True, eq=False)
class MeasurementRecord:
    y: np.ndarray
    operator: Optional[SensingOperator]
    noise_power_w: float

    def __post_init__(self):
        if self.operator is not None and self.y.shape != (self.operator.n_measurements,):
            raise ValueError(
                f"measurement length {self.y.shape} does not match operator "
                f"({self.operator.n_measurements} measurements)"
            )


def quantized_phases(nq_bits: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(2**nq_bits) / 2**nq_bits


def gen_training_matrix(n_antennas, n_vectors, nq_bits, normalize=True, rng=None) -> np.ndarray:
    """Training vectors with phases drawn uniformly from ``2**nq_bits`` levels.

    Returns an ``n_antennas x n_vectors`` matrix of unit-modulus entries,
    or entries of modulus ``1/sqrt(n_antennas)`` when ``normalize`` is set.
    """
    if nq_bits < 1:
        raise ValueError(f"nq_bits must be >= 1, got {nq_bits}")
    rng = np.random.default_rng() if rng is None else rng
    levels = rng.integers(2**nq_bits, size=(n_antennas, n_vectors))
    mat = np.exp(1j * quantized_phases(nq_bits)[levels])
    if normalize:
        mat /= np.sqrt(n_antennas)
    return mat


def synthesize_measurements(
    H,
    P_mat,
    Q_mat,
    training_power_w,
    noise_power_w,
    rng=None,
    operator: Optional[SensingOperator] = None,
    shared_noise: bool = False,
) -> MeasurementRecord:
    """Received training samples ``vec(sqrt(P) Q^H H P + noise)``.

    Each (combiner, beam) sample sees its own receive-noise vector, so the
    post-combining noise is ``q_n^H n_{n,m}``. With ``shared_noise`` one
    noise vector per beam is combined by all ``M_MS`` combiners instead
    (``Q^H N`` with ``N`` of size N_MS x M_BS).
    """
    H = np.asarray(H)
    P_mat = np.asarray(P_mat)
    Q_mat = np.asarray(Q_mat)
    n_ms, n_bs = H.shape
    if P_mat.shape[0] != n_bs or Q_mat.shape[0] != n_ms:
        raise ValueError(
            f"dimension mismatch: H is {H.shape}, P is {P_mat.shape}, Q is {Q_mat.shape}"
        )
    m_ms, m_bs = Q_mat.shape[1], P_mat.shape[1]
    Y = np.sqrt(training_power_w) * (Q_mat.conj().T @ H @ P_mat)
    if noise_power_w > 0:
        rng = np.random.default_rng() if rng is None else rng
        scale = np.sqrt(noise_power_w / 2.0)
        if shared_noise:
            N = scale * (rng.standard_normal((n_ms, m_bs)) + 1j * rng.standard_normal((n_ms, m_bs)))
            Y = Y + Q_mat.conj().T @ N
        else:
            # q_n^H n with n ~ CN(0, s I) is exactly CN(0, s |q_n|^2)
            col_norms = np.linalg.norm(Q_mat, axis=0)[:, None]
            N = scale * (rng.standard_normal((m_ms, m_bs)) + 1j * rng.standard_normal((m_ms, m_bs)))
            Y = Y + col_norms * N
    y = Y.reshape(-1, order="F")
    return MeasurementRecord(y, operator, float(noise_power_w))


def build_sensing_operator(P_mat, Q_mat, A_bs, A_ms) -> SensingOperator:
    """Factor ``(P^T kron Q^H)(conj(A_BS) kron A_MS)`` by the mixed-product rule."""
    P_mat, Q_mat, A_bs, A_ms = map(np.asarray, (P_mat, Q_mat, A_bs, A_ms))
    if P_mat.shape[0] != A_bs.shape[0]:
        raise ValueError(f"P has {P_mat.shape[0]} rows but the BS dictionary has {A_bs.shape[0]}")
    if Q_mat.shape[0] != A_ms.shape[0]:
        raise ValueError(f"Q has {Q_mat.shape[0]} rows but the MS dictionary has {A_ms.shape[0]}")
    return SensingOperator(P_mat.T @ A_bs.conj(), Q_mat.conj().T @ A_ms)
