"""Support recovery over the Kronecker-factored sensing operator."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization
from .training import SensingOperator


@dataclass(frozen=True)
class Atom:
    aoa_index: int
    aod_index: int
    gain_estimate: complex


@dataclass(frozen=True)
class SupportEstimate:
    atoms: tuple[Atom, ...]
    residual_norm: float

    @property
    def aoa_index(self) -> int:
        return self.atoms[0].aoa_index

    @property
    def aod_index(self) -> int:
        return self.atoms[0].aod_index


def correlate(op: SensingOperator, y) -> np.ndarray:
    """Matched-filter output ``Theta^H y`` arranged as a G_MS x G_BS matrix.

    Entry ``(l, k)`` is the correlation with atom ``k * G_MS + l``. Computed
    as ``ms_factor^H Y conj(bs_factor)`` with ``Y`` the M_MS x M_BS
    column-major reshape of ``y``; Theta itself is never formed.
    """
    y = np.asarray(y)
    m_ms, m_bs = op.ms_factor.shape[0], op.bs_factor.shape[0]
    if y.shape != (m_ms * m_bs,):
        raise ValueError(f"expected a measurement vector of length {m_ms * m_bs}, got shape {y.shape}")
    Y = y.reshape(m_ms, m_bs, order="F")
    return op.ms_factor.conj().T @ Y @ op.bs_factor.conj()


TIE_RTOL = 1e-12


def _argmax_atom(C_abs: np.ndarray) -> tuple[int, int]:
    # flat index k * G_MS + l; scores within TIE_RTOL of the peak count as tied
    # so that exact ties broken by rounding still resolve to the lowest index
    flat = C_abs.T.ravel()
    peak = flat.max()
    first = int(np.flatnonzero(flat >= peak * (1.0 - TIE_RTOL))[0])
    g_ms = C_abs.shape[0]
    return first % g_ms, first // g_ms


def recover_support_omp(op: SensingOperator, y, sparsity: int = 1) -> SupportEstimate:
    """Orthogonal matching pursuit on the factored operator.

    Each step picks the atom with the largest correlation magnitude against
    the residual, then refits all selected gains by least squares. With
    ``sparsity=1`` this is the single matched-filter argmax.
    """
    g_ms, g_bs = op.grid_shape
    if sparsity < 1 or sparsity > g_ms * g_bs:
        raise ValueError(f"sparsity must be in [1, {g_ms * g_bs}], got {sparsity}")
    if not (np.any(op.bs_factor) and np.any(op.ms_factor)):
        raise ValueError("sensing operator is identically zero")

    y = np.asarray(y, dtype=complex)
    residual = y
    selected: list[tuple[int, int]] = []
    gains = np.zeros(0, dtype=complex)
    for _ in range(sparsity):
        C_abs = np.abs(correlate(op, residual))
        for l, k in selected:
            C_abs[l, k] = -np.inf
        selected.append(_argmax_atom(C_abs))
        A = np.column_stack([op.column(l, k) for l, k in selected])
        if A.shape[1] == 1:
            a = A[:, 0]
            gains = np.array([np.vdot(a, y) / np.vdot(a, a).real])
        else:
            gains = np.linalg.lstsq(A, y, rcond=None)[0]
        residual = y - A @ gains

    atoms = tuple(Atom(l, k, complex(g)) for (l, k), g in zip(selected, gains))
    return SupportEstimate(atoms, float(np.linalg.norm(residual)))


def recovery_success(est: SupportEstimate, truth: ChannelRealization) -> bool:
    if not truth.on_grid:
        raise ValueError("recovery success is only defined for on-grid channel realizations")
    return est.aoa_index == truth.aoa_grid_index and est.aod_index == truth.aod_grid_index
