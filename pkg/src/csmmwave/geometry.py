"""Uniform linear array responses, virtual angle grids and DFT dictionaries."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ArrayGeometry:
    """A uniform linear array.

    Parameters
    ----------
    n_antennas : int
        Number of elements.
    element_spacing_wavelengths : float
        Element spacing divided by the carrier wavelength (d / lambda).
    """

    n_antennas: int
    element_spacing_wavelengths: float = 0.5

    def __post_init__(self):
        if int(self.n_antennas) != self.n_antennas or self.n_antennas < 1:
            raise ValueError(f"n_antennas must be a positive integer, got {self.n_antennas}")
        if not np.isfinite(self.element_spacing_wavelengths) or self.element_spacing_wavelengths <= 0:
            raise ValueError(
                f"element_spacing_wavelengths must be positive, got {self.element_spacing_wavelengths}"
            )


@dataclass(frozen=True)
class AngleGrid:
    """Ordered set of candidate angles (radians)."""

    points: tuple[float, ...]

    def __post_init__(self):
        if len(self.points) < 1:
            raise ValueError("an angle grid needs at least one point")
        object.__setattr__(self, "points", tuple(float(p) for p in self.points))

    @property
    def size(self) -> int:
        return len(self.points)

    def __getitem__(self, k):
        return self.points[k]


def steering_vector(geometry: ArrayGeometry, angle: float) -> np.ndarray:
    """Unit-norm array response of a ULA toward ``angle``.

    Element ``n`` carries phase ``2*pi*(d/lambda)*n*sin(angle)``; element 0
    is the reference and is real positive.
    """
    n = np.arange(geometry.n_antennas)
    phase = 2.0 * np.pi * geometry.element_spacing_wavelengths * n * np.sin(angle)
    return np.exp(1j * phase) / np.sqrt(geometry.n_antennas)


def virtual_grid(n_antennas: int, element_spacing_wavelengths: float = 0.5) -> AngleGrid:
    """Virtual directions of an ``n_antennas`` half-wavelength ULA.

    Point ``k`` has spatial frequency ``2k/N`` wrapped into [-1, 1), so the
    steering vectors at the grid points are the columns of the unitary DFT
    matrix in natural order. Angles outside the physical branch are given
    by their arcsin alias.
    """
    if int(n_antennas) != n_antennas or n_antennas < 1:
        raise ValueError(f"n_antennas must be a positive integer, got {n_antennas}")
    if element_spacing_wavelengths != 0.5:
        raise ValueError(
            "virtual grid requires half-wavelength spacing (d/lambda = 0.5) so that "
            f"spatial frequencies cover [-1, 1); got {element_spacing_wavelengths}"
        )
    k = np.arange(n_antennas)
    freq = 2.0 * k / n_antennas
    freq = np.where(freq >= 1.0, freq - 2.0, freq)
    return AngleGrid(tuple(np.arcsin(freq)))


def nearest_virtual_index(angle: float, n_antennas: int) -> int:
    """Index of the virtual-grid point whose spatial frequency is closest to ``angle``'s."""
    k = np.rint(np.sin(angle) * n_antennas / 2.0)
    return int(k) % n_antennas


def dictionary(geometry: ArrayGeometry, grid: AngleGrid) -> np.ndarray:
    """Stack steering vectors for every grid point as columns (N x G)."""
    n = np.arange(geometry.n_antennas)
    # same operation order as steering_vector so columns match it bit for bit
    phase = (2.0 * np.pi * geometry.element_spacing_wavelengths * n)[:, None] * np.sin(np.asarray(grid.points))[None, :]
    return np.exp(1j * phase) / np.sqrt(geometry.n_antennas)
