"""Box geometry, cell-centred collocation grid and midpoint quadrature.

Every field in the package lives on the half-offset grid

    x_j = (j + 1/2) * L / N,   j = 0 .. N-1

along each axis. The grid has no boundary nodes, so cosine and sine series
share the same sample points and the midpoint rule on it is the trapezoid
rule of the even/odd periodic extension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def _check_even(n: int) -> int:
    if int(n) != n or n < 2:
        raise ValueError(f"resolution must be a positive even integer, got {n}")
    if n % 2:
        raise ValueError(f"odd resolution {n} is not supported")
    return int(n)


def collocation_points(length: float, n: int) -> np.ndarray:
    """Cell-centred points ``(j + 1/2) * length / n`` for ``j < n``."""
    n = _check_even(n)
    return (np.arange(n) + 0.5) * (length / n)


def wavenumbers(length: float, n: int) -> np.ndarray:
    """Spectral symbols ``pi * k / length`` for ``k < n``."""
    n = _check_even(n)
    return np.pi * np.arange(n) / length


def dealias_mask_1d(n: int) -> np.ndarray:
    """Boolean mask of the modes kept by the 2/3 rule (``3k < 2n``)."""
    k = np.arange(n)
    return 3 * k < 2 * n


@dataclass(frozen=True)
class BoxDomain:
    """The box ``[0,a] x [0,b] x [0,c]`` sampled on ``N1 x N2 x N3`` cells.

    Axes are numbered 0, 1, 2 as in numpy.
    """

    extents: tuple[float, float, float]
    resolution: tuple[int, int, int]

    def __post_init__(self):
        extents = tuple(float(x) for x in self.extents)
        resolution = tuple(int(n) for n in self.resolution)
        if len(extents) != 3 or len(resolution) != 3:
            raise ValueError("extents and resolution must have three entries")
        for length in extents:
            if not (math.isfinite(length) and length > 0):
                raise ValueError(f"extents must be positive and finite, got {extents}")
        for n, given in zip(resolution, self.resolution):
            if n != given:
                raise ValueError(f"resolution must be integral, got {self.resolution}")
            _check_even(n)
            if n < 8:
                raise ValueError(f"resolution must be at least 8 per axis, got {n}")
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "resolution", resolution)

    @classmethod
    def cube(cls, length: float = math.pi, n: int = 32) -> "BoxDomain":
        return cls((length, length, length), (n, n, n))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.resolution

    @property
    def spacing(self) -> tuple[float, float, float]:
        return tuple(L / n for L, n in zip(self.extents, self.resolution))

    @property
    def cell_measure(self) -> float:
        h = self.spacing
        return h[0] * h[1] * h[2]

    @property
    def volume(self) -> float:
        a, b, c = self.extents
        return a * b * c

    def _axis(self, axis: int) -> int:
        if axis not in (0, 1, 2):
            raise ValueError(f"axis must be 0, 1 or 2, got {axis}")
        return axis

    def collocation_grid(self, axis: int) -> np.ndarray:
        axis = self._axis(axis)
        return collocation_points(self.extents[axis], self.resolution[axis])

    def wavenumbers(self, axis: int) -> np.ndarray:
        axis = self._axis(axis)
        return wavenumbers(self.extents[axis], self.resolution[axis])

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable coordinate arrays (shapes (N1,1,1), (1,N2,1), (1,1,N3))."""
        return tuple(
            self.collocation_grid(a).reshape([-1 if b == a else 1 for b in range(3)])
            for a in range(3)
        )

    def wavenumber_mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(
            self.wavenumbers(a).reshape([-1 if b == a else 1 for b in range(3)])
            for a in range(3)
        )

    def laplacian_symbol(self) -> np.ndarray:
        """``|k~|^2`` on the full index grid."""
        k1, k2, k3 = self.wavenumber_mesh()
        return k1**2 + k2**2 + k3**2

    def dealias_mask(self) -> np.ndarray:
        m = [dealias_mask_1d(n) for n in self.resolution]
        return m[0][:, None, None] & m[1][None, :, None] & m[2][None, None, :]

    def with_resolution(self, resolution) -> "BoxDomain":
        return BoxDomain(self.extents, tuple(resolution))

    def quadrature(self, values: np.ndarray) -> float:
        """Midpoint rule ``sum(values) * cell_measure`` on the native grid."""
        return float(np.sum(values) * self.cell_measure)
