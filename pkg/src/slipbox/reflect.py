"""Even/odd reflection of box fields across their faces.

Reflecting across ``x_axis = 0`` doubles the interval to ``[-L, L)``; the
doubled samples are periodic with period ``2L``. Even axes are mirrored with
``f(-x) = f(x)``, odd axes with ``f(-x) = -f(x)``. For velocity this keeps
tangential components and flips the normal one, which is why the
parity-typed transforms are the periodic spectral method of the reflected
problem.

The doubled grid is ``y_m = -L + (m + 1/2) h`` for ``m < 2N``; its upper half
is the original grid.
"""

from __future__ import annotations

import numpy as np
import scipy.fft as sfft

from . import spectral
from .fields import VectorField
from .spectral import CoefficientTensor


def reflect_values(values: np.ndarray, axis: int, odd: bool) -> np.ndarray:
    mirror = np.flip(values, axis=axis)
    return np.concatenate([-mirror if odd else mirror, values], axis=axis)


def restrict_values(values: np.ndarray, axis: int) -> np.ndarray:
    n = values.shape[axis] // 2
    idx = [slice(None)] * values.ndim
    idx[axis] = slice(n, None)
    return values[tuple(idx)]


def extend_scalar(s: CoefficientTensor, axis: int, parity=None, values=None) -> np.ndarray:
    """Samples of ``s`` on the grid doubled along ``axis``.

    ``parity`` overrides the field's own parity (negative controls only).
    """
    parity = s.parity if parity is None else spectral.Parity(parity)
    vals = s.values() if values is None else values
    return reflect_values(vals, axis, parity[axis])


def extend_velocity(v: VectorField, axis: int) -> np.ndarray:
    """Stacked extension: tangential components mirrored evenly, the normal one oddly."""
    return np.stack([extend_scalar(c, axis) for c in v])


def periodic_second_derivative(values: np.ndarray, axis: int, period: float) -> np.ndarray:
    n = values.shape[axis]
    k = 2 * np.pi * sfft.fftfreq(n, d=period / n)
    shape = [1] * values.ndim
    shape[axis] = n
    sym = -(k**2).reshape(shape)
    if n % 2 == 0:
        # the Nyquist mode has no well-defined derivative; drop it
        sym = sym.copy()
        sym[tuple(0 if a != axis else n // 2 for a in range(values.ndim))] = 0.0
    return sfft.ifft(sym * sfft.fft(values, axis=axis), axis=axis).real


def parity_second_derivative(values: np.ndarray, axis: int, length: float, odd: bool) -> np.ndarray:
    n = values.shape[axis]
    c = spectral.forward_axis(values, axis, odd)
    k = np.pi * np.arange(n) / length
    shape = [1] * values.ndim
    shape[axis] = n
    return spectral.inverse_axis(-(k**2).reshape(shape) * c, axis, odd)


def mixed_laplacian(values: np.ndarray, extents, parity, extended_axes) -> np.ndarray:
    """Laplacian with FFT derivatives on reflected axes and parity transforms elsewhere."""
    out = np.zeros_like(values)
    for a in range(3):
        if a in extended_axes:
            out += periodic_second_derivative(values, a, 2 * extents[a])
        else:
            out += parity_second_derivative(values, a, extents[a], parity[a])
    return out


def commutation_check(s: CoefficientTensor, axis, parity=None) -> float:
    """``max |extend(lap s) - lap_periodic(extend s)|`` on the doubled grid, relative to ``max |s|``.

    ``axis`` may be one axis or a sequence applied in order (e.g. ``(2, 0)``
    for the corner reflection across ``x3 = 0`` then ``x1 = 0``).
    """
    axes = (axis,) if np.isscalar(axis) else tuple(axis)
    use = s.parity if parity is None else spectral.Parity(parity)
    ext = s.values()
    ext_lap = spectral.laplacian(s).values()
    for a in axes:
        ext = reflect_values(ext, a, use[a])
        ext_lap = reflect_values(ext_lap, a, use[a])
    lap_ext = mixed_laplacian(ext, s.domain.extents, s.parity, axes)
    scale = float(np.max(np.abs(s.values()))) or 1.0
    return float(np.max(np.abs(ext_lap - lap_ext))) / scale
