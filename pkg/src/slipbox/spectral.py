"""Parity-typed cosine/sine transforms on the cell-centred grid.

Along an *even* axis a field is a cosine series, along an *odd* axis a sine
series, both in the symbols ``k~ = pi k / L``:

    f(x) = sum_k c_k cos(k~ x)        (even)
    f(x) = sum_k c_k sin(k~ x)        (odd, c_0 == 0)

Coefficients are mode amplitudes, so ``cos(pi x / a)`` has coefficient 1 at
index 1. The transforms are the type-II DCT/DST pair with the scaling

    even:  c = DCT-II(f) / N,  c_0 halved
    odd:   c_k = DST-II(f)[k-1] / N  for k = 1 .. N-1

The sine mode ``k = N`` (the grid Nyquist mode, ``(-1)^j`` on the grid) has
no slot and is dropped by ``forward``; every other mode round-trips exactly.

Parseval weights, per axis, are ``L`` for the even ``k = 0`` mode and ``L/2``
otherwise; the weight of a 3-D mode is the product over axes, so

    int_box f g dx = sum_k w_k f_k g_k

for any two band-limited fields of equal parity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .domain import BoxDomain

EVEN, ODD = 0, 1


class Parity(tuple):
    """Per-axis parity triple, 0 for even (cosine) and 1 for odd (sine).

    Multiplying two parities composes them the way pointwise products do.
    """

    def __new__(cls, bits):
        if isinstance(bits, str):
            bits = ["eo".index(ch) for ch in bits]
        bits = tuple(int(b) for b in bits)
        if len(bits) != 3 or any(b not in (EVEN, ODD) for b in bits):
            raise ValueError(f"parity must be three bits in {{0, 1}}, got {bits}")
        return super().__new__(cls, bits)

    def flip(self, axis: int) -> "Parity":
        bits = list(self)
        bits[axis] ^= 1
        return Parity(bits)

    def __mul__(self, other) -> "Parity":
        return Parity(a ^ b for a, b in zip(self, other))

    __rmul__ = __mul__

    def __str__(self):
        return "".join("eo"[b] for b in self)

    def __repr__(self):
        return f"Parity('{self}')"


ALL_EVEN = Parity((0, 0, 0))


def canonical_parity(component: int) -> Parity:
    """Velocity component ``i``: odd along axis ``i``, even along the others."""
    return Parity(1 if a == component else 0 for a in range(3))


def dual_parity(component: int) -> Parity:
    """Vorticity component ``i``: even along axis ``i``, odd along the others."""
    return Parity(0 if a == component else 1 for a in range(3))


# -- one-axis transforms on raw arrays -------------------------------------


def _take(x, axis, sl):
    idx = [slice(None)] * x.ndim
    idx[axis] = sl
    return x[tuple(idx)]


def _put(x, axis, sl, value):
    idx = [slice(None)] * x.ndim
    idx[axis] = sl
    x[tuple(idx)] = value


def forward_axis(values: np.ndarray, axis: int, odd: bool) -> np.ndarray:
    n = values.shape[axis]
    if not odd:
        c = sfft.dct(values, type=2, axis=axis) / n
        _put(c, axis, 0, 0.5 * _take(c, axis, 0))
        return c
    y = sfft.dst(values, type=2, axis=axis) / n
    c = np.zeros_like(y)
    _put(c, axis, slice(1, None), _take(y, axis, slice(0, n - 1)))
    return c


def inverse_axis(coeffs: np.ndarray, axis: int, odd: bool) -> np.ndarray:
    n = coeffs.shape[axis]
    if not odd:
        b = 0.5 * coeffs
        _put(b, axis, 0, _take(coeffs, axis, 0))
        return sfft.dct(b, type=3, axis=axis)
    b = np.zeros_like(coeffs)
    _put(b, axis, slice(0, n - 1), 0.5 * _take(coeffs, axis, slice(1, None)))
    return sfft.dst(b, type=3, axis=axis)


def resize(coeffs: np.ndarray, shape) -> np.ndarray:
    """Zero-pad or truncate a coefficient array to ``shape`` (low corner kept)."""
    shape = tuple(shape)
    if coeffs.shape == shape:
        return coeffs
    out = np.zeros(shape, dtype=coeffs.dtype)
    common = tuple(slice(0, min(a, b)) for a, b in zip(coeffs.shape, shape))
    out[common] = coeffs[common]
    return out


def forward_array(values: np.ndarray, parity) -> np.ndarray:
    c = np.asarray(values, dtype=float)
    for axis, bit in enumerate(parity):
        c = forward_axis(c, axis, bit)
    return c


def inverse_array(coeffs: np.ndarray, parity, shape=None) -> np.ndarray:
    """Grid values of a coefficient array; ``shape`` selects a refined grid."""
    c = coeffs if shape is None else resize(coeffs, shape)
    for axis, bit in enumerate(parity):
        c = inverse_axis(c, axis, bit)
    return c


def refined_shape(shape, factor: float) -> tuple[int, ...]:
    return tuple(int(np.ceil(n * factor)) for n in shape)


def basis_values(length: float, n: int, odd: bool, points) -> np.ndarray:
    """Matrix ``B[i, k]`` of basis function ``k`` at ``points[i]``."""
    k = np.pi * np.arange(n) / length
    arg = np.outer(np.asarray(points, dtype=float), k)
    return np.sin(arg) if odd else np.cos(arg)


def parseval_weights(domain: BoxDomain, parity) -> np.ndarray:
    w = []
    for L, n, bit in zip(domain.extents, domain.resolution, parity):
        wa = np.full(n, L / 2)
        if not bit:
            wa[0] = L
        w.append(wa)
    return w[0][:, None, None] * w[1][None, :, None] * w[2][None, None, :]


# -- typed coefficient tensors ---------------------------------------------


@dataclass(frozen=True, eq=False)
class CoefficientTensor:
    """Trig-series coefficients of a scalar field with a fixed parity."""

    domain: BoxDomain
    parity: Parity
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "parity", Parity(self.parity))
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != self.domain.shape:
            raise ValueError(
                f"coefficient shape {c.shape} does not match resolution {self.domain.shape}"
            )
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        for axis, bit in enumerate(self.parity):
            if bit and np.any(_take(c, axis, 0) != 0):
                raise ValueError(f"odd axis {axis} carries a nonzero k=0 coefficient")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, domain: BoxDomain, parity) -> "CoefficientTensor":
        return cls(domain, Parity(parity), np.zeros(domain.shape))

    def _like(self, coeffs, parity=None) -> "CoefficientTensor":
        return CoefficientTensor(self.domain, self.parity if parity is None else parity, coeffs)

    def _check_compatible(self, other):
        if other.domain != self.domain or other.parity != self.parity:
            raise ValueError(
                f"incompatible fields: {self.parity} on {self.domain.shape} vs "
                f"{other.parity} on {other.domain.shape}"
            )

    def __add__(self, other):
        self._check_compatible(other)
        return self._like(self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check_compatible(other)
        return self._like(self.coeffs - other.coeffs)

    def __neg__(self):
        return self._like(-self.coeffs)

    def __mul__(self, scalar):
        return self._like(self.coeffs * float(scalar))

    __rmul__ = __mul__

    def values(self, refine: float = 1.0) -> np.ndarray:
        shape = None if refine == 1 else refined_shape(self.domain.shape, refine)
        return inverse_array(self.coeffs, self.parity, shape)

    def mean(self) -> float:
        """Box average; only the all-even constant mode contributes."""
        return float(self.coeffs[0, 0, 0]) if self.parity == ALL_EVEN else 0.0

    def inner(self, other) -> float:
        """L2 inner product over the box, computed from coefficients."""
        self._check_compatible(other)
        w = parseval_weights(self.domain, self.parity)
        return float(np.sum(w * self.coeffs * other.coeffs))

    def l2_norm(self) -> float:
        return float(np.sqrt(max(self.inner(self), 0.0)))

    def evaluate(self, points) -> np.ndarray:
        """Direct series summation on the tensor grid ``points[0] x points[1] x points[2]``."""
        out = self.coeffs
        for axis in range(3):
            B = basis_values(
                self.domain.extents[axis], self.domain.shape[axis], self.parity[axis],
                np.atleast_1d(points[axis]),
            )
            out = np.moveaxis(np.tensordot(B, out, axes=([1], [axis])), 0, axis)
        return out


def forward(domain: BoxDomain, values, parity) -> CoefficientTensor:
    values = np.asarray(values, dtype=float)
    if values.shape != domain.shape:
        raise ValueError(f"value shape {values.shape} does not match resolution {domain.shape}")
    return CoefficientTensor(domain, Parity(parity), forward_array(values, Parity(parity)))


def inverse(tensor: CoefficientTensor) -> np.ndarray:
    return tensor.values()


def roundtrip_residual(domain: BoxDomain, values, parity) -> float:
    """Max-norm loss of ``inverse(forward(values))``, i.e. the dropped Nyquist content."""
    values = np.asarray(values, dtype=float)
    back = inverse(forward(domain, values, parity))
    return float(np.max(np.abs(back - values)))


def derivative_symbol(domain: BoxDomain, parity, axis: int) -> np.ndarray:
    """Broadcastable multiplier for d/dx_axis: ``-k~`` on cosines, ``+k~`` on sines."""
    k = domain.wavenumbers(axis)
    sign = 1.0 if parity[axis] else -1.0
    return (sign * k).reshape([-1 if b == axis else 1 for b in range(3)])


def differentiate(tensor: CoefficientTensor, axis: int) -> CoefficientTensor:
    sym = derivative_symbol(tensor.domain, tensor.parity, axis)
    return CoefficientTensor(tensor.domain, tensor.parity.flip(axis), tensor.coeffs * sym)


def laplacian(tensor: CoefficientTensor) -> CoefficientTensor:
    return tensor._like(-tensor.domain.laplacian_symbol() * tensor.coeffs)


def dealias(tensor: CoefficientTensor) -> CoefficientTensor:
    return tensor._like(tensor.coeffs * tensor.domain.dealias_mask())
