"""Vector fields with the slip/Navier boundary conditions encoded as parities.

A velocity component ``v_i`` is a sine series along axis ``i`` and a cosine
series along the other two axes. On the faces ``x_i in {0, L_i}`` this gives
``v_i = 0`` and a vanishing normal derivative of the tangential components,
which is exactly what both the stress-free slip condition and the
``rot v x n = 0`` condition reduce to on flat faces.

Functions ending in ``_array`` work on stacked coefficient arrays of shape
``(3, N1, N2, N3)`` and are the hot path of the time integrator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import spectral
from .domain import BoxDomain
from .spectral import (
    ALL_EVEN,
    CoefficientTensor,
    Parity,
    canonical_parity,
    derivative_symbol,
    differentiate,
    dual_parity,
)

ScalarField = CoefficientTensor

CANONICAL = tuple(canonical_parity(i) for i in range(3))
DUAL = tuple(dual_parity(i) for i in range(3))

# grid points with |v| below this fraction of max|v| are treated as |v| = 0
MAGNITUDE_THRESHOLD = 1e-14


@dataclass(frozen=True, eq=False)
class VectorField:
    """Three scalar fields on one domain; parities are arbitrary."""

    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) != 3:
            raise ValueError("a vector field has three components")
        if any(c.domain != comps[0].domain for c in comps):
            raise ValueError("components live on different domains")
        object.__setattr__(self, "components", comps)

    @property
    def domain(self) -> BoxDomain:
        return self.components[0].domain

    @property
    def parities(self) -> tuple:
        return tuple(c.parity for c in self.components)

    @property
    def is_canonical(self) -> bool:
        return self.parities == CANONICAL

    def __getitem__(self, i) -> CoefficientTensor:
        return self.components[i]

    def __iter__(self):
        return iter(self.components)

    def stack(self) -> np.ndarray:
        return np.stack([c.coeffs for c in self.components])

    def values(self, refine: float = 1.0) -> np.ndarray:
        return np.stack([c.values(refine) for c in self.components])

    def _map(self, other, op):
        return type(self)(tuple(op(a, b) for a, b in zip(self, other)))

    def __add__(self, other):
        return self._map(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._map(other, lambda a, b: a - b)

    def __mul__(self, scalar):
        return type(self)(tuple(c * scalar for c in self))

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def inner(self, other) -> float:
        return sum(a.inner(b) for a, b in zip(self, other))

    def l2_norm(self) -> float:
        return float(np.sqrt(max(self.inner(self), 0.0)))


class VelocityField(VectorField):
    """A vector field carrying the canonical velocity parity."""

    def __post_init__(self):
        super().__post_init__()
        if not self.is_canonical:
            raise ValueError(
                f"velocity parity must be {[str(p) for p in CANONICAL]}, "
                f"got {[str(p) for p in self.parities]}"
            )

    @classmethod
    def from_array(cls, domain: BoxDomain, stack) -> "VelocityField":
        stack = np.asarray(stack, dtype=float)
        return cls(tuple(CoefficientTensor(domain, CANONICAL[i], stack[i]) for i in range(3)))

    @classmethod
    def from_values(cls, domain: BoxDomain, values) -> "VelocityField":
        return cls(tuple(spectral.forward(domain, values[i], CANONICAL[i]) for i in range(3)))

    @classmethod
    def zeros(cls, domain: BoxDomain) -> "VelocityField":
        return cls.from_array(domain, np.zeros((3,) + domain.shape))


def as_velocity(v) -> VelocityField:
    if isinstance(v, VelocityField):
        return v
    return VelocityField(tuple(v))


# -- vector calculus --------------------------------------------------------


def gradient(s: CoefficientTensor) -> VectorField:
    g = VectorField(tuple(differentiate(s, a) for a in range(3)))
    if g.is_canonical:
        return VelocityField(g.components)
    return g


def divergence(v: VectorField) -> CoefficientTensor:
    parts = [differentiate(v[i], i) for i in range(3)]
    out = parts[0]
    for p in parts[1:]:
        out = out + p
    return out


def curl(v: VectorField) -> VectorField:
    d = lambda i, a: differentiate(v[i], a)  # noqa: E731
    return VectorField((d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)))


def laplacian(v: VectorField) -> VectorField:
    return type(v)(tuple(spectral.laplacian(c) for c in v))


# -- projection and the nonlinear term on stacked arrays -------------------


def _wavenumber_stack(domain: BoxDomain):
    return domain.wavenumber_mesh()


def divergence_array(domain: BoxDomain, stack: np.ndarray) -> np.ndarray:
    k = _wavenumber_stack(domain)
    return k[0] * stack[0] + k[1] * stack[1] + k[2] * stack[2]


def leray_array(domain: BoxDomain, stack: np.ndarray) -> np.ndarray:
    """``v - grad lap^{-1} div v`` mode by mode: ``c - k (k.c) / |k|^2``."""
    k = _wavenumber_stack(domain)
    k2 = domain.laplacian_symbol()
    kdotc = k[0] * stack[0] + k[1] * stack[1] + k[2] * stack[2]
    safe = np.where(k2 > 0, k2, 1.0)
    phi = np.where(k2 > 0, kdotc / safe, 0.0)
    return np.stack([stack[i] - k[i] * phi for i in range(3)])


def leray_project(v: VectorField) -> VelocityField:
    if not v.is_canonical:
        raise ValueError("leray_project needs the canonical velocity parity")
    return VelocityField.from_array(v.domain, leray_array(v.domain, v.stack()))


def velocity_gradient_array(domain: BoxDomain, stack: np.ndarray, shape=None) -> np.ndarray:
    """Grid values ``G[i, j] = d v_i / d x_j`` (shape ``(3, 3, ...)``)."""
    rows = []
    for i in range(3):
        row = []
        for j in range(3):
            sym = derivative_symbol(domain, CANONICAL[i], j)
            row.append(spectral.inverse_array(stack[i] * sym, CANONICAL[i].flip(j), shape))
        rows.append(row)
    return np.array(rows)


def velocity_values_array(domain: BoxDomain, stack: np.ndarray, shape=None) -> np.ndarray:
    return np.stack([spectral.inverse_array(stack[i], CANONICAL[i], shape) for i in range(3)])


def convective_array(domain: BoxDomain, stack: np.ndarray) -> np.ndarray:
    """Coefficients of ``(v . grad) v`` with 2/3 truncation of inputs and output."""
    mask = domain.dealias_mask()
    vt = stack * mask
    vals = velocity_values_array(domain, vt)
    grad = velocity_gradient_array(domain, vt)
    out = np.empty_like(stack)
    for i in range(3):
        prod = vals[0] * grad[i, 0] + vals[1] * grad[i, 1] + vals[2] * grad[i, 2]
        out[i] = spectral.forward_array(prod, CANONICAL[i]) * mask
    return out


def _product_parity(i: int) -> Parity:
    """Parity of ``sum_j v_j d_j v_i`` from the parity algebra."""
    parities = {CANONICAL[j] * CANONICAL[i].flip(j) for j in range(3)}
    if len(parities) != 1:
        raise AssertionError("convective products do not share one parity")
    return parities.pop()


def convective_term(v: VectorField) -> VelocityField:
    v = as_velocity(v)
    for i in range(3):
        if _product_parity(i) != CANONICAL[i]:
            raise AssertionError("convective term left the canonical parity")
    return VelocityField.from_array(v.domain, convective_array(v.domain, v.stack()))


# -- boundary traces --------------------------------------------------------


def face_trace(s: CoefficientTensor, axis: int, side: int) -> np.ndarray:
    """Values of ``s`` on the face ``x_axis = 0`` (side 0) or ``x_axis = L`` (side 1).

    The normal direction is summed as a series at the face coordinate; the
    tangential directions are sampled at their collocation points.
    """
    L, n = s.domain.extents[axis], s.domain.shape[axis]
    point = 0.0 if side == 0 else L
    b = spectral.basis_values(L, n, s.parity[axis], [point])[0]
    face = np.tensordot(b, s.coeffs, axes=([0], [axis]))
    rest = [a for a in range(3) if a != axis]
    for local, a in enumerate(rest):
        face = spectral.inverse_axis(face, local, s.parity[a])
    return face


class BoundaryResiduals(NamedTuple):
    normal_velocity: float
    tangential_vorticity: float
    tangential_stress: float


def boundary_residuals(v: VectorField) -> BoundaryResiduals:
    """Sup over the six faces of ``|v.n|``, ``|rot v x n|`` and ``|n.D(v).tau|``.

    Tangents are the coordinate directions of each face.
    """
    grads = [[differentiate(v[i], j) for j in range(3)] for i in range(3)]
    w = curl(v)
    normal = vort = stress = 0.0
    for a in range(3):
        tangents = [b for b in range(3) if b != a]
        for side in (0, 1):
            normal = max(normal, np.max(np.abs(face_trace(v[a], a, side))))
            for b in tangents:
                vort = max(vort, np.max(np.abs(face_trace(w[b], a, side))))
                d_ab = 0.5 * (face_trace(grads[a][b], a, side) + face_trace(grads[b][a], a, side))
                stress = max(stress, np.max(np.abs(d_ab)))
    return BoundaryResiduals(float(normal), float(vort), float(stress))


# -- pointwise magnitudes ---------------------------------------------------


def magnitude(values: np.ndarray) -> np.ndarray:
    """Pointwise Euclidean norm over the leading axis."""
    return np.sqrt(np.sum(values * values, axis=0))


def singular_mask(mag: np.ndarray, threshold: float = MAGNITUDE_THRESHOLD) -> np.ndarray:
    """True where ``|v|`` counts as zero for chain-rule expressions in ``|v|``."""
    top = float(np.max(mag)) if mag.size else 0.0
    return mag < threshold * top if top > 0 else np.ones_like(mag, dtype=bool)


def is_all_even(s: CoefficientTensor) -> bool:
    return s.parity == ALL_EVEN
