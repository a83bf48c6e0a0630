"""Neumann problem ``-lap psi = g``, ``n . grad psi = 0``, ``int psi = 0`` on the box.

In the cosine basis the Neumann condition holds term by term and the
Laplacian is diagonal, so the solve is one division per mode.
"""

from __future__ import annotations

import numpy as np

from .spectral import ALL_EVEN, CoefficientTensor

# relative size of the mean of g tolerated as quadrature noise
COMPATIBILITY_TOL = 1e-10


class IncompatibleDataError(ValueError):
    """The datum has nonzero mean, so the Neumann problem has no solution."""


def solve_neumann(g: CoefficientTensor, tol: float = COMPATIBILITY_TOL) -> CoefficientTensor:
    if g.parity != ALL_EVEN:
        raise ValueError(f"Neumann datum must be even along every axis, got {g.parity}")
    norm = g.l2_norm() / np.sqrt(g.domain.volume)
    mean = g.coeffs[0, 0, 0]
    if abs(mean) > tol * norm:
        raise IncompatibleDataError(
            f"datum mean {mean:.3e} violates the solvability condition (rms {norm:.3e})"
        )
    k2 = g.domain.laplacian_symbol()
    psi = np.divide(g.coeffs, k2, out=np.zeros_like(g.coeffs), where=k2 > 0)
    return CoefficientTensor(g.domain, ALL_EVEN, psi)


def neumann_residual(psi: CoefficientTensor, g: CoefficientTensor) -> float:
    """Relative L2 size of ``lap psi + g`` away from the constant mode."""
    k2 = psi.domain.laplacian_symbol()
    r = -k2 * psi.coeffs + g.coeffs
    r[0, 0, 0] = 0.0
    res = CoefficientTensor(psi.domain, ALL_EVEN, r)
    scale = g.l2_norm()
    return res.l2_norm() / scale if scale > 0 else res.l2_norm()
