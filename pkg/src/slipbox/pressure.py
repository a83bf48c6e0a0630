"""Pressure recovery and the Neumann duality estimate of the pressure.

The pressure solves ``-lap p = div((v.grad)v - f)`` with ``dp/dn = 0``, which
in the cosine basis is one Neumann solve. The duality check pairs ``p`` with
``psi``, the Neumann solution for the datum ``p|p|^(s-2)`` minus its mean,
and measures every factor of

    ||p||_s^s = int grad p . grad psi <= ||v||_2s^2 ||hess psi||_s' + ||f||_s ||grad psi||_s'

independently by quadrature.

Nonlinear pointwise functions of ``p`` are sampled on a grid refined by
``REFINE`` per axis before transforming back, and all quadratures here use
that refined grid.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import spectral
from .fields import (
    VectorField,
    as_velocity,
    convective_array,
    divergence_array,
    face_trace,
    magnitude,
)
from .norms import lp_norm_values, pointwise_magnitude
from .poisson import solve_neumann
from .spectral import ALL_EVEN, CoefficientTensor, differentiate, refined_shape

REFINE = 1.5

CORPUS_COLUMNS = ("seed", "s", "norm_v_2s", "norm_p_s", "ratio", "duality_residual")


def _conjugate(s: float) -> float:
    return s / (s - 1)


def pressure_from_velocity(v, f: VectorField | None = None) -> CoefficientTensor:
    """Mean-zero, all-even pressure of a canonical velocity (and optional forcing)."""
    v = as_velocity(v)
    rhs_vec = convective_array(v.domain, v.stack())
    if f is not None:
        if not f.is_canonical:
            raise ValueError("forcing must carry the canonical velocity parity")
        rhs_vec = rhs_vec - f.stack()
    rhs = divergence_array(v.domain, rhs_vec)
    # sine-series divergence has no constant mode; clear rounding noise only
    rhs[0, 0, 0] = 0.0
    return solve_neumann(CoefficientTensor(v.domain, ALL_EVEN, rhs))


def duality_rhs(p: CoefficientTensor, s: float, refine: float = REFINE) -> CoefficientTensor:
    """``p|p|^(s-2)`` minus its mean, sampled on the refined grid and transformed back."""
    if not s > 1:
        raise ValueError(f"duality exponent must exceed 1, got {s}")
    if p.parity != ALL_EVEN:
        raise ValueError("pressure must be even along every axis")
    shape = refined_shape(p.domain.shape, refine)
    vals = p.values(refine)
    g = np.sign(vals) * np.abs(vals) ** (s - 1)
    coeffs = spectral.resize(spectral.forward_array(g, ALL_EVEN), p.domain.shape)
    coeffs[0, 0, 0] = 0.0
    return CoefficientTensor(p.domain, ALL_EVEN, coeffs)


def _cell(domain, refine):
    return domain.volume / float(np.prod(refined_shape(domain.shape, refine)))


def grad_values(s: CoefficientTensor, refine: float = REFINE) -> np.ndarray:
    return np.stack([differentiate(s, a).values(refine) for a in range(3)])


def hessian_values(s: CoefficientTensor, refine: float = REFINE) -> dict:
    """Grid values of the six distinct second derivatives, keyed ``(i, j)`` with ``i <= j``."""
    first = [differentiate(s, a) for a in range(3)]
    return {
        (i, j): differentiate(first[i], j).values(refine)
        for i in range(3) for j in range(i, 3)
    }


def hessian_magnitude(s: CoefficientTensor, refine: float = REFINE) -> np.ndarray:
    h = hessian_values(s, refine)
    sq = sum((1.0 if i == j else 2.0) * h[i, j] ** 2 for (i, j) in h)
    return np.sqrt(sq)


def lp(field, p: float, refine: float = REFINE) -> float:
    mag, cell = pointwise_magnitude(field, refine)
    return lp_norm_values(mag, cell, p)


def duality_identity_residual(p: CoefficientTensor, s: float, refine: float = REFINE) -> float:
    """``|int grad p . grad psi - ||p||_s^s| / ||p||_s^s``; 0 when ``p`` vanishes."""
    vals = p.values(refine)
    cell = _cell(p.domain, refine)
    target = float(np.sum(np.abs(vals) ** s) * cell)
    if target == 0.0:
        return 0.0
    psi = solve_neumann(duality_rhs(p, s, refine))
    pairing = float(np.sum(grad_values(p, refine) * grad_values(psi, refine)) * cell)
    return abs(pairing - target) / target


def pressure_estimate_ratio(v, f: VectorField | None, s: float, refine: float = REFINE) -> float:
    """``||p||_s / (||v||_2s^2 + ||f||_s)`` for the recovered pressure."""
    v = as_velocity(v)
    den = lp(v, 2 * s, refine) ** 2 + (lp(f, s, refine) if f is not None else 0.0)
    if den == 0.0:
        raise ZeroDivisionError("velocity and forcing both vanish")
    return lp(pressure_from_velocity(v, f), s, refine) / den


def w2_norm(psi: CoefficientTensor, r: float, refine: float = REFINE) -> float:
    """``(sum_{|alpha| <= 2} ||D^alpha psi||_r^r)^(1/r)`` over the ten distinct multi-indices."""
    cell = _cell(psi.domain, refine)
    parts = [psi.values(refine)]
    parts += list(grad_values(psi, refine))
    parts += list(hessian_values(psi, refine).values())
    return sum(lp_norm_values(x, cell, r) ** r for x in parts) ** (1.0 / r)


def elliptic_ratio(p: CoefficientTensor, s: float, refine: float = REFINE) -> float:
    """``||psi||_{W^2_s'} / ||p||_s^(s-1)`` for the duality solution ``psi``."""
    norm_p = lp(p, s, refine)
    if norm_p == 0.0:
        raise ValueError("pressure must be nonzero")
    psi = solve_neumann(duality_rhs(p, s, refine))
    return w2_norm(psi, _conjugate(s), refine) / norm_p ** (s - 1)


def elliptic_constant_estimate(corpus, s: float, refine: float = REFINE) -> float:
    """Largest ``elliptic_ratio`` over a corpus of mean-zero pressures."""
    corpus = list(corpus)
    if not corpus:
        raise ValueError("empty corpus")
    for p in corpus:
        if abs(p.mean()) > 1e-12 * max(p.l2_norm(), 1e-300):
            raise ValueError("corpus pressures must be mean-zero")
    return max(elliptic_ratio(p, s, refine) for p in corpus)


@dataclass
class DualityChain:
    """Measured factors of the duality chain for one (v, f, s)."""

    s: float
    norm_v_2s: float
    norm_p_s: float
    norm_f_s: float
    hessian_psi: float
    gradient_psi: float
    lhs: float
    rhs: float
    duality_residual: float
    boundary_term: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def relative_slack(self) -> float:
        return self.slack / self.rhs if self.rhs > 0 else 0.0

    @property
    def ratio(self) -> float:
        den = self.norm_v_2s**2 + self.norm_f_s
        return self.norm_p_s / den if den > 0 else 0.0


def face_pairing(v, psi: CoefficientTensor) -> tuple[float, float]:
    """``int_S v_i v_j psi_j n_i dS`` by face series evaluation, with its absolute scale."""
    v = as_velocity(v)
    d = v.domain
    grads = [differentiate(psi, a) for a in range(3)]
    total = scale = 0.0
    for a in range(3):
        h = [d.spacing[b] for b in range(3) if b != a]
        dS = h[0] * h[1]
        for side, sign in ((0, -1.0), (1, 1.0)):
            vt = np.stack([face_trace(v[i], a, side) for i in range(3)])
            gt = np.stack([face_trace(grads[j], a, side) for j in range(3)])
            vdotg = np.sum(vt * gt, axis=0)
            total += sign * float(np.sum(vt[a] * vdotg) * dS)
            scale += float(np.sum(np.sum(vt * vt, axis=0) * magnitude(gt)) * dS)
    return total, scale


def duality_chain(v, f: VectorField | None, s: float, refine: float = REFINE) -> DualityChain:
    v = as_velocity(v)
    p = pressure_from_velocity(v, f)
    cell = _cell(v.domain, refine)
    sp = _conjugate(s)
    pvals = p.values(refine)
    norm_p = lp_norm_values(pvals, cell, s)
    psi = solve_neumann(duality_rhs(p, s, refine)) if norm_p > 0 else CoefficientTensor.zeros(v.domain, ALL_EVEN)
    hess = lp_norm_values(hessian_magnitude(psi, refine), cell, sp)
    grad = lp_norm_values(magnitude(grad_values(psi, refine)), cell, sp)
    norm_v = lp(v, 2 * s, refine)
    norm_f = lp(f, s, refine) if f is not None else 0.0
    boundary, scale = face_pairing(v, psi)
    return DualityChain(
        s=s,
        norm_v_2s=norm_v,
        norm_p_s=norm_p,
        norm_f_s=norm_f,
        hessian_psi=hess,
        gradient_psi=grad,
        lhs=norm_p**s,
        rhs=norm_v**2 * hess + norm_f * grad,
        duality_residual=duality_identity_residual(p, s, refine),
        boundary_term=abs(boundary) / scale if scale > 0 else abs(boundary),
    )


def corpus_report(corpus, s_values, refine: float = REFINE) -> list[dict]:
    """Rows ``(seed, s, ||v||_2s, ||p||_s, ratio, duality_residual)`` for ``(seed, v)`` pairs."""
    rows = []
    for seed, v in corpus:
        p = pressure_from_velocity(v)
        for s in s_values:
            norm_v = lp(v, 2 * s, refine)
            norm_p = lp(p, s, refine)
            rows.append({
                "seed": seed,
                "s": s,
                "norm_v_2s": norm_v,
                "norm_p_s": norm_p,
                "ratio": norm_p / norm_v**2 if norm_v > 0 else 0.0,
                "duality_residual": duality_identity_residual(p, s, refine),
            })
    return rows


def write_corpus_csv(path, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CORPUS_COLUMNS)
        for r in rows:
            w.writerow([r["seed"], repr(float(r["s"]))] + [repr(float(r[c])) for c in CORPUS_COLUMNS[2:]])
    return path


def chain_to_dict(chain: DualityChain) -> dict:
    d = asdict(chain)
    d.update(slack=chain.slack, relative_slack=chain.relative_slack, ratio=chain.ratio)
    return {k: (float(x) if isinstance(x, (float, np.floating)) and math.isfinite(x) else x) for k, x in d.items()}
