"""Verification suites shared by the CLI and the acceptance tests.

Each suite returns plain records (``InequalityRecord`` or dicts) so the
caller decides how to report them.
"""

from __future__ import annotations

import hashlib
import json
from fractions import Fraction

import numpy as np

from . import monitor as mon
from .domain import BoxDomain
from .evolve import initial_condition
from .norms import (
    InequalityRecord,
    SerrinPair,
    admissible_lambda1_range,
    exponent_set,
    holder_values,
    interpolation_sides,
    young_bound,
)
from .poisson import neumann_residual, solve_neumann
from .pressure import REFINE, duality_chain, elliptic_constant_estimate, lp, pressure_from_velocity
from .reflect import commutation_check
from .spectral import ALL_EVEN, CoefficientTensor, Parity, forward


def random_corpus(domain: BoxDomain, seeds, kmax: int = 4, gamma: float = 2.0):
    """``[(seed, v)]`` of unit-rms random divergence-free fields."""
    return [
        (int(s), initial_condition("random_bandlimited", {"kmax": kmax, "gamma": gamma}, domain, seed=int(s)))
        for s in seeds
    ]


def random_tensor(domain: BoxDomain, parity, rng, kmax=None) -> CoefficientTensor:
    parity = Parity(parity)
    c = rng.standard_normal(domain.shape)
    if kmax is not None:
        keep = np.zeros(domain.shape, dtype=bool)
        keep[: kmax + 1, : kmax + 1, : kmax + 1] = True
        c = c * keep
    for axis, bit in enumerate(parity):
        if bit:
            idx = [slice(None)] * 3
            idx[axis] = 0
            c[tuple(idx)] = 0.0
    return CoefficientTensor(domain, parity, c)


def random_mean_zero(domain: BoxDomain, rng, kmax=None) -> CoefficientTensor:
    g = random_tensor(domain, ALL_EVEN, rng, kmax)
    c = g.coeffs.copy()
    c[0, 0, 0] = 0.0
    return CoefficientTensor(domain, ALL_EVEN, c)


# -- scalar inequality fuzzers ----------------------------------------------


def young_fuzz(n: int = 100_000, seed: int = 0) -> InequalityRecord:
    """Worst sample of Young's inequality with a small parameter over ``n`` draws."""
    rng = np.random.default_rng(seed)
    # ranges keep every term finite in float64 (b^l2 <= 1e2^11)
    a = 10.0 ** rng.uniform(-2, 2, n)
    b = 10.0 ** rng.uniform(-2, 2, n)
    kappa = 10.0 ** rng.uniform(-2, 2, n)
    lam = 1.0 + 10.0 ** rng.uniform(-1, 1, n)
    # equality case b = kappa l1 a^(l1 - 1)
    a[:4] = 1.0
    b[:4] = 1.0
    kappa[:4] = 0.5
    lam[:4] = 2.0
    lhs, rhs = young_bound(a, b, kappa, lam)
    if not (np.all(np.isfinite(lhs)) and np.all(np.isfinite(rhs))):
        raise FloatingPointError("Young fuzz produced non-finite values")
    rel = (rhs - lhs) / np.maximum(rhs, lhs)
    i = int(np.argmin(rel))
    violations = int(np.sum(rel < -1e-10))
    return InequalityRecord(
        "young", float(lhs[i]), float(rhs[i]),
        {"a": float(a[i]), "b": float(b[i]), "kappa": float(kappa[i]), "lambda1": float(lam[i]),
         "samples": n, "violations": violations},
    )


def holder_fuzz(domain: BoxDomain, n: int = 200, seed: int = 0) -> InequalityRecord:
    """Worst relative slack of ``int|fg| <= ||f||_r1 ||g||_r2`` over random fields and exponents."""
    rng = np.random.default_rng(seed)
    worst, violations = None, 0
    for _ in range(n):
        f = random_tensor(domain, Parity(rng.integers(0, 2, 3)), rng, kmax=6).values()
        g = random_tensor(domain, Parity(rng.integers(0, 2, 3)), rng, kmax=6).values()
        r1 = 1.0 + 10.0 ** rng.uniform(-2, 1.5)
        lhs, rhs = holder_values(f, g, domain.cell_measure, r1)
        rec = InequalityRecord("holder", lhs, rhs, {"r1": r1})
        violations += not rec.passed
        if worst is None or rec.slack / rec.rhs < worst.slack / worst.rhs:
            worst = rec
    worst.inputs.update(samples=n, violations=violations)
    return worst


def exponent_algebra(n: int = 10_000, seed: int = 0) -> dict:
    """Float and exact-rational checks of the exponent identities over random admissible pairs."""
    rng = np.random.default_rng(seed)
    max_w1 = max_w2 = max_g = 0.0
    exact_ok = True
    for _ in range(n):
        theta = float(rng.uniform(3.0, 30.0))
        if theta <= 3.0:
            continue
        lo, hi = admissible_lambda1_range(theta)
        lam = float(rng.uniform(lo, hi))
        try:
            E = exponent_set(theta, lam)
        except ValueError:
            continue
        max_w1 = max(max_w1, abs(E.w1 - (theta / 2 - 0.5)))
        max_w2 = max(max_w2, abs(E.w2 - 1.5))
        max_g = max(max_g, abs(E.gamma1 * (3 / (2 * theta) + 0.5) - 1))
        # same pair in exact arithmetic
        tq = Fraction(theta).limit_denominator(10**6)
        loq, hiq = admissible_lambda1_range(tq)
        lq = min(max(Fraction(lam).limit_denominator(10**6), loq), hiq)
        if lq <= 1:
            continue
        Eq = exponent_set(tq, lq)
        exact_ok &= (
            Eq.w1 == tq / 2 - Fraction(1, 2)
            and Eq.w2 == Fraction(3, 2)
            and Eq.gamma1 * (Fraction(3) / (2 * tq) + Fraction(1, 2)) == 1
            and Eq.gamma2 == Eq.gamma1 / (Eq.gamma1 - 1)
            and Eq.w1 * Eq.gamma2 == Eq.gronwall_exponent
        )
    return {"samples": n, "max_w1_error": max_w1, "max_w2_error": max_w2,
            "max_gamma1_error": max_g, "exact_rational_ok": bool(exact_ok)}


# -- field suites -------------------------------------------------------------


def default_lambda1(theta: float) -> float:
    """``3 theta / 8`` (interpolation weight alpha = 1/2); always admissible."""
    return 3.0 * theta / 8.0


def interpolation_suite(corpus, thetas=(4.0, 5.0, 6.0), lambdas_per_theta: int = 3,
                        refine: float = 1.0) -> list[InequalityRecord]:
    out = []
    for th in thetas:
        lo, hi = admissible_lambda1_range(th)
        for lam in np.linspace(lo, hi, lambdas_per_theta):
            E = exponent_set(float(th), float(lam))
            worst, bad = None, 0
            for seed, v in corpus:
                lhs, rhs = interpolation_sides(v, E, refine)
                rec = InequalityRecord("interpolation", lhs, rhs, {"theta": th, "lambda1": float(lam), "seed": seed})
                bad += not rec.passed
                if worst is None or rec.slack / rec.rhs < worst.slack / worst.rhs:
                    worst = rec
            worst.inputs.update(fields=len(corpus), violations=bad)
            out.append(worst)
    return out


def duality_suite(corpus, s_values=(2.0, 3.0, 4.0), refine: float = REFINE) -> list[dict]:
    rows = []
    for seed, v in corpus:
        for s in s_values:
            ch = duality_chain(v, None, s, refine)
            rows.append({"seed": seed, "s": s, "chain": ch})
    return rows


def poisson_suite(domain: BoxDomain, n_pairs: int = 50, seed: int = 0) -> dict:
    """Eigenfunction errors and the self-adjointness residual of the Neumann solve."""
    a, b, c = domain.extents
    X, Y, Z = domain.mesh()
    cases = {
        "cos_x": (np.cos(np.pi * X / a) + 0 * Y + 0 * Z, (np.pi / a) ** 2),
        "cos_x_cos2y": (np.cos(np.pi * X / a) * np.cos(2 * np.pi * Y / b) + 0 * Z,
                        (np.pi / a) ** 2 + (2 * np.pi / b) ** 2),
        "cos3z_cos_y": (np.cos(3 * np.pi * Z / c) * np.cos(np.pi * Y / b) + 0 * X,
                        (3 * np.pi / c) ** 2 + (np.pi / b) ** 2),
    }
    eig = {}
    for name, (g_vals, lam) in cases.items():
        g = forward(domain, g_vals, ALL_EVEN)
        psi = solve_neumann(g)
        err = np.max(np.abs(psi.values() - g_vals / lam)) / np.max(np.abs(g_vals / lam))
        eig[name] = {"relative_error": float(err), "residual": neumann_residual(psi, g)}
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_pairs):
        g = random_mean_zero(domain, rng)
        h = random_mean_zero(domain, rng)
        lhs = solve_neumann(g).inner(h)
        rhs = g.inner(solve_neumann(h))
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300))
    return {"eigenfunctions": eig, "self_adjoint_pairs": n_pairs, "self_adjoint_residual": worst}


def reflect_suite(domain: BoxDomain, n_fields: int = 50, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    per_axis = {0: 0.0, 1: 0.0, 2: 0.0}
    corner = 0.0
    for _ in range(n_fields):
        s = random_tensor(domain, Parity(rng.integers(0, 2, 3)), rng)
        for a in range(3):
            per_axis[a] = max(per_axis[a], commutation_check(s, a))
        corner = max(corner, commutation_check(s, (2, 0)))
    probe = random_tensor(domain, ALL_EVEN, rng)
    control = commutation_check(probe, 0, parity=probe.parity.flip(0))
    return {"fields": n_fields, "max_residual_axis": {str(a): r for a, r in per_axis.items()},
            "max_residual_corner": corner, "wrong_parity_control": control}


# -- empirical constants -----------------------------------------------------


def estimate_constants(domain: BoxDomain, corpus, thetas, s_values, pairs, nu: float,
                       records=(), refine: float = REFINE) -> dict:
    """Corpus maxima of the constants the chain leaves unspecified.

    * ``pressure[s]``: ``||p||_s / ||v||_2s^2``
    * ``pressure_lambda[theta]``: same with ``s = 2 lambda_1`` (default lambda_1)
    * ``sobolev[theta]``: ``||v||_3th^th / D1``
    * ``elliptic[s]``: ``||psi||_{W^2_s'} / ||p||_s^(s-1)``
    * ``gronwall[p,q]``: largest instantaneous ratio of the theta = p energy
      inequality over the corpus snapshots and the given records
    """
    pairs = [p if isinstance(p, SerrinPair) else SerrinPair(*p) for p in pairs]
    all_thetas = sorted(set(float(t) for t in thetas) | {p.p for p in pairs})
    out = {"pressure": {}, "pressure_lambda": {}, "sobolev": {}, "elliptic": {}, "gronwall": {}}
    pressures = [(v, pressure_from_velocity(v)) for _, v in corpus]
    for s in s_values:
        out["pressure"][mon.tag(s)] = max(lp(p, s, refine) / lp(v, 2 * s, refine) ** 2 for v, p in pressures)
        out["elliptic"][mon.tag(s)] = elliptic_constant_estimate([p for _, p in pressures], s, refine)
    snapshot_records = []
    for _, v in corpus:
        m = mon.Monitor(nu, all_thetas, (), pairs, refine=refine)
        snapshot_records.append(m.observe(0.0, 0, v))
    for th in all_thetas:
        l1 = default_lambda1(th)
        out["pressure_lambda"][mon.tag(th)] = max(
            lp(p, 2 * l1, refine) / lp(v, 4 * l1, refine) ** 2 for v, p in pressures)
        out["sobolev"][mon.tag(th)] = max(
            r.theta[th].norm_3theta ** th / r.theta[th].d1 for r in snapshot_records if r.theta[th].d1 > 0)
    for pr in pairs:
        out["gronwall"][mon.pair_tag(pr)] = mon.estimate_gronwall_constant(
            list(snapshot_records) + list(records), pr, nu)
    out["corpus_seeds"] = [s for s, _ in corpus]
    out["resolution"] = list(domain.resolution)
    out["extents"] = list(domain.extents)
    out["id"] = hashlib.sha256(json.dumps(out, sort_keys=True).encode()).hexdigest()[:12]
    return out


def chain_audit_suite(corpus, thetas, constants: dict | None, nu: float, refine: float = REFINE):
    rows = []
    for seed, v in corpus:
        for th in thetas:
            E = exponent_set(float(th), default_lambda1(th))
            c = {}
            if constants:
                c = {"pressure": constants["pressure_lambda"].get(mon.tag(th), 1.0),
                     "sobolev": constants["sobolev"].get(mon.tag(th), 1.0)}
            links = mon.chain_audit(v, None, th, E, c, nu=nu, refine=refine)
            rows.append({"seed": seed, "theta": th, "links": links})
    return rows


__all__ = [
    "chain_audit_suite", "default_lambda1", "duality_suite",
    "estimate_constants", "exponent_algebra", "holder_fuzz", "interpolation_suite",
    "poisson_suite", "random_corpus", "random_mean_zero", "random_tensor", "reflect_suite",
    "young_fuzz",
]
