"""Per-snapshot measurements for the theta-energy / Gronwall argument.

All quadratures use the grid refined by ``REFINE`` per axis. For a snapshot
``v`` with pressure ``p`` the monitor records

* ``int |v|^theta`` and the two dissipation integrals
  ``D1 = int |grad |v|^(theta/2)|^2`` and ``D2 = int |grad v|^2 |v|^(theta-2)``;
* the rate ``(1/theta) d/dt int |v|^theta`` assembled from the viscous,
  pressure and convective contributions evaluated on the semi-discrete
  right-hand side;
* pressure ratios, Serrin accumulators and residual audits.

Expressions containing negative powers of ``|v|`` are set to zero where
``|v|`` falls below ``threshold * max|v|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import spectral
from .fields import (
    MAGNITUDE_THRESHOLD,
    VelocityField,
    as_velocity,
    boundary_residuals,
    convective_array,
    divergence_array,
    leray_array,
    magnitude,
    velocity_gradient_array,
    velocity_values_array,
)
from .norms import (
    SLACK_TOL,
    ExponentSet,
    SerrinPair,
    cumulative_trapezoid,
    lp_norm_values,
    young_bound,
)
from .pressure import REFINE, duality_identity_residual, pressure_from_velocity
from .spectral import ALL_EVEN, CoefficientTensor, refined_shape


def tag(x: float) -> str:
    return f"{float(x):g}"


def pair_tag(pair: SerrinPair) -> str:
    return f"p{tag(pair.p)}_q{tag(pair.q)}"


class Pointwise:
    """Refined-grid samples of ``v``, ``grad v`` and ``|v|`` for one snapshot."""

    def __init__(self, v, refine: float = REFINE, threshold: float = MAGNITUDE_THRESHOLD):
        v = as_velocity(v)
        self.v = v
        self.domain = v.domain
        self.refine = refine
        self.shape = refined_shape(v.domain.shape, refine)
        self.cell = v.domain.volume / float(np.prod(self.shape))
        stack = v.stack()
        self.stack = stack
        self.vals = velocity_values_array(v.domain, stack, self.shape)
        self.grad = velocity_gradient_array(v.domain, stack, self.shape)
        self.mag = magnitude(self.vals)
        top = float(np.max(self.mag))
        self.zero = self.mag < threshold * top if top > 0 else np.ones_like(self.mag, dtype=bool)
        self.grad_sq = np.sum(self.grad**2, axis=(0, 1))
        # s_j = sum_i v_i d_j v_i, so grad |v|^2 = 2 s
        self.s = np.einsum("i...,ij...->j...", self.vals, self.grad)

    def integral(self, values) -> float:
        return float(np.sum(values) * self.cell)

    def power(self, exponent: float) -> np.ndarray:
        """``|v|^exponent`` with the singular set mapped to 0."""
        safe = np.where(self.zero, 1.0, self.mag)
        return np.where(self.zero, 0.0, safe**exponent)

    def lp(self, p: float) -> float:
        return lp_norm_values(self.mag, self.cell, p)

    def scalar(self, coeffs: np.ndarray, parity) -> np.ndarray:
        return spectral.inverse_array(coeffs, parity, self.shape)

    def vector(self, stack: np.ndarray) -> np.ndarray:
        return velocity_values_array(self.domain, stack, self.shape)


def theta_energy(v, theta: float, refine: float = REFINE) -> float:
    """``int |v|^theta`` on the refined grid."""
    pw = v if isinstance(v, Pointwise) else Pointwise(v, refine)
    return pw.integral(pw.mag**theta)


def dissipation_terms(v, theta: float, threshold: float = MAGNITUDE_THRESHOLD,
                      refine: float = REFINE) -> tuple[float, float]:
    """``(D1, D2)`` with ``grad |v|^(theta/2) = (theta/2) |v|^(theta/2 - 2) sum_i v_i grad v_i``."""
    pw = v if isinstance(v, Pointwise) else Pointwise(v, refine, threshold)
    d1 = (theta**2 / 4.0) * pw.integral(pw.power(theta - 4) * np.sum(pw.s**2, axis=0))
    d2 = pw.integral(pw.grad_sq * pw.power(theta - 2))
    return d1, d2


def theta_inequality_rhs(v, theta: float, c_emp: float, refine: float = REFINE) -> float:
    """``c_emp * ||v||_theta^(theta (theta-1)/(theta-3))``."""
    if not theta > 3:
        raise ValueError(f"theta must exceed 3, got {theta}")
    pw = v if isinstance(v, Pointwise) else Pointwise(v, refine)
    return c_emp * pw.lp(theta) ** (theta * (theta - 1) / (theta - 3))


@dataclass
class RateTerms:
    """Contributions to ``(1/theta) d/dt int |v|^theta`` from the semi-discrete right-hand side."""

    viscous: float
    pressure: float
    convective: float

    @property
    def total(self) -> float:
        return self.viscous + self.pressure + self.convective


class Dynamics:
    """Right-hand-side pieces of the momentum equation for one snapshot (f = 0)."""

    def __init__(self, pw: Pointwise, nu: float):
        d = pw.domain
        self.nonlinear = convective_array(d, pw.stack)
        if not np.all(np.isfinite(self.nonlinear)):
            raise FloatingPointError("non-finite nonlinear term")
        # grad p = -(I - P) N and -lap p = div N
        self.grad_p = leray_array(d, self.nonlinear) - self.nonlinear
        rhs = divergence_array(d, self.nonlinear)
        k2 = d.laplacian_symbol()
        self.p = CoefficientTensor(
            d, ALL_EVEN, np.divide(rhs, k2, out=np.zeros_like(rhs), where=k2 > 0)
        )
        self.lap_v = -k2 * pw.stack
        self.nu = nu
        self.pw = pw
        self._grid = {}

    def grid(self, name):
        if name not in self._grid:
            pw = self.pw
            src = {"lap_v": self.lap_v, "grad_p": self.grad_p, "nonlinear": self.nonlinear}[name]
            self._grid[name] = pw.vector(src)
        return self._grid[name]

    def p_values(self):
        if "p" not in self._grid:
            self._grid["p"] = self.pw.scalar(self.p.coeffs, ALL_EVEN)
        return self._grid["p"]

    def rate(self, theta: float) -> RateTerms:
        pw = self.pw
        w = pw.power(theta - 2)

        def pair(name):
            return pw.integral(w * np.sum(pw.vals * self.grid(name), axis=0))

        return RateTerms(
            viscous=self.nu * pair("lap_v"),
            pressure=-pair("grad_p"),
            convective=-pair("nonlinear"),
        )


def assembled_rate(v, theta: float, nu: float, refine: float = REFINE,
                   threshold: float = MAGNITUDE_THRESHOLD) -> RateTerms:
    return Dynamics(Pointwise(v, refine, threshold), nu).rate(theta)


# -- chain audit -------------------------------------------------------------


@dataclass
class ChainLink:
    """One link ``lhs <= rhs`` of the estimate chain.

    ``kind`` is ``"inequality"`` (pass/fail), ``"identity"`` (reported as a
    relative residual) or ``"empirical"`` (uses an estimated constant;
    margin only).
    """

    name: str
    lhs: float
    rhs: float
    kind: str = "inequality"
    tol: float = SLACK_TOL

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self):
        if self.kind != "inequality":
            return None
        return self.slack >= -self.tol * max(abs(self.lhs), abs(self.rhs))

    @property
    def margin(self) -> float:
        scale = max(abs(self.lhs), abs(self.rhs))
        return self.slack / scale if scale > 0 else 0.0

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "lhs": self.lhs, "rhs": self.rhs,
                "slack": self.slack, "margin": self.margin, "pass": self.passed}


def chain_audit(v, p: CoefficientTensor | None, theta: float, E: ExponentSet,
                constants: dict | None = None, kappa: float | None = None, nu: float = 1.0,
                refine: float = REFINE, threshold: float = MAGNITUDE_THRESHOLD) -> list[ChainLink]:
    """Check each link of the pressure-term estimate for one snapshot.

    ``constants`` may carry ``pressure`` (``||p||_2l1 <= c ||v||_4l1^2``) and
    ``sobolev`` (``||v||_3th^th <= c D1``); both default to 1 and only enter
    the empirical links and the Young step, whose inequality holds for any
    positive constant.
    """
    constants = constants or {}
    c_p = float(constants.get("pressure", 1.0))
    c_sob = float(constants.get("sobolev", 1.0))
    if kappa is None:
        kappa = nu * theta / 2
    v = as_velocity(v)
    if p is None:
        p = pressure_from_velocity(v)
    pw = Pointwise(v, refine, threshold)
    th = float(theta)
    l1, l2 = float(E.lambda1), float(E.lambda2)
    pv = p.values(refine)
    grad_p = np.stack([spectral.differentiate(p, a).values(refine) for a in range(3)])
    w = pw.power(th - 2)
    grad_abs = np.sqrt(pw.grad_sq)
    d1, d2 = dissipation_terms(pw, th)

    direct = -pw.integral(w * np.sum(grad_p * pw.vals, axis=0))
    # (th/2 - 1) p |v|^(th-4) v . grad|v|^2 with grad|v|^2 = 2 s
    ibp = (th / 2 - 1) * pw.integral(pv * pw.power(th - 4) * 2 * np.sum(pw.vals * pw.s, axis=0))
    pointwise = (th - 2) * pw.integral(np.abs(pv) * w * grad_abs)
    p2w = pw.integral(pv**2 * w)
    cauchy = (th - 2) * math.sqrt(p2w) * math.sqrt(d2)
    norm_p_2l1 = lp_norm_values(pv, pw.cell, 2 * l1)
    holder = math.sqrt(norm_p_2l1**2 * pw.lp((th - 2) * l2) ** (th - 2))
    interp_lhs = pw.lp(4 * l1) ** 2 * pw.lp((th - 2) * l2) ** ((th - 2) / 2)
    interp_rhs = pw.lp(th) ** float(E.w1) * pw.lp(3 * th) ** float(E.w2)

    a = d2 ** (1.5 / th + 0.5)
    b = th * (th - 2) * c_p * c_sob ** (1.5 / th) * (th**2 / 4) ** (1.5 / th) * pw.lp(th) ** float(E.w1)
    young_lhs, _ = young_bound(a, b, kappa, float(E.gamma1))
    g1, g2 = float(E.gamma1), float(E.gamma2)
    young_rhs = kappa * a**g1 + (kappa * g1) ** (-g2 / g1) * b**g2 / g2

    return [
        ChainLink("pressure_ibp", direct, ibp, kind="identity"),
        ChainLink("pressure_pointwise", ibp, pointwise),
        ChainLink("cauchy", pointwise, cauchy),
        ChainLink("holder", math.sqrt(p2w), holder),
        ChainLink("pressure_estimate", norm_p_2l1, c_p * pw.lp(4 * l1) ** 2, kind="empirical"),
        ChainLink("interpolation", interp_lhs, interp_rhs),
        ChainLink("sobolev", pw.lp(3 * th) ** th, c_sob * d1, kind="empirical"),
        ChainLink("gradient_modulus", d1, th**2 / 4 * d2),
        ChainLink("young", young_lhs, young_rhs),
    ]


# -- Gronwall / Serrin -----------------------------------------------------


def gronwall_envelope(series, p: float, q: float, c_emp: float, rtol: float = 1e-12):
    """Envelope ``exp(c int_0^t ||v||_p^q) ||v(0)||_p^p`` at each sample.

    ``series`` holds ``(t, ||v(t)||_p)``. Returns ``(envelope, measured, ok)``
    where ``measured = ||v(t)||_p^p`` and ``ok`` says the envelope dominates
    at every sample.
    """
    SerrinPair(p, q)
    arr = np.asarray(list(series), dtype=float)
    if arr.size == 0:
        raise ValueError("empty series")
    t, norms = arr[:, 0], arr[:, 1]
    if np.any(np.diff(t) <= 0):
        raise ValueError("time series must be strictly increasing in t")
    acc = cumulative_trapezoid(t, norms**q)
    envelope = np.exp(c_emp * acc) * norms[0] ** p
    measured = norms**p
    ok = bool(np.all(measured <= envelope * (1 + rtol)))
    return envelope, measured, ok


def gronwall_rate_ratio(theta_energy_rate: float, d1: float, d2: float, norm_theta: float,
                        theta: float, nu: float) -> float:
    """``(d/dt int|v|^th + nu D1 + nu D2)_+ / ||v||_th^(th(th-1)/(th-3))`` at one instant."""
    lhs = theta_energy_rate + nu * d1 + nu * d2
    den = norm_theta ** (theta * (theta - 1) / (theta - 3))
    return max(lhs, 0.0) / den if den > 0 else 0.0


def spacetime_53p_norm(trajectory, p: float, refine: float = REFINE) -> float:
    """``(int_0^T int |v|^(5p/3) dx dt)^(3/(5p))`` by the trapezoid rule in time.

    ``trajectory`` is a sequence of ``(t, v)`` or ``(t, int |v|^(5p/3))`` pairs.
    """
    items = list(trajectory)
    if not items:
        raise ValueError("empty trajectory")
    r = 5.0 * p / 3.0
    t = np.array([float(x[0]) for x in items])
    vals = np.array([
        float(x[1]) if np.isscalar(x[1]) else theta_energy(x[1], r, refine) for x in items
    ])
    if len(t) > 1 and np.any(np.diff(t) <= 0):
        raise ValueError("trajectory must be strictly increasing in t")
    return float(cumulative_trapezoid(t, vals)[-1]) ** (1.0 / r)


def spacetime_bound(c_emp: float, serrin_accumulator: float, norm_v0_p: float,
                c_embed: float = 1.0) -> float:
    """``c_embed [c exp(c A) A + 1] ||v(0)||_p`` with ``A = ||v||_{L_q L_p}^q``."""
    A = serrin_accumulator
    return c_embed * (c_emp * math.exp(c_emp * A) * A + 1.0) * norm_v0_p


# -- records -----------------------------------------------------------------


@dataclass
class ThetaTerms:
    energy: float
    d1: float
    d2: float
    norm_3theta: float
    norm_theta: float
    rate: float


@dataclass
class CriteriaRecord:
    t: float
    step: int
    energy: float
    theta: dict
    pressure: dict
    serrin_norm: dict
    serrin_acc: dict
    spacetime: dict
    div_residual: float
    bc_residual: float
    grad_l2: float = 0.0
    energy_class_norm: float = 0.0
    envelope: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)


ENERGY_CLASS_P = 10.0 / 3.0


class Monitor:
    """Turns snapshots into CriteriaRecords and keeps the time accumulators."""

    def __init__(self, nu: float, thetas=(4.0,), s_values=(2.0,), serrin_pairs=(),
                 threshold: float = MAGNITUDE_THRESHOLD, refine: float = REFINE):
        self.nu = nu
        self.pairs = tuple(p if isinstance(p, SerrinPair) else SerrinPair(*p) for p in serrin_pairs)
        self.thetas = tuple(sorted(set(float(t) for t in thetas) | {pr.p for pr in self.pairs}))
        self.s_values = tuple(float(s) for s in s_values)
        self.threshold = threshold
        self.refine = refine
        self._last = None

    def observe(self, t: float, step: int, v: VelocityField) -> CriteriaRecord:
        # states near blow-up may overflow; record inf and let the integrator stop the run
        with np.errstate(over="ignore", invalid="ignore"):
            return self._observe(t, step, v)

    def _observe(self, t, step, v) -> CriteriaRecord:
        pw = Pointwise(v, self.refine, self.threshold)
        dyn = Dynamics(pw, self.nu)
        theta = {}
        for th in self.thetas:
            d1, d2 = dissipation_terms(pw, th)
            theta[th] = ThetaTerms(
                energy=theta_energy(pw, th), d1=d1, d2=d2,
                norm_3theta=pw.lp(3 * th), norm_theta=pw.lp(th),
                rate=dyn.rate(th).total,
            )
        pvals = dyn.p_values()
        pressure = {}
        for s in self.s_values:
            den = pw.lp(2 * s) ** 2
            ratio = lp_norm_values(pvals, pw.cell, s) / den if den > 0 else 0.0
            pressure[s] = (ratio, duality_identity_residual(dyn.p, s, self.refine))
        serrin_norm = {pr: np.float64(pw.lp(pr.p)) for pr in self.pairs}
        spacetime_int = {pr: pw.integral(pw.mag ** (5 * pr.p / 3)) for pr in self.pairs}
        if self._last is None:
            acc = {pr: 0.0 for pr in self.pairs}
            st = {pr: 0.0 for pr in self.pairs}
        else:
            prev = self._last
            dt = t - prev.t
            acc = {pr: prev.serrin_acc[pr] + 0.5 * dt * (prev.serrin_norm[pr] ** pr.q + serrin_norm[pr] ** pr.q)
                   for pr in self.pairs}
            st = {pr: prev.spacetime[pr] + 0.5 * dt * (self._last_st[pr] + spacetime_int[pr])
                  for pr in self.pairs}
        self._last_st = spacetime_int

        div = spectral.inverse_array(divergence_array(v.domain, pw.stack), ALL_EVEN)
        grad_scale = float(np.sqrt(np.max(pw.grad_sq))) or 1.0
        bc = boundary_residuals(v)
        rec = CriteriaRecord(
            t=t, step=step, energy=0.5 * as_velocity(v).inner(v), theta=theta,
            pressure=pressure, serrin_norm=serrin_norm, serrin_acc=acc, spacetime=st,
            div_residual=float(np.max(np.abs(div))) / grad_scale,
            bc_residual=max(bc.normal_velocity / (float(np.max(pw.mag)) or 1.0),
                            bc.tangential_vorticity / grad_scale,
                            bc.tangential_stress / grad_scale),
            grad_l2=math.sqrt(pw.integral(pw.grad_sq)),
            energy_class_norm=pw.lp(ENERGY_CLASS_P),
        )
        self._last = rec
        return rec


def estimate_gronwall_constant(records, pair: SerrinPair, nu: float) -> float:
    """Largest instantaneous ratio of the theta = p energy inequality over ``records``."""
    th = pair.p
    best = 0.0
    for r in records:
        terms = r.theta[th]
        best = max(best, gronwall_rate_ratio(th * terms.rate, terms.d1, terms.d2,
                                             terms.norm_theta, th, nu))
    return best


ENERGY_TOL = 1e-10
DIV_TOL = 1e-11
BC_TOL = 1e-10


def finalize(records, constants: dict, pairs) -> list[CriteriaRecord]:
    """Fill envelopes and audit flags; ``constants['gronwall'][pair_tag]`` is required."""
    records = list(records)
    if not records:
        return records
    out = [replace(r, envelope={}, flags={}) for r in records]
    for pr in pairs:
        c = constants["gronwall"][pair_tag(pr)]
        series = [(r.t, r.serrin_norm[pr]) for r in records]
        if len(series) == 1:
            env, meas = np.array([series[0][1] ** pr.p]), np.array([series[0][1] ** pr.p])
        else:
            env, meas, _ = gronwall_envelope(series, pr.p, pr.q, c)
        for r, e, m in zip(out, env, meas):
            r.envelope[pr] = float(e)
            r.flags[f"envelope_ok_{pair_tag(pr)}"] = bool(m <= e * (1 + 1e-12))
    prev = None
    for r in out:
        r.flags = {
            "energy_ok": prev is None or r.energy <= prev.energy * (1 + ENERGY_TOL),
            "div_ok": r.div_residual < DIV_TOL,
            "bc_ok": r.bc_residual < BC_TOL,
            **r.flags,
        }
        prev = r
    return out


def csv_columns(thetas, s_values, pairs) -> list[str]:
    cols = ["t", "E"]
    for th in thetas:
        k = tag(th)
        cols += [f"theta_energy_{k}", f"D1_{k}", f"D2_{k}", f"L3theta_{k}", f"rate_{k}"]
    for s in s_values:
        cols += [f"pressure_ratio_{tag(s)}", f"duality_residual_{tag(s)}"]
    cols += [f"serrin_acc_{pair_tag(pr)}" for pr in pairs]
    cols += [f"envelope_{pair_tag(pr)}" for pr in pairs]
    cols += ["div_residual", "bc_residual", "energy_ok", "div_ok", "bc_ok"]
    cols += [f"envelope_ok_{pair_tag(pr)}" for pr in pairs]
    return cols


def record_row(r: CriteriaRecord, thetas, s_values, pairs) -> list:
    row = [r.t, r.energy]
    for th in thetas:
        x = r.theta[th]
        row += [x.energy, x.d1, x.d2, x.norm_3theta, x.rate]
    for s in s_values:
        row += list(r.pressure[s])
    row += [r.serrin_acc[pr] for pr in pairs]
    row += [r.envelope.get(pr, math.nan) for pr in pairs]
    row += [r.div_residual, r.bc_residual]
    row += [int(r.flags.get(k, False)) for k in ("energy_ok", "div_ok", "bc_ok")]
    row += [int(r.flags.get(f"envelope_ok_{pair_tag(pr)}", False)) for pr in pairs]
    return row
