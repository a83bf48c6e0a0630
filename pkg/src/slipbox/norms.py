"""Norm functionals, the exponent bookkeeping of the theta-energy estimate,
and pointwise/integral inequality checkers.

Spatial norms are midpoint quadratures on the collocation grid (optionally
refined by zero-padded interpolation). ``p = inf`` norms are grid maxima and
therefore lower bounds of the true supremum.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from numbers import Real

import numpy as np
from scipy import integrate

from .fields import VectorField, magnitude
from .spectral import CoefficientTensor, refined_shape

# relative slack allowed before an inequality counts as violated
SLACK_TOL = 1e-10


# -- spatial norms ----------------------------------------------------------


def pointwise_magnitude(field, refine: float = 1.0):
    """``|f|`` on the (refined) grid and the matching cell measure."""
    domain = field.domain
    shape = domain.shape if refine == 1 else refined_shape(domain.shape, refine)
    cell = domain.volume / float(np.prod(shape))
    if isinstance(field, CoefficientTensor):
        return np.abs(field.values(refine)), cell
    if isinstance(field, VectorField):
        return magnitude(field.values(refine)), cell
    raise TypeError(f"expected a scalar or vector field, got {type(field).__name__}")


def lp_norm_values(values: np.ndarray, cell_measure: float, p: float) -> float:
    if p < 1:
        raise ValueError(f"L_p norms need p >= 1, got {p}")
    a = np.abs(values)
    top = float(np.max(a)) if a.size else 0.0
    if math.isinf(p) or top == 0.0:
        return top
    if p in (1, 2):
        return float(np.sum(a**p) * cell_measure) ** (1.0 / p)
    # scale by the max so large exponents cannot overflow
    return top * float(np.sum((a / top) ** p) * cell_measure) ** (1.0 / p)


def lp_norm(field, p: float, refine: float = 1.0) -> float:
    """``(sum |f(x_j)|^p * cell)^(1/p)``; vector fields use the Euclidean ``|v|``."""
    if p < 1:
        raise ValueError(f"L_p norms need p >= 1, got {p}")
    mag, cell = pointwise_magnitude(field, refine)
    return lp_norm_values(mag, cell, p)


# -- time integrals ---------------------------------------------------------


def _series(series):
    arr = np.asarray(list(series) if not isinstance(series, np.ndarray) else series, dtype=float)
    if arr.size == 0:
        raise ValueError("empty time series")
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise ValueError("time series entries must be (t, value, ...) tuples")
    t = arr[:, 0]
    if np.any(np.diff(t) <= 0):
        raise ValueError("time series must be strictly increasing in t")
    return arr


def cumulative_trapezoid(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Running trapezoid integral starting at 0 (a single sample integrates to 0)."""
    t = np.asarray(t, dtype=float)
    if len(t) < 2:
        return np.zeros(len(t))
    return integrate.cumulative_trapezoid(np.asarray(y, dtype=float), t, initial=0.0)


def mixed_norm_accumulate(series, q: float) -> float:
    """``(int_0^T ||v(t)||^q dt)^(1/q)`` by the trapezoid rule over ``(t, ||v(t)||)``."""
    if not (1 <= q < math.inf):
        raise ValueError(f"q must lie in [1, inf), got {q}")
    arr = _series(series)
    return float(cumulative_trapezoid(arr[:, 0], arr[:, 1] ** q)[-1]) ** (1.0 / q)


def v02_norm(series) -> float:
    """``max_t ||v||_2 + (int ||grad v||_2^2 dt)^(1/2)`` from ``(t, ||v||_2, ||grad v||_2)``."""
    arr = _series(series)
    if arr.shape[1] < 3:
        raise ValueError("V02 series entries must be (t, ||v||_2, ||grad v||_2)")
    return float(np.max(arr[:, 1]) + math.sqrt(cumulative_trapezoid(arr[:, 0], arr[:, 2] ** 2)[-1]))


# -- exponents --------------------------------------------------------------


@dataclass(frozen=True)
class ExponentSet:
    """Exponents of the theta-energy estimate for a given (theta, lambda_1).

    ``alpha`` and ``beta`` place ``L_{4 lambda_1}`` and ``L_{(theta-2) lambda_2}``
    between ``L_theta`` and ``L_{3 theta}``; ``w1``/``w2`` are the resulting
    powers of those two norms; ``gamma1``/``gamma2`` are the conjugate Young
    exponents that absorb the dissipation. Values are ``Fraction`` whenever
    the inputs are rational.
    """

    theta: Real
    lambda1: Real
    lambda2: Real
    alpha: Real
    beta: Real
    w1: Real
    w2: Real
    gamma1: Real
    gamma2: Real
    gronwall_exponent: Real


def _num(x):
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    return float(x)


def admissible_lambda1_range(theta) -> tuple:
    """Closed interval of lambda_1 keeping alpha and beta in [0, 1]."""
    theta = _num(theta)
    if not theta > 3:
        raise ValueError(f"theta must exceed 3, got {theta}")
    return max(theta / 4, 3 * theta / (2 * theta + 2)), theta / 2


def exponent_set(theta, lambda1) -> ExponentSet:
    theta, lambda1 = _num(theta), _num(lambda1)
    if not theta > 3:
        raise ValueError(f"theta must exceed 3, got {theta}")
    if not lambda1 > 1:
        raise ValueError(f"lambda_1 must exceed 1, got {lambda1}")
    lambda2 = lambda1 / (lambda1 - 1)
    # endpoints of the admissible interval must survive float rounding
    slack = 0 if isinstance(theta, Fraction) and isinstance(lambda1, Fraction) else 1e-12 * theta
    if not (theta - slack <= 4 * lambda1 <= 3 * theta + slack
            and theta - slack <= (theta - 2) * lambda2 <= 3 * theta + slack):
        lo, hi = admissible_lambda1_range(theta)
        raise ValueError(
            f"(theta={theta}, lambda_1={lambda1}) is not admissible; lambda_1 must lie in [{lo}, {hi}]"
        )
    alpha = (3 * theta - 4 * lambda1) / (8 * lambda1)
    beta = (3 * theta - (theta - 2) * lambda2) / (2 * (theta - 2) * lambda2)
    half_tail = (theta - 2) / 2
    w1 = 2 * alpha + half_tail * beta
    w2 = 2 * (1 - alpha) + half_tail * (1 - beta)
    gamma1 = 2 * theta / (3 + theta)
    gamma2 = 2 * theta / (theta - 3)
    return ExponentSet(
        theta=theta, lambda1=lambda1, lambda2=lambda2, alpha=alpha, beta=beta,
        w1=w1, w2=w2, gamma1=gamma1, gamma2=gamma2,
        gronwall_exponent=theta * (theta - 1) / (theta - 3),
    )


@dataclass(frozen=True)
class SerrinPair:
    """Integrability pair with ``3/p + 2/q = 1``."""

    p: float
    q: float

    def __post_init__(self):
        p, q = float(self.p), float(self.q)
        if not (p > 3 and q > 0):
            raise ValueError(f"Serrin pairs need p > 3, got p={p}")
        lhs = 3.0 / p + (0.0 if math.isinf(q) else 2.0 / q)
        if abs(lhs - 1.0) > 1e-14:
            raise ValueError(f"3/p + 2/q = {lhs!r} != 1 for (p, q) = ({p}, {q})")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @classmethod
    def from_p(cls, p: float) -> "SerrinPair":
        p = float(p)
        return cls(p, math.inf if math.isinf(p) else 2 * p / (p - 3) if p > 3 else math.nan)


def energy_class_time_exponent(p: float) -> float:
    """Time exponent q with ``3/p + 2/q = 3/2`` for the V^0_2 imbedding."""
    if not 2 <= p <= 6:
        raise ValueError(f"the V02 imbedding needs 2 <= p <= 6, got {p}")
    gap = Fraction(3, 2) - Fraction(3) / Fraction(p).limit_denominator(10**9)
    return math.inf if gap == 0 else float(2 / gap)


def energy_class_ratio(series, p: float) -> float:
    """Empirical imbedding ratio ``||u||_{L_q L_p} / ||u||_{V02}``.

    ``series`` holds ``(t, ||u||_p, ||u||_2, ||grad u||_2)``.
    """
    q = energy_class_time_exponent(p)
    arr = _series(series)
    if arr.shape[1] < 4:
        raise ValueError("entries must be (t, ||u||_p, ||u||_2, ||grad u||_2)")
    if math.isinf(q):
        num = float(np.max(arr[:, 1]))
    else:
        num = mixed_norm_accumulate(arr[:, :2], q)
    den = v02_norm(arr[:, [0, 2, 3]])
    return num / den if den > 0 else 0.0


def parabolic_embedding_kappa(p: float, q: float, r: int, s_order: int) -> float:
    """``2 - 2r - s - 5 (1/p - 1/q)`` for the parabolic imbedding (needs q >= p)."""
    if q < p:
        raise ValueError(f"the parabolic imbedding needs q >= p, got p={p}, q={q}")
    return 2 - 2 * r - s_order - 5 * (1 / p - (0 if math.isinf(q) else 1 / q))


def serrin_kappa(p: float) -> float:
    """The specialisation used for the gradient: ``s = p``, ``1/s - 1/r = 3/(5p)``, so ``1 - 3/p``."""
    return parabolic_embedding_kappa(p, 2.5 * p, 0, 1)


# -- inequality checks ------------------------------------------------------


@dataclass
class InequalityRecord:
    """One checked inequality ``lhs <= rhs`` (JSON report row)."""

    name: str
    lhs: float
    rhs: float
    inputs: dict = field(default_factory=dict)
    tol: float = SLACK_TOL

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.slack >= -self.tol * max(abs(self.rhs), abs(self.lhs))

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("tol")
        d["slack"] = self.slack
        d["pass"] = self.passed
        return d


def young_bound(a, b, kappa, lambda1):
    """``(ab, kappa a^l1 + (kappa l1)^(-l2/l1) b^l2 / l2)``; vectorised over numpy inputs."""
    a, b, kappa, lambda1 = (np.asarray(x, dtype=float) for x in (a, b, kappa, lambda1))
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("Young's inequality needs a, b >= 0")
    if np.any(kappa <= 0):
        raise ValueError("kappa must be positive")
    if np.any(lambda1 <= 1) or np.any(~np.isfinite(lambda1)):
        raise ValueError("lambda_1 must lie in (1, inf)")
    lambda2 = lambda1 / (lambda1 - 1)
    rhs = kappa * a**lambda1 + (kappa * lambda1) ** (-lambda2 / lambda1) * b**lambda2 / lambda2
    lhs = a * b
    if lhs.ndim == 0:
        return float(lhs), float(rhs)
    return lhs, rhs


def holder_values(f: np.ndarray, g: np.ndarray, cell: float, r1: float):
    """``(int |fg|, ||f||_r1 ||g||_r2)`` for grid values and conjugate ``r2``."""
    r2 = math.inf if r1 == 1 else (1.0 if math.isinf(r1) else r1 / (r1 - 1))
    lhs = float(np.sum(np.abs(f * g)) * cell)
    return lhs, lp_norm_values(f, cell, r1) * lp_norm_values(g, cell, r2)


def interpolation_sides(v, E: ExponentSet, refine: float = 1.0):
    """Both sides of ``||v||_{4l1}^2 ||v||_{(th-2)l2}^{(th-2)/2} <= ||v||_th^w1 ||v||_{3th}^w2``."""
    mag, cell = pointwise_magnitude(v, refine)
    th, l1, l2 = float(E.theta), float(E.lambda1), float(E.lambda2)
    lhs = lp_norm_values(mag, cell, 4 * l1) ** 2 * lp_norm_values(mag, cell, (th - 2) * l2) ** ((th - 2) / 2)
    rhs = lp_norm_values(mag, cell, th) ** float(E.w1) * lp_norm_values(mag, cell, 3 * th) ** float(E.w2)
    return lhs, rhs


def check_interpolation(v, E: ExponentSet, refine: float = 1.0) -> float:
    """``rhs - lhs`` of the interpolation inequality; raises on a violation."""
    lhs, rhs = interpolation_sides(v, E, refine)
    slack = rhs - lhs
    if slack < -SLACK_TOL * rhs:
        raise ArithmeticError(f"interpolation inequality violated: lhs={lhs!r} rhs={rhs!r}")
    return slack
