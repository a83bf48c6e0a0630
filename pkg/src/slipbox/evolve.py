"""Time integration of the incompressible Navier-Stokes equations on the box.

The pressure is eliminated by the Leray projection, so the semi-discrete
system in coefficient space is

    dv/dt = -nu |k|^2 v - P[(v.grad)v]

The viscous part is integrated exactly with the factor ``exp(-nu |k|^2 t)``
and the projected nonlinear part with the explicit midpoint rule (a
half-step predictor followed by a full step using the midpoint slope):

    v*      = E(dt/2) (v + dt/2 N(v))
    v_new   = E(dt) v + dt E(dt/2) N(v*)

which is second order and needs no linear solves.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .domain import BoxDomain
from .fields import (
    CANONICAL,
    VelocityField,
    convective_array,
    leray_array,
    velocity_values_array,
    magnitude,
)
from .monitor import Monitor
from .norms import SerrinPair
from .snapshot import save_snapshot

log = logging.getLogger(__name__)

CFL = 1.0
IC_IDS = ("taylor_green", "single_mode", "random_bandlimited")


class InstabilityError(RuntimeError):
    """The state became non-finite; ``last_valid`` is the state before the failing step."""

    def __init__(self, message, step=None, t=None, last_valid=None, dump=None):
        super().__init__(message)
        self.step = step
        self.t = t
        self.last_valid = last_valid
        self.dump = dump


def _as_pair(pair) -> SerrinPair:
    return pair if isinstance(pair, SerrinPair) else SerrinPair(*pair)


@dataclass(frozen=True)
class SimConfig:
    nu: float
    dt: float
    T: float
    extents: tuple = (math.pi, math.pi, math.pi)
    resolution: tuple = (32, 32, 32)
    ic: str = "taylor_green"
    ic_params: dict = field(default_factory=dict)
    thetas: tuple = (4.0,)
    s_values: tuple = (2.0,)
    serrin_pairs: tuple = ((5.0, 5.0), (4.0, 8.0))
    seed: int = 0
    cadence: int = 1
    checkpoint_every: int = 0
    kappa: float | None = None
    lambda1: float | None = None
    threshold: float = 1e-14
    corpus_size: int = 4
    nonlinear_form: str = "convective"

    def __post_init__(self):
        errors = []
        if not (isinstance(self.nu, (int, float)) and self.nu > 0):
            errors.append("nu must be positive")
        if not (isinstance(self.dt, (int, float)) and self.dt > 0):
            errors.append("dt must be positive")
        if not (isinstance(self.T, (int, float)) and self.T >= 0):
            errors.append("T must be non-negative")
        elif self.T > 0 and isinstance(self.dt, (int, float)) and self.dt > self.T:
            errors.append("dt must not exceed T")
        if self.ic not in IC_IDS:
            errors.append(f"ic must be one of {', '.join(IC_IDS)}, got {self.ic!r}")
        if any(th <= 3 for th in self.thetas):
            errors.append("every monitored theta must exceed 3")
        if any(s <= 1 for s in self.s_values):
            errors.append("every monitored s must exceed 1")
        if self.cadence < 1:
            errors.append("cadence must be at least 1")
        if self.checkpoint_every < 0:
            errors.append("checkpoint_every must be non-negative")
        if self.kappa is not None and self.kappa <= 0:
            errors.append("kappa must be positive")
        if self.threshold <= 0:
            errors.append("threshold must be positive")
        if self.corpus_size < 1:
            errors.append("corpus_size must be at least 1")
        if self.nonlinear_form != "convective":
            errors.append("nonlinear_form must be 'convective'")
        for pair in self.serrin_pairs:
            try:
                _as_pair(pair)
            except (TypeError, ValueError) as exc:
                errors.append(f"serrin_pairs: {exc}")
        try:
            BoxDomain(tuple(self.extents), tuple(self.resolution))
        except ValueError as exc:
            errors.append(f"domain: {exc}")
        if errors:
            raise ValueError("; ".join(errors))
        object.__setattr__(self, "extents", tuple(float(x) for x in self.extents))
        object.__setattr__(self, "resolution", tuple(int(n) for n in self.resolution))
        object.__setattr__(self, "thetas", tuple(float(x) for x in self.thetas))
        object.__setattr__(self, "s_values", tuple(float(x) for x in self.s_values))
        object.__setattr__(self, "serrin_pairs", tuple(_as_pair(p) for p in self.serrin_pairs))

    @property
    def domain(self) -> BoxDomain:
        return BoxDomain(self.extents, self.resolution)

    @property
    def n_steps(self) -> int:
        if self.T == 0:
            return 0
        return max(1, math.ceil(self.T / self.dt - 1e-9))

    @property
    def step_size(self) -> float:
        """``T / n_steps``; equals ``dt`` whenever ``dt`` divides ``T``."""
        return self.T / self.n_steps if self.n_steps else self.dt


# -- initial conditions -----------------------------------------------------


def _taylor_green(domain: BoxDomain, amplitude: float = 1.0) -> VelocityField:
    a, b, _ = domain.extents
    stack = np.zeros((3,) + domain.shape)
    stack[0, 1, 1, 0] = amplitude
    stack[1, 1, 1, 0] = -amplitude * b / a
    return VelocityField.from_array(domain, stack)


def _single_mode(domain: BoxDomain, k=(1, 1, 0), amplitude: float = 1.0, direction=None) -> VelocityField:
    k = tuple(int(x) for x in k)
    if any(not (0 <= k[i] < domain.shape[i]) for i in range(3)):
        raise ValueError(f"mode {k} outside the resolved range")
    kt = np.array([math.pi * k[i] / domain.extents[i] for i in range(3)])
    if direction is None:
        direction = np.cross(kt, np.ones(3))
        if np.allclose(direction, 0):
            direction = np.cross(kt, [1.0, 0.0, 0.0])
    a = np.asarray(direction, dtype=float) * (np.array(k) != 0)
    k2 = float(kt @ kt)
    if k2 > 0:
        a = a - kt * (kt @ a) / k2
    if np.max(np.abs(a)) == 0:
        raise ValueError(f"mode {k} supports no divergence-free field in direction {direction}")
    a = amplitude * a / np.max(np.abs(a))
    stack = np.zeros((3,) + domain.shape)
    for i in range(3):
        stack[(i,) + k] = a[i]
    return VelocityField.from_array(domain, stack)


def _random_bandlimited(domain: BoxDomain, seed: int = 0, kmax: int = 4, gamma: float = 2.0,
                        rms: float = 1.0) -> VelocityField:
    """Leray-projected noise on modes ``k_i <= kmax`` with amplitude ``|k~|^-gamma``.

    The random draw covers a fixed ``(3, kmax+1, kmax+1, kmax+1)`` block, so
    the same seed gives the same continuous field at every resolution.
    """
    kmax = int(kmax)
    cut = min(int(np.count_nonzero(3 * np.arange(n) < 2 * n)) for n in domain.shape)
    if kmax >= cut:
        raise ValueError(f"kmax={kmax} exceeds the dealiased band ({cut - 1})")
    rng = np.random.default_rng(seed)
    block = rng.standard_normal((3, kmax + 1, kmax + 1, kmax + 1))
    kt = [math.pi * np.arange(kmax + 1) / L for L in domain.extents]
    k2 = kt[0][:, None, None] ** 2 + kt[1][None, :, None] ** 2 + kt[2][None, None, :] ** 2
    amp = np.where(k2 > 0, np.where(k2 > 0, k2, 1.0) ** (-gamma / 2), 0.0)
    block *= amp
    for i in range(3):
        idx = [slice(None)] * 3
        idx[i] = 0
        block[i][tuple(idx)] = 0.0
    stack = np.zeros((3,) + domain.shape)
    stack[:, : kmax + 1, : kmax + 1, : kmax + 1] = block
    stack = leray_array(domain, stack)
    v = VelocityField.from_array(domain, stack)
    norm = v.l2_norm() / math.sqrt(domain.volume)
    if norm == 0:
        raise ValueError("random field vanished; increase kmax")
    return v * (rms / norm)


def initial_condition(ic_id: str, params: dict | None, domain: BoxDomain, seed: int = 0) -> VelocityField:
    params = dict(params or {})
    if ic_id == "taylor_green":
        return _taylor_green(domain, **params)
    if ic_id == "single_mode":
        return _single_mode(domain, **params)
    if ic_id == "random_bandlimited":
        params.setdefault("seed", seed)
        return _random_bandlimited(domain, **params)
    raise ValueError(f"unknown initial condition {ic_id!r}; known: {', '.join(IC_IDS)}")


# -- integrator --------------------------------------------------------------


class IntegratingFactorRK2:
    """Exact viscous decay plus the explicit midpoint rule for ``-P[(v.grad)v]``."""

    def __init__(self, domain: BoxDomain, nu: float, dt: float):
        self.domain = domain
        self.nu = nu
        self.dt = dt
        k2 = domain.laplacian_symbol()
        self.half = np.exp(-nu * k2 * (0.5 * dt))
        self.full = np.exp(-nu * k2 * dt)

    def nonlinear(self, stack: np.ndarray) -> np.ndarray:
        return -leray_array(self.domain, convective_array(self.domain, stack))

    def advance(self, stack: np.ndarray) -> np.ndarray:
        dt = self.dt
        mid = self.half * (stack + 0.5 * dt * self.nonlinear(stack))
        return self.full * stack + dt * self.half * self.nonlinear(mid)


def step(v: VelocityField, config: SimConfig, integrator: IntegratingFactorRK2 | None = None) -> VelocityField:
    integrator = integrator or IntegratingFactorRK2(v.domain, config.nu, config.step_size)
    new = integrator.advance(v.stack())
    if not np.all(np.isfinite(new)):
        raise InstabilityError("non-finite velocity after one step", last_valid=v)
    return VelocityField.from_array(v.domain, new)


def stability_warning(v: VelocityField, dt: float) -> str | None:
    vmax = float(np.max(magnitude(velocity_values_array(v.domain, v.stack()))))
    limit = CFL * min(v.domain.spacing) / vmax if vmax > 0 else math.inf
    if dt > limit:
        return f"dt={dt:g} exceeds the advective limit {limit:.3g} (CFL={CFL})"
    return None


class Trajectory:
    """Iterator over CriteriaRecords of one run; also exposes the current state."""

    def __init__(self, config: SimConfig, v0: VelocityField | None = None,
                 checkpoint_dir=None, monitor: Monitor | None = None):
        self.config = config
        domain = config.domain
        self.state = v0 if v0 is not None else initial_condition(
            config.ic, config.ic_params, domain, config.seed)
        self.t = 0.0
        self.step = 0
        self.monitor = monitor or Monitor(
            config.nu, config.thetas, config.s_values, config.serrin_pairs, config.threshold)
        self.checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir else None
        self.integrator = IntegratingFactorRK2(domain, config.nu, config.step_size)
        self.records = []
        msg = stability_warning(self.state, config.step_size)
        if msg:
            warnings.warn(msg, RuntimeWarning, stacklevel=2)

    def _checkpoint(self, name=None):
        if self.checkpoint_dir is None:
            return None
        name = name or f"step{self.step:07d}"
        return save_snapshot(self.checkpoint_dir / name, self.state,
                             {"t": self.t, "step": self.step})

    def _emit(self):
        rec = self.monitor.observe(self.t, self.step, self.state)
        self.records.append(rec)
        return rec

    def _unstable(self, k, h, last_valid, reason):
        self.state = last_valid
        dump = self._checkpoint("last_valid")
        return InstabilityError(
            f"{reason} at step {k} (t={k * h:.6g}); last valid state at t={self.t:.6g}"
            + (f" dumped to {dump}" if dump else ""),
            step=k, t=k * h, last_valid=last_valid, dump=dump)

    def __iter__(self):
        cfg = self.config
        n = cfg.n_steps
        h = cfg.step_size
        yield self._emit()
        valid = (self.state, self.t, self.step)
        for k in range(1, n + 1):
            new = self.integrator.advance(self.state.stack())
            if not np.all(np.isfinite(new)):
                self.state, self.t, self.step = valid
                raise self._unstable(k, h, valid[0], "non-finite velocity")
            self.state = VelocityField.from_array(self.state.domain, new)
            self.step = k
            self.t = k * h
            if cfg.checkpoint_every and k % cfg.checkpoint_every == 0:
                self._checkpoint()
            if k % cfg.cadence == 0 or k == n:
                try:
                    rec = self._emit()
                except FloatingPointError:
                    # finite but overflowing state: stop at the last monitored one
                    self.t, self.step = valid[1], valid[2]
                    raise self._unstable(k, h, valid[0], "overflow in the monitored terms") from None
                valid = (self.state, self.t, self.step)
                yield rec


def run(config: SimConfig, checkpoint_dir=None, v0: VelocityField | None = None) -> Trajectory:
    return Trajectory(config, v0=v0, checkpoint_dir=checkpoint_dir)


def evolve(v: VelocityField, nu: float, dt: float, n_steps: int) -> VelocityField:
    """Advance ``n_steps`` steps without monitoring."""
    integ = IntegratingFactorRK2(v.domain, nu, dt)
    stack = v.stack()
    for _ in range(n_steps):
        stack = integ.advance(stack)
        if not np.all(np.isfinite(stack)):
            raise InstabilityError("non-finite velocity", last_valid=v)
    return VelocityField.from_array(v.domain, stack)


__all__ = [
    "CANONICAL", "IC_IDS", "InstabilityError", "IntegratingFactorRK2", "SimConfig",
    "Trajectory", "evolve", "initial_condition", "run", "stability_warning", "step",
]
