import math

import numpy as np
import pytest

from slipbox.domain import BoxDomain
from slipbox.evolve import (
    InstabilityError,
    IntegratingFactorRK2,
    SimConfig,
    Trajectory,
    evolve,
    initial_condition,
    run,
    step,
)
from slipbox.fields import VelocityField, divergence
from slipbox.snapshot import load_snapshot


def test_taylor_green_field(cube16, tg16):
    X, Y, Z = cube16.mesh()
    vals = tg16.values()
    np.testing.assert_allclose(vals[0], np.sin(X) * np.cos(Y) * np.ones(cube16.shape), atol=1e-14)
    np.testing.assert_allclose(vals[1], -np.cos(X) * np.sin(Y) * np.ones(cube16.shape), atol=1e-14)
    assert np.max(np.abs(vals[2])) == 0.0
    assert np.max(np.abs(divergence(tg16).values())) < 1e-14


def test_single_mode_matches_taylor_green_shape(cube16, tg16):
    v = initial_condition("single_mode", {"k": (1, 1, 0), "amplitude": 2.0}, cube16)
    np.testing.assert_allclose(v.stack(), 2.0 * tg16.stack(), atol=1e-15)


def test_random_field_reproducible_and_resolution_independent(cube16):
    a = initial_condition("random_bandlimited", {}, cube16, seed=11)
    b = initial_condition("random_bandlimited", {}, cube16, seed=11)
    assert a.stack().tobytes() == b.stack().tobytes()
    c = initial_condition("random_bandlimited", {}, cube16, seed=12)
    assert not np.array_equal(a.stack(), c.stack())
    fine = initial_condition("random_bandlimited", {}, cube16.with_resolution((24, 24, 24)), seed=11)
    pts = [np.array([0.3, 1.7]), np.array([0.0, 2.2]), np.array([1.1])]
    for i in range(3):
        np.testing.assert_allclose(a[i].evaluate(pts), fine[i].evaluate(pts), atol=1e-13)
    assert a.l2_norm() / math.sqrt(cube16.volume) == pytest.approx(1.0)
    assert np.max(np.abs(divergence(a).values())) < 1e-12


def test_unknown_ic(cube16):
    with pytest.raises(ValueError, match="unknown initial condition"):
        initial_condition("vortex_ring", {}, cube16)


def test_zero_stays_zero(cube16):
    cfg = SimConfig(nu=0.1, dt=0.01, T=0.1, resolution=(16, 16, 16))
    v = step(VelocityField.zeros(cube16), cfg)
    assert not np.any(v.stack())


def test_taylor_green_decay_short(tg16):
    nu, dt, n = 0.05, 0.01, 50
    v = evolve(tg16, nu, dt, n)
    exact = math.exp(-2 * nu * dt * n) * tg16.values()
    err = np.max(np.abs(v.values() - exact)) / np.max(np.abs(exact))
    assert err < 1e-12


def _reference_error(v0, nu, T, dt, ref):
    out = evolve(v0, nu, dt, round(T / dt))
    return np.max(np.abs(out.stack() - ref))


def test_second_order_in_time(cube16):
    v0 = initial_condition("random_bandlimited", {"rms": 1.0}, cube16, seed=3)
    nu, T = 0.05, 0.2
    ref = evolve(v0, nu, T / 800, 800).stack()
    e1 = _reference_error(v0, nu, T, T / 20, ref)
    e2 = _reference_error(v0, nu, T, T / 40, ref)
    assert 3.5 < e1 / e2 < 4.5


def test_energy_non_increasing_and_constraints(cube16):
    cfg = SimConfig(nu=0.02, dt=0.01, T=0.2, resolution=(16, 16, 16), ic="random_bandlimited", seed=4)
    recs = list(run(cfg))
    energies = [r.energy for r in recs]
    assert all(b <= a * (1 + 1e-10) for a, b in zip(energies, energies[1:]))
    assert max(r.div_residual for r in recs) < 1e-11
    assert max(r.bc_residual for r in recs) < 1e-10


def test_zero_horizon_gives_initial_record():
    cfg = SimConfig(nu=0.1, dt=0.01, T=0.0, resolution=(16, 16, 16))
    recs = list(run(cfg))
    assert len(recs) == 1 and recs[0].t == 0.0


def test_taylor_green_energy_closed_form():
    nu = 0.05
    cfg = SimConfig(nu=nu, dt=0.01, T=0.3, resolution=(16, 16, 16), cadence=10)
    recs = list(run(cfg))
    assert [r.step for r in recs] == [0, 10, 20, 30]
    for r in recs:
        assert r.energy == pytest.approx(math.pi**3 / 4 * math.exp(-4 * nu * r.t), rel=1e-6)


def test_run_reproducible(tmp_path):
    cfg = SimConfig(nu=0.05, dt=0.01, T=0.05, resolution=(16, 16, 16), ic="random_bandlimited", seed=9,
                    checkpoint_every=2)
    a = list(run(cfg, checkpoint_dir=tmp_path / "a"))
    b = list(run(cfg, checkpoint_dir=tmp_path / "b"))
    assert [(r.energy, r.theta[4.0].rate) for r in a] == [(r.energy, r.theta[4.0].rate) for r in b]
    assert (tmp_path / "a" / "step0000002.bin").read_bytes() == (tmp_path / "b" / "step0000002.bin").read_bytes()
    snap = load_snapshot(tmp_path / "a" / "step0000004.bin")
    assert isinstance(snap, VelocityField)


def test_config_validation():
    with pytest.raises(ValueError, match="dt must be positive"):
        SimConfig(nu=0.1, dt=0.0, T=1.0)
    with pytest.raises(ValueError, match="nu must be positive"):
        SimConfig(nu=-1, dt=0.1, T=1.0)
    with pytest.raises(ValueError, match="theta"):
        SimConfig(nu=0.1, dt=0.1, T=1.0, thetas=(3.0,))
    with pytest.raises(ValueError, match="serrin"):
        SimConfig(nu=0.1, dt=0.1, T=1.0, serrin_pairs=((5, 6),))
    with pytest.raises(ValueError, match="domain"):
        SimConfig(nu=0.1, dt=0.1, T=1.0, resolution=(16, 16, 15))
    cfg = SimConfig(nu=0.1, dt=0.3, T=1.0)
    assert cfg.n_steps == 4 and cfg.step_size == pytest.approx(0.25)


def test_blowup_dumps_last_valid(tmp_path, cube16):
    cfg = SimConfig(nu=1e-4, dt=5.0, T=500.0, resolution=(16, 16, 16), ic="random_bandlimited",
                    ic_params={"rms": 50.0})
    with pytest.warns(RuntimeWarning, match="advective limit"):
        traj = Trajectory(cfg, checkpoint_dir=tmp_path)
    with pytest.raises(InstabilityError) as info:
        list(traj)
    err = info.value
    assert err.dump is not None and err.dump.exists()
    assert np.all(np.isfinite(err.last_valid.stack()))
    assert load_snapshot(err.dump).stack().tobytes() == err.last_valid.stack().tobytes()


def test_integrator_is_pure(random16):
    integ = IntegratingFactorRK2(random16.domain, 0.1, 0.01)
    s = random16.stack()
    before = s.copy()
    integ.advance(s)
    assert np.array_equal(s, before)
