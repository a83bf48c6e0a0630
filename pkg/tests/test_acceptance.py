"""End-to-end acceptance checks; the terminal summary prints one line per criterion."""

import json
import math
import time

import numpy as np
import pytest

from slipbox import monitor as mon
from slipbox import suites
from slipbox.cli import main
from slipbox.domain import BoxDomain
from slipbox.evolve import SimConfig, evolve, initial_condition, run
from slipbox.pressure import pressure_estimate_ratio, pressure_from_velocity
from slipbox.spectral import ALL_EVEN, forward

CORPUS_SEEDS = range(100)
S_VALUES = (2.0, 3.0, 4.0)


@pytest.fixture(scope="module")
def cube32():
    return BoxDomain.cube(math.pi, 32)


@pytest.fixture(scope="module")
def corpus32(cube32):
    return suites.random_corpus(cube32, CORPUS_SEEDS)


@pytest.fixture(scope="module")
def duality_rows(corpus32):
    return suites.duality_suite(corpus32, S_VALUES)


def test_taylor_green_decay(criterion, cube32):
    criterion(1, "Taylor-Green decay 32^3, nu=0.01, dt=1e-3 to t=1")
    nu, dt, n = 0.01, 1e-3, 1000
    v0 = initial_condition("taylor_green", {}, cube32)
    start = time.perf_counter()
    v = evolve(v0, nu, dt, n)
    elapsed = time.perf_counter() - start
    exact = math.exp(-2 * nu * n * dt) * v0.stack()
    err = np.max(np.abs(v.stack() - exact)) / np.max(np.abs(exact))
    criterion.note(f"rel Linf {err:.2e}, {elapsed:.1f} s")
    assert err < 1e-6
    assert elapsed < 60


def test_taylor_green_pressure(criterion, cube32):
    criterion(2, "Taylor-Green pressure oracle and L2 norm")
    X, Y, Z = cube32.mesh()
    oracle = forward(cube32, (np.cos(2 * X) + np.cos(2 * Y)) / 4 + 0 * Z, ALL_EVEN)
    p = pressure_from_velocity(initial_condition("taylor_green", {}, cube32))
    rel = (p - oracle).l2_norm() / oracle.l2_norm()
    norm_err = abs(p.l2_norm() - math.pi**1.5 / 4)
    criterion.note(f"rel L2 {rel:.1e}, |norm - pi^1.5/4| {norm_err:.1e}")
    assert rel < 1e-8
    assert norm_err < 1e-8


def test_poisson(criterion, cube32):
    criterion(3, "Neumann-Poisson eigenfunctions and self-adjointness")
    res = suites.poisson_suite(BoxDomain((1.0, 2.0, 1.5), (32, 24, 20)), n_pairs=50)
    res_cube = suites.poisson_suite(cube32, n_pairs=50, seed=1)
    eig = max(e["relative_error"] for r in (res, res_cube) for e in r["eigenfunctions"].values())
    sa = max(res["self_adjoint_residual"], res_cube["self_adjoint_residual"])
    criterion.note(f"eigen {eig:.1e}, self-adjoint {sa:.1e}")
    assert eig < 1e-13
    assert sa < 1e-11


def test_duality_identity(criterion, duality_rows):
    criterion(4, "duality identity on 100-field corpus at 32^3, s in {2,3,4}")
    worst = max(r["chain"].duality_residual for r in duality_rows)
    criterion.note(f"max residual {worst:.1e} over {len(duality_rows)} chains")
    assert {r["s"] for r in duality_rows} == set(S_VALUES)
    assert len(duality_rows) == 100 * len(S_VALUES)
    assert worst < 1e-8


def test_pressure_ratio_stability_and_chain(criterion, corpus32, duality_rows):
    criterion(5, "pressure ratio stable 32^3 -> 48^3, chain slack on every member")
    fine = BoxDomain.cube(math.pi, 48)
    corpus48 = suites.random_corpus(fine, CORPUS_SEEDS)
    changes = {}
    for s in S_VALUES:
        r32 = max(pressure_estimate_ratio(v, None, s) for _, v in corpus32)
        r48 = max(pressure_estimate_ratio(v, None, s) for _, v in corpus48)
        changes[s] = abs(r48 - r32) / r32
    slack = min(r["chain"].relative_slack for r in duality_rows)
    criterion.note("change " + ", ".join(f"s={s:g}: {c:.1e}" for s, c in changes.items())
                   + f"; min chain slack {slack:.3f}")
    assert all(c < 0.05 for c in changes.values())
    assert slack >= -1e-8


def test_exponent_algebra(criterion):
    criterion(6, "exponent algebra over 1e4 admissible pairs")
    res = suites.exponent_algebra(10_000)
    criterion.note(f"w1 {res['max_w1_error']:.1e}, w2 {res['max_w2_error']:.1e}, "
                   f"exact {res['exact_rational_ok']}")
    assert res["max_w1_error"] < 1e-12
    assert res["max_w2_error"] < 1e-12
    assert res["max_gamma1_error"] < 1e-12
    assert res["exact_rational_ok"]


def test_inequality_suites(criterion, cube32, corpus32):
    criterion(7, "Young, interpolation and Holder suites with zero violations")
    young = suites.young_fuzz(100_000)
    interp = suites.interpolation_suite(corpus32, thetas=(4.0, 5.0, 6.0))
    holder = suites.holder_fuzz(cube32, n=200)
    bad = {
        "young": young.inputs["violations"],
        "interpolation": sum(r.inputs["violations"] for r in interp),
        "holder": holder.inputs["violations"],
    }
    worst_interp = min(r.slack / r.rhs for r in interp)
    criterion.note(", ".join(f"{k} {v}" for k, v in bad.items()) + f"; min interp slack {worst_interp:.3f}")
    assert bad == {"young": 0, "interpolation": 0, "holder": 0}
    assert young.slack >= -1e-10 * young.rhs
    assert worst_interp >= -1e-10


def test_theta_energy_rate_consistency(criterion):
    criterion(8, "finite-difference theta-energy rate converges at second order")
    domain = BoxDomain.cube(math.pi, 32)
    v0 = initial_condition("random_bandlimited", {}, domain, seed=1)
    nu, theta, t_star = 0.05, 4.0, 0.2

    def discrepancy(dt):
        n = round(t_star / dt)
        before = evolve(v0, nu, dt, n - 1)
        mid = evolve(before, nu, dt, 1)
        after = evolve(mid, nu, dt, 1)
        fd = (mon.theta_energy(after, theta) - mon.theta_energy(before, theta)) / (2 * dt)
        return abs(fd / theta - mon.assembled_rate(mid, theta, nu).total)

    coarse, fine = discrepancy(0.01), discrepancy(0.005)
    ratio = coarse / fine
    criterion.note(f"discrepancy {coarse:.2e} -> {fine:.2e}, ratio {ratio:.2f}")
    assert 3.5 <= ratio <= 4.5


# -- corpus runs -------------------------------------------------------------

RUN_SEEDS = (0, 1, 2)


@pytest.fixture(scope="module")
def corpus_runs():
    """Short rough random-IC runs; rough spectra give non-dissipative snapshots so c_emp > 0."""
    out = []
    for seed in RUN_SEEDS:
        cfg = SimConfig(nu=0.005, dt=0.005, T=0.3, resolution=(24, 24, 24), ic="random_bandlimited",
                        ic_params={"gamma": 3.0}, seed=seed)
        traj = run(cfg)
        records = list(traj)
        out.append((cfg, traj, records))
    cfg = out[0][0]
    corpus = suites.random_corpus(cfg.domain, range(8))
    for c, traj, records in out:
        corpus.append((f"run{c.seed}", traj.state))
    all_records = [r for _, _, records in out for r in records]
    constants = suites.estimate_constants(cfg.domain, corpus, cfg.thetas, cfg.s_values, cfg.serrin_pairs,
                                          cfg.nu, all_records)
    return out, constants


def test_monotone_energy_and_constraints(criterion, corpus_runs):
    criterion(9, "energy non-increasing, divergence and boundary residuals < 1e-10")
    runs, _ = corpus_runs
    worst_rise = worst_div = worst_bc = 0.0
    for _, _, records in runs:
        e = np.array([r.energy for r in records])
        worst_rise = max(worst_rise, float(np.max((e[1:] - e[:-1]) / e[:-1])))
        worst_div = max(worst_div, max(r.div_residual for r in records))
        worst_bc = max(worst_bc, max(r.bc_residual for r in records))
    criterion.note(f"max rel rise {worst_rise:.1e}, div {worst_div:.1e}, bc {worst_bc:.1e}")
    assert worst_rise <= 1e-10
    assert worst_div < 1e-10
    assert worst_bc < 1e-10


def test_gronwall_envelope(criterion, corpus_runs):
    criterion(10, "Gronwall envelope dominates sup_t ||v||_p^p for (5,5) and (4,8)")
    runs, constants = corpus_runs
    notes, ok = [], True
    for cfg, _, records in runs:
        final = mon.finalize(records, constants, cfg.serrin_pairs)
        for pr in cfg.serrin_pairs:
            key = mon.pair_tag(pr)
            measured = [r.serrin_norm[pr] ** pr.p for r in final]
            running_sup = np.maximum.accumulate(measured)
            envelope = np.array([r.envelope[pr] for r in final])
            ok &= bool(np.all(running_sup <= envelope * (1 + 1e-12)))
            ok &= all(r.flags[f"envelope_ok_{key}"] for r in final)
    for pr in runs[0][0].serrin_pairs:
        notes.append(f"c_{mon.pair_tag(pr)} {constants['gronwall'][mon.pair_tag(pr)]:.2e}")
    criterion.note(", ".join(notes) + f", {len(runs)} runs")
    assert all(constants["gronwall"][mon.pair_tag(pr)] > 0 for pr in runs[0][0].serrin_pairs)
    assert ok


def test_reflection_commutation(criterion):
    criterion(11, "reflection commutes with the Laplacian per axis and at a corner")
    res = suites.reflect_suite(BoxDomain((1.0, 2.0, 1.5), (32, 24, 20)), n_fields=50)
    worst = max(res["max_residual_axis"].values())
    criterion.note(f"axis {worst:.1e}, corner {res['max_residual_corner']:.1e}, "
                   f"wrong-parity control {res['wrong_parity_control']:.1e}")
    assert worst < 1e-10
    assert res["max_residual_corner"] < 1e-10
    assert res["wrong_parity_control"] > 1e-3


def test_run_determinism(criterion, tmp_path):
    criterion(12, "repeated run gives byte-identical outputs")
    doc = {
        "nu": 0.02, "dt": 0.01, "T": 0.05, "seed": 3,
        "domain": {"extents": [math.pi, math.pi, math.pi], "resolution": [16, 16, 16]},
        "ic": {"id": "random_bandlimited", "params": {"kmax": 3}},
        "monitor": {"thetas": [4, 5], "s_values": [2, 3], "corpus_size": 2},
        "checkpoint_every": 2,
    }
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(doc))
    outs = [tmp_path / "a", tmp_path / "b"]
    codes = [main(["run", "--config", str(cfg), "--out", str(o), "--svg"]) for o in outs]
    files = [sorted(p.relative_to(o) for p in o.rglob("*") if p.is_file()) for o in outs]
    assert files[0] == files[1] and files[0]
    differing = [f for f in files[0] if (outs[0] / f).read_bytes() != (outs[1] / f).read_bytes()]
    criterion.note(f"{len(files[0])} files, {len(differing)} differ, exit codes {codes}")
    assert not differing
    assert codes == [0, 0]
