import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slipbox.domain import BoxDomain
from slipbox.fields import face_trace
from slipbox.spectral import (
    ALL_EVEN,
    CoefficientTensor,
    Parity,
    canonical_parity,
    differentiate,
    forward,
    inverse,
    laplacian,
    parseval_weights,
    roundtrip_residual,
)

PARITIES = [Parity(bits) for bits in itertools.product((0, 1), repeat=3)]


def random_coeffs(domain, parity, rng):
    c = rng.standard_normal(domain.shape)
    for axis, bit in enumerate(parity):
        if bit:
            idx = [slice(None)] * 3
            idx[axis] = 0
            c[tuple(idx)] = 0.0
    return CoefficientTensor(domain, parity, c)


def test_parity_algebra():
    p = Parity("oee")
    assert str(p) == "oee"
    assert p.flip(0) == ALL_EVEN
    assert p.flip(1).flip(1) == p
    assert Parity("oeo") * Parity("ooe") == Parity("eoo")
    assert canonical_parity(2) == Parity("eeo")


def test_constant_mode(box):
    t = forward(box, np.ones(box.shape), ALL_EVEN)
    expected = np.zeros(box.shape)
    expected[0, 0, 0] = 1.0
    np.testing.assert_allclose(t.coeffs, expected, atol=1e-15)


def test_cosine_mode_coefficient_and_direct_sum(box):
    a = box.extents[0]
    X, _, _ = box.mesh()
    f = np.cos(math.pi * X / a) * np.ones(box.shape)
    t = forward(box, f, ALL_EVEN)
    expected = np.zeros(box.shape)
    expected[1, 0, 0] = 1.0
    np.testing.assert_allclose(t.coeffs, expected, atol=1e-14)
    # direct series summation at points off the grid
    pts = [np.array([0.0, 0.3, a]), np.array([0.1, 1.9]), np.array([0.7])]
    direct = t.evaluate(pts)
    oracle = np.cos(math.pi * pts[0] / a)[:, None, None] * np.ones((3, 2, 1))
    np.testing.assert_allclose(direct, oracle, atol=1e-14)


def test_constant_with_odd_parity_is_flagged(box):
    # sines cannot represent a constant: the k=0 slot stays empty and the
    # series drops to 0 on the face where the data is 1 (a square wave; the
    # grid samples alone round-trip, so the face trace is the flag)
    t = forward(box, np.ones(box.shape), Parity("oee"))
    assert np.all(t.coeffs[0] == 0)
    assert roundtrip_residual(box, np.ones(box.shape), Parity("oee")) < 1e-14
    assert np.max(np.abs(face_trace(t, 0, 0))) == 0.0
    assert np.max(np.abs(face_trace(t, 1, 0) - 1.0)) < 1e-14


def test_zero_tensor_inverts_to_zero(box):
    for p in PARITIES:
        assert not np.any(inverse(CoefficientTensor.zeros(box, p)))


def test_single_mixed_mode_matches_direct_evaluation(box):
    a, b, _ = box.extents
    c = np.zeros(box.shape)
    c[1, 1, 0] = 1.0
    t = CoefficientTensor(box, Parity("oee"), c)
    X, Y, Z = box.mesh()
    oracle = np.sin(math.pi * X / a) * np.cos(math.pi * Y / b) * np.ones_like(Z)
    np.testing.assert_allclose(t.values(), oracle, atol=1e-14)


@pytest.mark.parametrize("parity", PARITIES, ids=str)
def test_roundtrip_random(box, rng, parity):
    t = random_coeffs(box, parity, rng)
    back = forward(box, t.values(), parity)
    err = np.max(np.abs(back.coeffs - t.coeffs)) / np.max(np.abs(t.coeffs))
    assert err < 1e-12
    f = t.values()
    assert np.max(np.abs(inverse(forward(box, f, parity)) - f)) < 1e-12 * np.max(np.abs(f))


@pytest.mark.parametrize("parity", PARITIES, ids=str)
def test_parseval(box, rng, parity):
    t = random_coeffs(box, parity, rng)
    g = random_coeffs(box, parity, rng)
    # the dropped sine Nyquist mode makes the grid sum exact only for
    # integrands that are even along every axis, i.e. f and g of equal parity
    grid = box.quadrature(t.values() * g.values())
    coef = float(np.sum(parseval_weights(box, parity) * t.coeffs * g.coeffs))
    assert abs(grid - coef) < 1e-12 * max(abs(coef), t.l2_norm() * g.l2_norm())
    assert t.inner(g) == pytest.approx(coef, rel=1e-14)


def test_derivative_of_cosine(box):
    a = box.extents[0]
    X, _, _ = box.mesh()
    t = forward(box, np.cos(math.pi * X / a) * np.ones(box.shape), ALL_EVEN)
    d = differentiate(t, 0)
    assert d.parity == Parity("oee")
    np.testing.assert_allclose(d.values(), -(math.pi / a) * np.sin(math.pi * X / a) * np.ones(box.shape),
                               atol=1e-13)


def test_derivative_of_constant_vanishes(box):
    t = forward(box, np.full(box.shape, 3.0), ALL_EVEN)
    for axis in range(3):
        assert np.max(np.abs(differentiate(t, axis).coeffs)) == 0.0


@pytest.mark.parametrize("parity", PARITIES, ids=str)
def test_second_derivative_is_eigen(box, rng, parity):
    t = random_coeffs(box, parity, rng)
    for axis in range(3):
        dd = differentiate(differentiate(t, axis), axis)
        assert dd.parity == parity
        k = box.wavenumbers(axis).reshape([-1 if b == axis else 1 for b in range(3)])
        np.testing.assert_allclose(dd.coeffs, -(k**2) * t.coeffs, rtol=1e-14, atol=0)
    lap = laplacian(t)
    manual = sum(differentiate(differentiate(t, a), a).coeffs for a in range(3))
    np.testing.assert_allclose(lap.coeffs, manual, rtol=1e-13, atol=1e-12)


def test_odd_axis_rejects_constant_coefficient(box):
    c = np.zeros(box.shape)
    c[0, 1, 1] = 1.0
    with pytest.raises(ValueError, match="k=0"):
        CoefficientTensor(box, Parity("oee"), c)


def test_refined_values_interpolate(box, rng):
    t = random_coeffs(box, Parity("eoe"), rng)
    fine = box.with_resolution(tuple(2 * n for n in box.shape))
    pts = [fine.collocation_grid(a) for a in range(3)]
    np.testing.assert_allclose(t.values(2.0), t.evaluate(pts), atol=1e-11)


def test_inputs_not_mutated(box, rng):
    t = random_coeffs(box, ALL_EVEN, rng)
    before = t.coeffs.copy()
    differentiate(t, 1), laplacian(t), t.values(1.5)
    assert np.array_equal(before, t.coeffs)


@settings(max_examples=30, deadline=None)
@given(
    n=st.tuples(*[st.sampled_from([8, 10, 12]) for _ in range(3)]),
    ext=st.tuples(*[st.floats(0.2, 5.0) for _ in range(3)]),
    bits=st.tuples(*[st.integers(0, 1) for _ in range(3)]),
    seed=st.integers(0, 2**32 - 1),
)
def test_roundtrip_property(n, ext, bits, seed):
    d = BoxDomain(ext, n)
    t = random_coeffs(d, Parity(bits), np.random.default_rng(seed))
    back = forward(d, t.values(), t.parity)
    assert np.max(np.abs(back.coeffs - t.coeffs)) < 1e-12 * np.max(np.abs(t.coeffs))
