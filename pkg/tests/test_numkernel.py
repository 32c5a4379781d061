import math

import numpy as np
import pytest

from phasefront import numkernel as nk
from phasefront.errors import DomainError, NumericError, ShapeError


def test_matmul_identity():
    m = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(nk.matmul(np.eye(2), m), m)
    assert np.array_equal(nk.matmul(m, np.eye(2)), m)


def test_matmul_hand_example():
    out = nk.matmul([[1.0, 2.0]], [[3.0], [4.0]])
    assert out.shape == (1, 1) and out[0, 0] == 11.0


def test_matmul_shape_error():
    with pytest.raises(ShapeError):
        nk.matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_matmul_rejects_nonfinite():
    with pytest.raises(NumericError):
        nk.matmul([[1e308, 1e308]], [[1e308], [1e308]])


def test_matmul_associativity_random_chains():
    rng = nk.make_rng(7)
    for _ in range(20):
        a = rng.normal(size=(4, 5))
        b = rng.normal(size=(5, 3))
        c = rng.normal(size=(3, 6))
        left = nk.matmul(nk.matmul(a, b), c)
        right = nk.matmul(a, nk.matmul(b, c))
        assert np.max(np.abs(left - right)) <= 1e-9 * max(1.0, np.max(np.abs(left)))


def test_leaky_relu_values():
    assert nk.leaky_relu(2.0) == 2.0
    assert nk.leaky_relu(-2.0) == pytest.approx(-0.2, abs=1e-15)
    assert nk.leaky_relu(0.0) == 0.0


def test_msle_examples():
    assert nk.msle([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert nk.msle([math.e - 1.0], [0.0]) == pytest.approx(1.0, abs=1e-12)
    assert nk.msle([0.0, math.e - 1.0], [0.0, 0.0]) == pytest.approx(0.5, abs=1e-12)


def test_msle_domain_error():
    with pytest.raises(DomainError):
        nk.msle([-1.0], [0.0])
    with pytest.raises(DomainError):
        nk.msle([0.0], [-2.0])


def test_msle_nonnegative_and_zero_iff_equal():
    rng = nk.make_rng(3)
    for _ in range(50):
        pred = rng.uniform(-0.5, 10.0, size=6)
        truth = rng.uniform(-0.5, 10.0, size=6)
        v = nk.msle(pred, truth)
        assert v >= 0.0
        if v <= 1e-12:
            assert np.allclose(pred, truth, atol=1e-6)
        assert nk.msle(pred, pred) == 0.0


def test_mae_examples():
    assert nk.mae([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert nk.mae([1.0, 3.0], [0.0, 0.0]) == 2.0
    assert nk.mae([-1.0], [1.0]) == 2.0
    with pytest.raises(ShapeError):
        nk.mae([1.0], [1.0, 2.0])


def test_adam_zero_gradient_is_fixed_point():
    params = {"w": np.array([[1.0, -2.0]])}
    before = params["w"].copy()
    state = nk.AdamState(params, base_lr=0.05)
    for epoch in range(3):
        nk.adam_step(state, params, {"w": np.zeros((1, 2))}, epoch)
    assert np.array_equal(params["w"], before)


def test_adam_first_step_magnitude_is_lr():
    params = {"w": np.array([[0.0]])}
    state = nk.AdamState(params, base_lr=0.01, decay=1.0)
    nk.adam_step(state, params, {"w": np.array([[1.0]])}, epoch=0)
    # bias correction makes mhat/sqrt(vhat) = 1 on the first step
    assert params["w"][0, 0] == pytest.approx(-0.01, rel=1e-6)


def test_adam_decay_schedule():
    p1 = {"w": np.array([[0.0]])}
    p2 = {"w": np.array([[0.0]])}
    s1 = nk.AdamState(p1, base_lr=0.01, decay=1.0)
    s2 = nk.AdamState(p2, base_lr=0.01, decay=0.5)
    g = {"w": np.array([[1.0]])}
    nk.adam_step(s1, p1, g, epoch=5)
    nk.adam_step(s2, p2, g, epoch=2)
    assert p1["w"][0, 0] == pytest.approx(-0.01, rel=1e-6)
    assert p2["w"][0, 0] == pytest.approx(-0.01 * 0.25, rel=1e-6)


def test_adam_shape_error():
    params = {"w": np.zeros((2, 2))}
    state = nk.AdamState(params)
    with pytest.raises(ShapeError):
        nk.adam_step(state, params, {"w": np.zeros((1, 2))}, 0)


def test_finite_diff_quadratic():
    params = {"x": np.array([3.0])}
    err = nk.finite_diff_check(lambda p: float(p["x"][0] ** 2), params,
                               {"x": np.array([6.0])}, h=1e-5)
    assert err < 1e-8


def test_finite_diff_constant():
    params = {"x": np.array([1.0, 2.0])}
    err = nk.finite_diff_check(lambda p: 4.2, params,
                               {"x": np.zeros(2)}, h=1e-5)
    assert err == 0.0


def test_finite_diff_flags_wrong_gradient():
    params = {"x": np.array([3.0])}
    err = nk.finite_diff_check(lambda p: float(p["x"][0] ** 2), params,
                               {"x": np.array([12.0])}, h=1e-5)
    assert err == pytest.approx(0.5, abs=1e-6)


def test_rng_streams_are_independent_and_reproducible():
    a1 = nk.make_rng(42, stream=0).normal(size=4)
    a2 = nk.make_rng(42, stream=0).normal(size=4)
    b = nk.make_rng(42, stream=1).normal(size=4)
    assert np.array_equal(a1, a2)
    assert not np.array_equal(a1, b)


def test_glorot_bounds():
    rng = nk.make_rng(0)
    w = nk.glorot_uniform(rng, 10, 64)
    lim = math.sqrt(6.0 / 74.0)
    assert w.shape == (10, 64)
    assert np.all(np.abs(w) <= lim)
