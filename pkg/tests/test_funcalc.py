import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from svie_support.funcalc import (
    EvaluationError,
    Functional,
    constant,
    horizontal_derivative,
    schwarz_asymmetry,
    second_vertical_derivative,
    vertical_derivative,
)
from svie_support.paths import GridPath
from svie_support.timegrid import TimeGrid

G = TimeGrid.uniform(0.0, 1.0, 32)


def K(t, s):
    return np.exp(-(np.asarray(t) - s))


def square():
    return Functional(lambda t, s, x: (x.at(s) ** 2)[..., None, :, None], (1, 1), name="x(s)^2")


def ksin():
    return Functional(
        lambda t, s, x: K(t, s)[:, None, None] * np.sin(x.at(s))[..., None, :, None],
        (1, 1),
        dx=lambda t, s, x: K(t, s)[:, None, None, None] * np.cos(x.at(s))[..., None, :, None, None],
        name="K sin",
    )


def test_vertical_derivative_square():
    x = GridPath.constant(G, [3.0])
    d = vertical_derivative(square(), 0.75, 0.5, x)
    assert d.shape == (1, 1, 1)
    assert d[0, 0, 0] == pytest.approx(6.0, rel=1e-8)


def test_vertical_derivative_constant():
    c = constant(np.ones((2, 2)))
    x = GridPath(G, np.random.default_rng(0).normal(size=(33, 2)))
    assert np.all(vertical_derivative(c, 0.75, 0.5, x) == 0.0)


def test_vertical_derivative_separable():
    x = GridPath.from_function(G, lambda t: 0.3 + t)
    t, s = 0.9375, 0.5
    d = vertical_derivative(ksin(), t, s, x)
    assert d[0, 0, 0] == pytest.approx(K(t, s) * np.cos(0.8), rel=1e-8)


def test_horizontal_derivative_examples():
    x = GridPath.from_function(G, lambda t: t)
    ident = Functional(lambda t, s, x: np.full(x.batch_shape + t.shape + (1,), s), (1,))
    assert horizontal_derivative(ident, 0.75, 0.5, x)[0] == pytest.approx(1.0, rel=1e-6)
    frozen = Functional(lambda t, s, x: x.values[..., None, -1, :], (1,))
    assert horizontal_derivative(frozen, 0.75, 0.5, x)[0] == pytest.approx(0.0, abs=1e-9)
    # G(s) = int_0^s e^{-(s-u)} du, so d_s G = e^{-s}
    kern = Functional(lambda t, s, x: np.full(x.batch_shape + t.shape + (1,), 1 - np.exp(-s)), (1,))
    assert horizontal_derivative(kern, 0.75, 0.5, x)[0] == pytest.approx(np.exp(-0.5), abs=1e-6)


def test_horizontal_derivative_needs_room():
    x = GridPath.from_function(G, lambda t: t)
    with pytest.raises(ValueError):
        horizontal_derivative(square(), 0.5, 0.5, x)


def test_second_vertical_examples():
    x = GridPath.constant(G, [1.5])
    assert second_vertical_derivative(square(), 0.75, 0.5, x)[0, 0, 0, 0] == pytest.approx(2.0, rel=1e-6)
    affine = Functional(lambda t, s, x: (2 * x.at(s) + 1)[..., None, :, None], (1, 1))
    assert second_vertical_derivative(affine, 0.75, 0.5, x)[0, 0, 0, 0] == pytest.approx(0.0, abs=1e-6)
    h = second_vertical_derivative(ksin(), 0.75, 0.5, x)[0, 0, 0, 0]
    assert h == pytest.approx(-K(0.75, 0.5) * np.sin(1.5), rel=1e-5)


def test_non_finite_evaluation_raises():
    bad = Functional(lambda t, s, x: np.log(x.at(s) - 10.0)[..., None, :], (1,))
    with np.errstate(invalid="ignore"), pytest.raises(EvaluationError):
        vertical_derivative(bad, 0.75, 0.5, GridPath.constant(G, [1.0]))


def test_call_ignores_future():
    f = Functional(lambda t, s, x: x.values.sum(axis=-2)[..., None, :], (1,))
    x = GridPath.from_function(G, lambda t: t)
    y = GridPath(G, np.where(G.points[:, None] > 0.5, 7.0, x.values))
    assert np.array_equal(f(0.75, 0.5, x), f(0.75, 0.5, y))


@given(
    x0=st.floats(-2, 2), slope=st.floats(-2, 2),
    i=st.integers(1, 30), lag=st.integers(1, 10),
)
@settings(max_examples=60, deadline=None)
def test_fd_matches_analytic(x0, slope, i, lag):
    x = GridPath.from_function(G, lambda t: x0 + slope * t)
    s = G.points[i]
    t = G.points[min(i + lag, 32)]
    F = ksin()
    fd = vertical_derivative(F, t, s, x)
    an = F.evaluate_dx(np.array([t]), s, x)[0]
    eps = 1e-5 * (1 + np.abs(x.values[: i + 1]).max())
    assert np.allclose(fd, an, rtol=max(1e-6, 10 * eps**2), atol=1e-9)


@given(seed=st.integers(0, 2**16), i=st.integers(1, 30))
@settings(max_examples=30, deadline=None)
def test_hessian_symmetry(seed, i):
    rng = np.random.default_rng(seed)
    x = GridPath(G, rng.uniform(-1, 1, size=(33, 2)))
    F = Functional(
        lambda t, s, x: (np.sin(x.at(s)[..., 0] * x.at(s)[..., 1]) + x.at(s)[..., 0] ** 3)[..., None, None],
        (1,),
    )
    s = G.points[i]
    hess = second_vertical_derivative(F, 1.0, s, x)
    assert schwarz_asymmetry(hess) <= 1e-5


@given(seed=st.integers(0, 2**16), i=st.integers(0, 31))
@settings(max_examples=30, deadline=None)
def test_non_anticipative_after_stopping(seed, i):
    rng = np.random.default_rng(seed)
    x = GridPath(G, rng.normal(size=(33, 1)))
    y = x.values.copy()
    y[i + 1 :] += rng.normal(size=y[i + 1 :].shape)
    F = Functional(lambda t, s, x: np.abs(x.values).max(axis=-2)[..., None, :], (1,))
    s = G.points[i]
    assert np.array_equal(F(1.0, s, x), F(1.0, s, GridPath(G, y)))


def test_linear_combinations_keep_derivatives():
    F = ksin()
    comb = 2.0 * F - F
    x = GridPath.constant(G, [0.4])
    assert np.allclose(comb.evaluate(np.array([0.75]), 0.5, x), F.evaluate(np.array([0.75]), 0.5, x))
    assert comb.dx is not None
