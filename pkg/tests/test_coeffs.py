import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from svie_support.coeffs import (
    GeneralCoefficients,
    builtin_examples,
    correction_rho,
    custom_setup,
    get_coefficients,
    girsanov_setup,
    remainder_R,
    support_setup,
)
from svie_support.funcalc import Functional, zero
from svie_support.paths import DriverPath, GridPath
from svie_support.timegrid import TimeGrid

G = TimeGrid.uniform(0.0, 1.0, 32)


def test_catalog():
    cat = builtin_examples()
    assert set(cat) == {"gbm", "additive_kernel", "bounded_separable"}
    with pytest.raises(TypeError):
        cat["new"] = None
    with pytest.raises(KeyError):
        get_coefficients("nope")
    with pytest.raises(ValueError):
        get_coefficients("gbm", lam=2.0)


def test_gbm_rho():
    c = get_coefficients("gbm")
    x = GridPath.from_function(G, lambda t: 1 + t)
    assert correction_rho(c, 0.75, 0.5, x)[0] == pytest.approx(1.5)
    assert correction_rho(c, 0.5, 0.5, x)[0] == 0.0


def test_additive_kernel_rho_zero():
    c = get_coefficients("additive_kernel")
    x = GridPath.from_function(G, lambda t: np.sin(4 * t))
    assert np.all(c.rho.evaluate(G.points[17:], 0.5, x) == 0.0)


def test_bounded_separable_rho():
    c = get_coefficients("bounded_separable")
    x = GridPath.from_function(G, lambda t: 2 * t - 0.3)
    t, s = 0.875, 0.5
    v = 0.7
    want = np.exp(-(t - s)) * np.cos(v) * np.sin(v)
    assert correction_rho(c, t, s, x)[0] == pytest.approx(want, rel=1e-12)


@given(seed=st.integers(0, 2**16), i=st.integers(0, 31))
@settings(max_examples=40, deadline=None)
def test_bounded_separable_sigma_bound(seed, i):
    c = get_coefficients("bounded_separable")
    x = GridPath(G, np.random.default_rng(seed).normal(scale=5, size=(33, 1)))
    s = G.points[i]
    assert np.all(np.abs(c.sigma(G.points[i:], s, x)) <= 1.0)


def test_remainder_examples():
    c = get_coefficients("bounded_separable")
    x = GridPath.from_function(G, lambda t: 0.4 + t)
    t, s = 0.8125, 0.25
    rho = correction_rho(c, t, s, x)
    m, d = c.m, c.d
    g1 = GeneralCoefficients(c.b, zero((m, d)), c.sigma, zero((m, d)))
    assert remainder_R(g1, t, s, x) == pytest.approx(0.5 * rho, rel=1e-14)
    g2 = girsanov_setup(c, DriverPath.linear(G, 1.0))
    assert remainder_R(g2, t, s, x) == pytest.approx(-0.5 * rho, rel=1e-14)
    g3 = GeneralCoefficients(c.b, c.sigma, zero((m, d)), c.sigma)
    assert np.all(remainder_R(g3, t, s, x) == 0.0)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_remainder_is_half_rho(seed):
    rng = np.random.default_rng(seed)
    c = get_coefficients("bounded_separable", lam=rng.uniform(0.1, 3))
    g = support_setup(c)
    x = GridPath(G, rng.normal(scale=2, size=(33, 1)))
    i = int(rng.integers(0, 33))
    s = G.points[i]
    tt = G.points[i:]
    assert np.allclose(g.R(tt, s, x), 0.5 * c.rho(tt, s, x), rtol=0, atol=1e-12)


@given(seed=st.integers(0, 2**16), i=st.integers(0, 31))
@settings(max_examples=40, deadline=None)
def test_rho_fd_matches_analytic(seed, i):
    rng = np.random.default_rng(seed)
    c = get_coefficients("bounded_separable")
    fd_sigma = Functional(c.sigma.fn, c.sigma.shape, name="sigma-fd")
    from svie_support.coeffs import rho_functional

    x = GridPath(G, rng.normal(size=(33, 1)))
    s = G.points[i]
    tt = G.points[i + 1 :]
    a = c.rho(tt, s, x)
    b = rho_functional(fd_sigma)(tt, s, x)
    assert np.allclose(b, a, rtol=1e-5, atol=1e-9)


@given(seed=st.integers(0, 2**16), i=st.integers(0, 30))
@settings(max_examples=30, deadline=None)
def test_rho_and_R_non_anticipative(seed, i):
    rng = np.random.default_rng(seed)
    c = get_coefficients("bounded_separable")
    g = support_setup(c)
    v = rng.normal(size=(33, 1))
    w = v.copy()
    w[i + 1 :] += 1.0
    s = G.points[i]
    tt = G.points[i + 1 :]
    assert np.array_equal(c.rho(tt, s, GridPath(G, v)), c.rho(tt, s, GridPath(G, w)))
    assert np.array_equal(g.R(tt, s, GridPath(G, v)), g.R(tt, s, GridPath(G, w)))


def test_custom_setup_matches_support():
    c = get_coefficients("bounded_separable")
    cs = custom_setup(c, {"B_under": {"b": 1, "rho": -0.5}, "B_bar": {"sigma": 1}})
    sp = support_setup(c)
    x = GridPath.from_function(G, lambda t: 0.2 + t)
    tt = G.points[10:]
    assert np.allclose(cs.B_under.evaluate(tt, 0.25, x), sp.B_under.evaluate(tt, 0.25, x))
    assert np.allclose(cs.R.evaluate(tt, 0.25, x), sp.R.evaluate(tt, 0.25, x))
    with pytest.raises(ValueError):
        custom_setup(c, {"B_bar": {"b": 1}})
    with pytest.raises(ValueError):
        custom_setup(c, {"Drift": {"b": 1}})


def test_shapes_checked():
    c = get_coefficients("gbm")
    with pytest.raises(ValueError):
        GeneralCoefficients(c.b, zero((1, 2)), c.sigma, zero((1, 1)))


def test_time_derivatives_match_fd():
    c = get_coefficients("bounded_separable")
    x = GridPath.from_function(G, lambda t: 0.5 + t)
    tt = np.array([0.8])
    e = 1e-6
    db = (c.b.evaluate(tt + e, 0.5, x) - c.b.evaluate(tt, 0.5, x)) / e
    assert np.allclose(c.b.evaluate_dt(tt, 0.5, x), db, atol=1e-5)
