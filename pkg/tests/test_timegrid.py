import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from svie_support.paths import GridPath
from svie_support.timegrid import (
    GridError,
    Partition,
    PartitionSequence,
    TimeGrid,
    gamma,
    interpolate_Ln,
    make_dyadic_sequence,
    neighbors,
    partition_from_knots,
    slope_Ln,
)


def _part(knots, n=8):
    g = TimeGrid.uniform(0.0, 1.0, n)
    return partition_from_knots(g, knots)


def test_dyadic_two_levels():
    ps = make_dyadic_sequence(0, 1, 2, 2)
    assert np.allclose(ps[0].knots, [0, 0.5, 1])
    assert np.allclose(ps[1].knots, [0, 0.25, 0.5, 0.75, 1])
    assert ps.c_T == 1.0


def test_dyadic_single_interval():
    ps = make_dyadic_sequence(0, 1, 1, 1)
    assert ps[0].k == 1
    assert np.allclose(ps[0].knots, [0, 1])


def test_dyadic_rejects_bad_window():
    with pytest.raises(GridError):
        make_dyadic_sequence(1, 1, 2, 2)
    with pytest.raises(GridError):
        make_dyadic_sequence(0, 1, 0, 2)


@given(
    r=st.sampled_from([0.0, 0.25, 0.5]),
    levels=st.integers(1, 4),
    base=st.integers(1, 5),
    over=st.integers(1, 3),
)
@settings(max_examples=40, deadline=None)
def test_dyadic_balanced_and_nested(r, levels, base, over):
    ps = make_dyadic_sequence(r, 1.0, levels, base, over)
    for n, p in enumerate(ps):
        assert p.k == base * 2**n
        assert p.mesh <= ps.c_T * p.min_gap * (1 + 1e-12)
        assert p.k * p.mesh <= ps.c_T_bar
        assert p.knots[0] == pytest.approx(r) and p.knots[-1] == pytest.approx(1.0)
    for a, b in zip(ps, ps[1:]):
        assert set(a.knot_indices) <= set(b.knot_indices)
    g = ps.grid
    assert g.points[0] == 0.0 and g.points[-1] == 1.0
    assert np.sum(np.isclose(g.points, r)) == 1


def test_sequence_json_round_trip():
    ps = make_dyadic_sequence(0.25, 1.0, 3, 2, 2)
    back = PartitionSequence.from_json(ps.to_json())
    assert back.to_json() == ps.to_json()
    assert np.array_equal(back.grid.points, ps.grid.points)


def test_unbalanced_sequence_rejected():
    g = TimeGrid.uniform(0, 1, 8)
    p = partition_from_knots(g, [0, 0.125, 1])
    with pytest.raises(GridError):
        PartitionSequence((p,), c_T=2.0)


def test_neighbors_examples():
    p = _part([0, 0.5, 1])
    assert neighbors(p, 0.625) == pytest.approx((0, 0.5, 1))
    assert neighbors(p, 0.25) == pytest.approx((0, 0, 0.5))
    assert neighbors(p, 1.0) == pytest.approx((0.5, 1, 1))


def test_neighbors_outside_window():
    g = TimeGrid.uniform(0.5, 1.0, 4)
    p = partition_from_knots(g, [0.5, 0.75, 1.0])
    with pytest.raises(GridError):
        neighbors(p, 0.25)


def test_gamma_examples():
    p = _part([0, 0.5, 0.75, 1])
    assert gamma(p, 0.625) == pytest.approx(2.0)
    assert gamma(p, 0.25) == 0.0
    assert gamma(p, 1.0) == 1.0
    q = _part([0, 0.25, 0.5, 0.75, 1])
    assert gamma(q, 0.5) == pytest.approx(1.0)


def test_interpolation_examples():
    p = _part([0, 0.25, 0.5, 0.75, 1])
    x = GridPath.from_function(p.grid, lambda t: t)
    L = interpolate_Ln(p, x)
    assert L.at(0.5)[0] == pytest.approx(0.25)
    assert L.at(1.0)[0] == pytest.approx(0.75)
    assert np.allclose(L.values[:3, 0], 0.0)  # x(r ∧ t) up to t_1


def test_interpolation_of_constant():
    p = _part([0, 0.25, 0.5, 0.75, 1])
    L = interpolate_Ln(p, GridPath.constant(p.grid, [3.0]))
    assert np.allclose(L.values, 3.0)


def test_slope_examples():
    p = _part([0, 0.5, 0.75, 1])
    g = p.grid
    x = GridPath(g, np.interp(g.points, [0, 0.5, 0.75, 1], [0, 1, 3, 3]))
    assert slope_Ln(p, x, 0.875)[0] == pytest.approx(8.0)
    assert slope_Ln(p, x, 0.25)[0] == 0.0
    assert slope_Ln(p, x, 0.5)[0] == 0.0  # left-open intervals: 0.5 belongs to (0, 0.5]
    q = _part([0, 0.25, 0.5, 0.75, 1])
    lin = GridPath.from_function(q.grid, lambda t: t)
    for s in (0.375, 0.625, 0.875, 1.0):
        assert slope_Ln(q, lin, s)[0] == pytest.approx(1.0)


def test_master_slopes_match_pointwise_slope():
    ps = make_dyadic_sequence(0, 1, 2, 2, 2)
    p = ps[1]
    x = GridPath.from_function(ps.grid, lambda t: np.sin(5 * t))
    ms = p.master_slopes(x.values)
    mid = 0.5 * (ps.grid.points[:-1] + ps.grid.points[1:])
    for j, s in enumerate(mid):
        assert ms[j] == pytest.approx(slope_Ln(p, x, ps.grid.points[j + 1]))
    assert np.all(ms[: p.knot_indices[1]] == 0)


@given(
    a=st.floats(-3, 3), b=st.floats(-3, 3),
    seed=st.integers(0, 2**16),
)
@settings(max_examples=30, deadline=None)
def test_interpolation_linear(a, b, seed):
    ps = make_dyadic_sequence(0.25, 1, 2, 2, 2)
    p = ps[1]
    rng = np.random.default_rng(seed)
    x = GridPath(ps.grid, rng.normal(size=(len(ps.grid), 2)))
    y = GridPath(ps.grid, rng.normal(size=(len(ps.grid), 2)))
    lhs = interpolate_Ln(p, GridPath(ps.grid, a * x.values + b * y.values)).values
    rhs = a * interpolate_Ln(p, x).values + b * interpolate_Ln(p, y).values
    assert np.allclose(lhs, rhs, atol=1e-12)


@given(i=st.integers(1, 3), seed=st.integers(0, 2**16))
@settings(max_examples=30, deadline=None)
def test_interpolation_is_lagged(i, seed):
    ps = make_dyadic_sequence(0, 1, 1, 4, 3)
    p = ps[0]
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(len(ps.grid), 1))
    w = v.copy()
    cut = p.knot_indices[i]
    w[cut + 1 :] += rng.normal(size=w[cut + 1 :].shape)
    hi = p.knot_indices[i + 1]
    Lv = interpolate_Ln(p, GridPath(ps.grid, v)).values
    Lw = interpolate_Ln(p, GridPath(ps.grid, w)).values
    assert np.array_equal(Lv[: hi + 1], Lw[: hi + 1])


@given(s=st.floats(0, 1))
@settings(max_examples=50, deadline=None)
def test_gamma_range(s):
    p = _part([0, 0.125, 0.5, 0.625, 1])
    c_T = p.mesh / p.min_gap
    assert 0 <= gamma(p, s) <= c_T


def test_partition_knots_on_grid_only():
    g = TimeGrid.uniform(0, 1, 4)
    with pytest.raises(GridError):
        partition_from_knots(g, [0, 0.3, 1])
    with pytest.raises(GridError):
        Partition(g, (0, 2, 1, 4))
