import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from laxfriedrichs.flux import quadratic
from laxfriedrichs.grid import (
    EVEN,
    ODD,
    GridField,
    StaggeredGrid,
    discretize_u0,
    discretize_v0,
    eval_u_delta,
    eval_v_delta,
    integrate_u,
    u_from_v,
)
from laxfriedrichs.io import load_field, read_field_csv, save_field, write_field_csv
from laxfriedrichs.scheme import SchemeConfig, solve

from oracles import cell_average


def sin2pi(x):
    return np.sin(2 * np.pi * np.asarray(x))


def test_grid_parameters():
    g = StaggeredGrid(16, 32)
    assert g.dx == 1 / 32 and g.dt == 1 / 64 and g.lam == 0.5
    assert g.steps_per_period == 64
    assert list(g.columns(EVEN, 0)[:3]) == [0, 2, 4]
    assert list(g.columns(ODD, 0)[:3]) == [1, 3, 5]
    assert list(g.columns(EVEN, 1)[:3]) == [1, 3, 5]


@pytest.mark.parametrize("N,K", [(0, 4), (5, 4), (2.5, 4)])
def test_grid_rejects_bad_sizes(N, K):
    with pytest.raises(ValueError):
        StaggeredGrid(N, K)


def test_zero_data():
    g = StaggeredGrid(8, 8)
    assert np.all(discretize_u0(g, lambda x: 0 * x).values == 0)
    v = discretize_v0(g, lambda x: 0 * x)
    assert np.ptp(v.values) == 0


def test_sine_symmetric_cells():
    u = discretize_u0(StaggeredGrid(2, 2), sin2pi)
    np.testing.assert_allclose(u.values, [0.0, 0.0], atol=1e-15)


def test_sine_cell_average_against_quad():
    g = StaggeredGrid(4, 4)
    u = discretize_u0(g, sin2pi)
    assert u.at(2) == pytest.approx(cell_average(lambda y: math.sin(2 * math.pi * y), 0.25, 0.125), abs=1e-13)
    assert u.at(2) == pytest.approx(0.9003, abs=1e-4)
    for m in u.columns:
        assert u.at(m) == pytest.approx(cell_average(lambda y: math.sin(2 * math.pi * y), m * g.dx, g.dx), abs=1e-13)


def test_discretize_rejects_nonzero_mean():
    with pytest.raises(ValueError, match="zero mean"):
        discretize_u0(StaggeredGrid(8, 8), lambda x: 1 + 0 * x)
    with pytest.raises(ValueError):
        discretize_u0(StaggeredGrid(4, 4), np.ones(4))


def test_discretize_enforces_bound():
    with pytest.raises(ValueError, match="bound"):
        discretize_u0(StaggeredGrid(8, 8), sin2pi, r=0.5)


def test_discretize_array_input_is_recentred():
    u = discretize_u0(StaggeredGrid(4, 4), np.array([1.0, -1.0, 2.0, -2.0 + 1e-10]))
    assert abs(u.values.sum()) < 1e-15


@settings(max_examples=30, deadline=None)
@given(N=st.integers(2, 40), a=st.floats(-1, 1), b=st.floats(-1, 1))
def test_v0_differences_reproduce_u0(N, a, b):
    g = StaggeredGrid(N, N)
    u0 = lambda x: a * np.sin(2 * np.pi * x) + b * np.cos(6 * np.pi * x)
    u = discretize_u0(g, u0)
    v = discretize_v0(g, u0)
    np.testing.assert_allclose(u_from_v(v).values, u.values, atol=1e-14)


def test_v0_approximates_antiderivative():
    errs = []
    for N in (16, 32, 64):
        g = StaggeredGrid(N, N)
        F = lambda x: -np.cos(2 * np.pi * x) / (2 * np.pi)
        v = discretize_v0(g, sin2pi, anchor=float(F(-g.dx)))
        errs.append(np.max(np.abs(v.values - F(v.x))))
    assert max(errs) < 1e-12  # cell averages telescope to exact nodal values


def test_v0_anchor():
    g = StaggeredGrid(8, 8)
    v = discretize_v0(g, sin2pi, anchor=3.0)
    assert v.at(-1) == pytest.approx(3.0)


def test_u_from_v_examples():
    g = StaggeredGrid(8, 8)
    assert np.all(u_from_v(GridField(g, ODD, 0, np.full(8, 2.0))).values == 0)
    # v_{m+1} = a (m+1) per column is not periodic; use the difference identity on one period
    a = 0.01
    v = GridField(g, ODD, 0, a * (2 * np.arange(8) + 1))
    u = u_from_v(v)
    np.testing.assert_allclose(u.values[1:], a / g.dx)


def test_periodic_indexing():
    g = StaggeredGrid(8, 8)
    u = discretize_u0(g, sin2pi)
    for m in u.columns:
        assert u.at(m) == u.at(m + 16) == u.at(m - 16)
    with pytest.raises(IndexError):
        u.at(1)


def test_field_shape_and_parity_checks():
    g = StaggeredGrid(4, 4)
    with pytest.raises(ValueError):
        GridField(g, EVEN, 0, np.zeros(3))
    with pytest.raises(ValueError):
        GridField(g, 2, 0, np.zeros(4))
    with pytest.raises(ValueError):
        integrate_u(GridField(g, ODD, 0, np.zeros(4)))
    with pytest.raises(ValueError):
        u_from_v(GridField(g, EVEN, 0, np.zeros(4)))


def _history():
    g = StaggeredGrid(16, 16)
    cfg = SchemeConfig(quadratic(), g)
    u = discretize_u0(g, lambda x: 0.2 * sin2pi(x))
    return g, solve(cfg, u, 6), solve(cfg, integrate_u(u), 6)


def test_reconstruction_at_nodes():
    g, ut, vt = _history()
    for k in (0, 3, 6):
        f = ut.at_level(k)
        np.testing.assert_array_equal(eval_u_delta(ut, f.x, k * g.dt), f.values)
        fv = vt.at_level(k)
        np.testing.assert_allclose(eval_v_delta(vt, fv.x, k * g.dt), fv.values, atol=1e-15)


def test_v_delta_midpoint_and_slope():
    g, ut, vt = _history()
    k = 3
    t = k * g.dt + 0.3 * g.dt
    fv = vt.at_level(k)
    m = fv.columns[2]
    mid = eval_v_delta(vt, (m + 1) * g.dx, t)
    assert mid == pytest.approx(0.5 * (fv.at(m) + fv.at(m + 2)))
    # within one linear piece the centred difference equals u_Delta
    x = (m + 1) * g.dx
    h = 0.4 * g.dx
    slope = (eval_v_delta(vt, x + h, t) - eval_v_delta(vt, x - h, t)) / (2 * h)
    assert slope == pytest.approx(eval_u_delta(ut, x, t), abs=1e-12)


def test_v_delta_continuous():
    g, _, vt = _history()
    t = 4 * g.dt
    edges = (vt.at_level(4).columns) * g.dx
    eps = 1e-12
    np.testing.assert_allclose(eval_v_delta(vt, edges - eps, t), eval_v_delta(vt, edges + eps, t), atol=1e-10)


def test_reconstruction_outside_history():
    g, ut, _ = _history()
    with pytest.raises(ValueError):
        eval_u_delta(ut, 0.1, 10 * g.dt)


def test_csv_and_binary_round_trip(tmp_path):
    g = StaggeredGrid(8, 16)
    u = discretize_u0(g, lambda x: 0.3 * sin2pi(x))
    u.k = 3
    write_field_csv(tmp_path / "u.csv", u)
    lines = (tmp_path / "u.csv").read_text().splitlines()
    assert lines[0] == "m,x_m,value"
    back = read_field_csv(tmp_path / "u.csv", g, EVEN, 3)
    np.testing.assert_array_equal(back.values, u.values)
    p = save_field(tmp_path / "u.npz", u)
    again = load_field(p)
    assert (again.grid, again.parity, again.k) == (g, EVEN, 3)
    np.testing.assert_array_equal(again.values, u.values)
