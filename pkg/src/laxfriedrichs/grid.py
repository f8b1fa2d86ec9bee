"""Staggered even/odd grid, initial-data discretisation and reconstruction.

Column m sits at x_m = m * dx, level k at t_k = k * dt, dx = 1/(2N), dt = 1/(2K).
At level k the u-field lives on columns with m + k even and the v-field on
columns with m + k odd. Fields store their N values compactly: entry j is
column ``2 j + offset``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

EVEN = 0
ODD = 1


@dataclass(frozen=True)
class StaggeredGrid:
    N: int
    K: int

    def __post_init__(self):
        if int(self.N) != self.N or int(self.K) != self.K or self.N < 1 or self.K < 1:
            raise ValueError(f"N and K must be positive integers, got N={self.N}, K={self.K}")
        if self.N > self.K:
            raise ValueError(f"need N <= K so that lambda <= 1, got N={self.N}, K={self.K}")

    @property
    def dx(self) -> float:
        return 1.0 / (2 * self.N)

    @property
    def dt(self) -> float:
        return 1.0 / (2 * self.K)

    @property
    def lam(self) -> float:
        return self.N / self.K

    @property
    def steps_per_period(self) -> int:
        return 2 * self.K

    def x(self, m) -> np.ndarray:
        return np.asarray(m) * self.dx

    def t(self, k) -> np.ndarray:
        return np.asarray(k) * self.dt

    def offset(self, parity: int, k: int) -> int:
        """First column index (0 or 1) holding a value of the given parity at level k."""
        return (k + parity) % 2

    def columns(self, parity: int, k: int) -> np.ndarray:
        return 2 * np.arange(self.N) + self.offset(parity, k)

    def k_of(self, t: float) -> int:
        """Level k with t in [t_k, t_{k+1})."""
        return int(np.floor(t / self.dt + 1e-9))


@dataclass
class GridField:
    grid: StaggeredGrid
    parity: int
    k: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.N,):
            raise ValueError(f"expected {self.grid.N} values, got shape {self.values.shape}")
        if self.parity not in (EVEN, ODD):
            raise ValueError("parity must be EVEN (0) or ODD (1)")

    @property
    def offset(self) -> int:
        return self.grid.offset(self.parity, self.k)

    @property
    def columns(self) -> np.ndarray:
        return self.grid.columns(self.parity, self.k)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x(self.columns)

    @property
    def t(self) -> float:
        return float(self.grid.t(self.k))

    def mean(self) -> float:
        """Sum of values times 2 dx, the conserved quantity of the u-scheme."""
        return float(np.sum(self.values) * 2 * self.grid.dx)

    def at(self, m) -> np.ndarray:
        """Value at column(s) m, indices taken modulo 2N."""
        m = np.asarray(m) % (2 * self.grid.N)
        if np.any((m - self.offset) % 2):
            raise IndexError(f"column(s) of wrong parity for a field at level {self.k}")
        return self.values[(m - self.offset) // 2]

    def copy(self) -> GridField:
        return GridField(self.grid, self.parity, self.k, self.values.copy())


def _gauss_cell_averages(grid: StaggeredGrid, func: Callable, order: int, subcells: int) -> np.ndarray:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    centres = grid.x(grid.columns(EVEN, 0))
    h = 2 * grid.dx / subcells
    total = np.zeros(grid.N)
    for s in range(subcells):
        a = centres - grid.dx + s * h
        pts = a[:, None] + 0.5 * h * (nodes[None, :] + 1.0)
        total += 0.5 * h * np.sum(weights[None, :] * func(pts), axis=1)
    return total / (2 * grid.dx)


def torus_mean(func: Callable, order: int = 16, cells: int = 64) -> float:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    a = np.arange(cells) / cells
    pts = a[:, None] + 0.5 / cells * (nodes[None, :] + 1.0)
    return float(np.sum(0.5 / cells * weights[None, :] * func(pts)))


def discretize_u0(
    grid: StaggeredGrid,
    u0,
    order: int = 8,
    subcells: int = 4,
    mean_tol: float = 1e-8,
    r: float | None = None,
) -> GridField:
    """Cell averages of u0 over [x_m - dx, x_m + dx) at even columns, level 0.

    ``u0`` is a vectorised callable or an array of N cell averages. The result
    is re-centred to exact zero mean.
    """
    if callable(u0):
        mean = torus_mean(u0)
        if abs(mean) > mean_tol:
            raise ValueError(f"initial data must have zero mean, found {mean:.3e}")
        vals = _gauss_cell_averages(grid, u0, order, subcells)
    else:
        vals = np.asarray(u0, dtype=float)
        if vals.shape != (grid.N,):
            raise ValueError(f"expected {grid.N} cell averages, got shape {vals.shape}")
        if abs(vals.mean()) > mean_tol:
            raise ValueError(f"initial data must have zero mean, found {vals.mean():.3e}")
    vals = vals - vals.mean()
    if r is not None and np.max(np.abs(vals)) > r:
        raise ValueError(f"initial data exceeds the bound r={r}")
    return GridField(grid, EVEN, 0, vals)


def integrate_u(ufield: GridField, anchor: float = 0.0) -> GridField:
    """Odd field at the same level whose central difference is ``ufield``.

    The value at column ``ufield.columns[0] - 1`` is fixed to ``anchor``.
    """
    grid = ufield.grid
    if ufield.parity != EVEN:
        raise ValueError("integrate_u expects an even (u-type) field")
    vals = anchor + 2 * grid.dx * np.cumsum(ufield.values)
    # entry j of the odd field is column 2j + (1 - offset_u) ... align to its storage order
    odd = GridField(grid, ODD, ufield.k, np.zeros(grid.N))
    # column of cumulative value j is ufield.columns[j] + 1
    cols = (ufield.columns + 1) % (2 * grid.N)
    odd.values[(cols - odd.offset) // 2] = vals
    return odd


def discretize_v0(grid: StaggeredGrid, u0, anchor: float = 0.0, **kwargs) -> GridField:
    """v0 at odd columns, level 0, with D_x v0 equal to the discretised u0.

    ``anchor`` is v0(-dx).
    """
    return integrate_u(discretize_u0(grid, u0, **kwargs), anchor=anchor)


def u_from_v(vfield: GridField) -> GridField:
    """Central difference (v_{m+1} - v_{m-1}) / (2 dx) at the even columns."""
    if vfield.parity != ODD:
        raise ValueError("u_from_v expects an odd (v-type) field")
    grid = vfield.grid
    u = GridField(grid, EVEN, vfield.k, np.zeros(grid.N))
    cols = u.columns
    u.values = (vfield.at(cols + 1) - vfield.at(cols - 1)) / (2 * grid.dx)
    return u


def _field_at_time(history: Sequence[GridField], t) -> GridField:
    grid = history[0].grid
    k = grid.k_of(t)
    for f in history:
        if f.k == k:
            return f
    raise ValueError(f"time t={t} (level {k}) is not in the stored history")


def _as_history(fields) -> list[GridField]:
    if isinstance(fields, GridField):
        return [fields]
    return list(getattr(fields, "snapshots", fields))


def eval_u_delta(history, x, t: float) -> np.ndarray:
    """Step function u_Delta(x, t) = u^k_m on [x_{m-1}, x_{m+1}) x [t_k, t_{k+1})."""
    hist = _as_history(history)
    f = _field_at_time(hist, t)
    if f.parity != EVEN:
        raise ValueError("eval_u_delta needs an even-parity history")
    grid = f.grid
    x = np.asarray(x, dtype=float)
    # u^k_m covers [x_{m-1}, x_{m+1}); m + k even
    s = np.floor((x / grid.dx - (f.offset - 1)) / 2 + 1e-12)
    m = (f.offset + 2 * s).astype(int)
    return f.at(m)


def eval_v_delta(history, x, t: float) -> np.ndarray:
    """Piecewise-linear v_Delta(x, t); constant in t on [t_k, t_{k+1})."""
    hist = _as_history(history)
    f = _field_at_time(hist, t)
    if f.parity != ODD:
        raise ValueError("eval_v_delta needs an odd-parity history")
    grid = f.grid
    x = np.asarray(x, dtype=float)
    # nodes at columns offset + 2 s; segment [x_{m-1}, x_{m+1}) with m-1 = offset + 2 s
    s = np.floor((x / grid.dx - f.offset) / 2 + 1e-12)
    left = (f.offset + 2 * s).astype(int)
    xl = left * grid.dx
    vl = f.at(left)
    vr = f.at(left + 2)
    return vl + (vr - vl) * (x - xl) / (2 * grid.dx)
