"""Lax-Friedrichs steppers for u (conservation law) and v (Hamilton-Jacobi)."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .flux import AprioriConstants, FluxModel
from .grid import EVEN, ODD, GridField, StaggeredGrid, u_from_v

log = logging.getLogger(__name__)


class CFLViolation(RuntimeError):
    def __init__(self, k: int, column: int, value: float):
        self.k = k
        self.column = column
        self.value = value
        super().__init__(f"CFL violated at step k={k}, column m={column}: |lambda H_p| = {value:.6f} >= 1")


class CFLWarning(RuntimeWarning):
    pass


@dataclass
class SchemeConfig:
    model: FluxModel
    grid: StaggeredGrid
    c: float = 0.0
    h: float = 0.0
    abort_on_cfl: bool = True
    c_window: tuple[float, float] | None = None

    def __post_init__(self):
        if self.c_window is not None:
            lo, hi = self.c_window
            if not lo <= self.c <= hi:
                raise ValueError(f"c={self.c} outside the configured window [{lo}, {hi}]")


def _cfl_ratio(field_u: GridField, config: SchemeConfig) -> np.ndarray:
    grid = config.grid
    return np.abs(grid.lam * config.model.H_p(field_u.x, field_u.t, config.c + field_u.values))


def cfl_margin(field: GridField, config: SchemeConfig) -> float:
    """min over columns of 1 - |lambda H_p(x_m, t_k, c + u^k_m)|."""
    u = field if field.parity == EVEN else u_from_v(field)
    return float(1.0 - np.max(_cfl_ratio(u, config)))


def _check_cfl(u: GridField, config: SchemeConfig) -> None:
    ratio = _cfl_ratio(u, config)
    j = int(np.argmax(ratio))
    if ratio[j] >= 1.0:
        if config.abort_on_cfl:
            raise CFLViolation(u.k, int(u.columns[j]), float(ratio[j]))
        warnings.warn(str(CFLViolation(u.k, int(u.columns[j]), float(ratio[j]))), CFLWarning, stacklevel=3)


def step_u(field: GridField, config: SchemeConfig) -> GridField:
    """u^{k+1}_{m+1} = (u_m + u_{m+2})/2 - lambda/2 [H(x_{m+2}, t_k, c+u_{m+2}) - H(x_m, t_k, c+u_m)]."""
    if field.parity != EVEN:
        raise ValueError("step_u expects an even-parity field")
    _check_cfl(field, config)
    grid = config.grid
    a = field.values
    F = config.model.H(field.x, field.t, config.c + a)
    a_next = np.roll(a, -1)
    new = 0.5 * (a + a_next) - 0.5 * grid.lam * (np.roll(F, -1) - F)
    # output column m_j + 1: entry j if offset was 0, entry j + 1 (mod N) if it was 1
    return GridField(grid, EVEN, field.k + 1, np.roll(new, field.offset))


def step_v(field: GridField, config: SchemeConfig) -> GridField:
    """v^{k+1}_m = (v_{m-1} + v_{m+1})/2 - dt [H(x_m, t_k, c + D_x v^k_{m+1}) - h]."""
    if field.parity != ODD:
        raise ValueError("step_v expects an odd-parity field")
    grid = config.grid
    u = u_from_v(field)
    _check_cfl(u, config)
    cols = u.columns
    avg = 0.5 * (field.at(cols - 1) + field.at(cols + 1))
    vals = avg - grid.dt * (config.model.H(u.x, u.t, config.c + u.values) - config.h)
    # new v lives on the columns of u^k, which are the odd columns of level k+1
    out = GridField(grid, ODD, field.k + 1, np.zeros(grid.N))
    out.values[(cols - out.offset) // 2] = vals
    return out


def one_sided_lipschitz(u: GridField) -> float:
    """E^k = max_m (u_{m+2} - u_m) / (2 dx)."""
    return float(np.max(np.roll(u.values, -1) - u.values) / (2 * u.grid.dx))


@dataclass
class Trajectory:
    config: SchemeConfig
    snapshots: list[GridField] = field(default_factory=list)
    k: list[int] = field(default_factory=list)
    t: list[float] = field(default_factory=list)
    mean: list[float] = field(default_factory=list)
    max_abs: list[float] = field(default_factory=list)
    cfl_margin: list[float] = field(default_factory=list)
    E_k: list[float] = field(default_factory=list)

    @property
    def parity(self) -> int:
        return self.snapshots[0].parity

    def record(self, f: GridField, keep: bool) -> None:
        u = f if f.parity == EVEN else u_from_v(f)
        self.k.append(f.k)
        self.t.append(f.t)
        self.mean.append(u.mean())
        self.max_abs.append(float(np.max(np.abs(u.values))))
        self.cfl_margin.append(float(1.0 - np.max(_cfl_ratio(u, self.config))))
        self.E_k.append(one_sided_lipschitz(u))
        if keep:
            self.snapshots.append(f.copy())

    def diagnostics(self) -> dict[str, list]:
        return {
            "k": list(self.k),
            "t": list(self.t),
            "mean": list(self.mean),
            "max_abs": list(self.max_abs),
            "cfl_margin": list(self.cfl_margin),
            "E_k": list(self.E_k),
        }

    def at_level(self, k: int) -> GridField:
        for f in self.snapshots:
            if f.k == k:
                return f
        raise KeyError(f"level {k} not recorded")

    @property
    def final(self) -> GridField:
        return self.snapshots[-1]


def solve(
    config: SchemeConfig,
    initial: GridField,
    k_end: int,
    record_every: int = 1,
) -> Trajectory:
    """Step ``initial`` forward ``k_end`` times, recording diagnostics every step.

    Snapshots are kept every ``record_every`` steps plus the final one.
    """
    if k_end < 0:
        raise ValueError("k_end must be non-negative")
    stepper = step_u if initial.parity == EVEN else step_v
    traj = Trajectory(config)
    f = initial.copy()
    traj.record(f, keep=True)
    for i in range(1, k_end + 1):
        f = stepper(f, config)
        traj.record(f, keep=(i % record_every == 0) or i == k_end)
    return traj


def entropy_hypotheses(
    constants: AprioriConstants, config: SchemeConfig, r: float | None = None
) -> dict[str, bool]:
    """Which hypotheses of the one-sided Lipschitz decay estimate hold on this mesh."""
    grid = config.grid
    lam, dx, dt = grid.lam, grid.dx, grid.dt
    r = constants.r if r is None else r
    Hxp, Hpp, eta, E = constants.H_xp_star, constants.H_pp_star, constants.eta, constants.E_star
    us = np.linspace(-constants.u_star, constants.u_star, 257)
    xs = np.arange(64) / 64
    X, U = np.meshgrid(xs, us, indexing="ij")
    c_grid = np.unique(np.linspace(constants.c_range[0], constants.c_range[1], 9))
    sup_hp = 0.0
    for ts in np.arange(16) / 16 if config.model.t_dependent else (0.0,):
        for c in c_grid:
            sup_hp = max(sup_hp, float(np.max(np.abs(config.model.H_p(X, ts, c + U)))))
    denom = E * Hpp + 2 * Hxp
    return {
        "lambda_below_lambda1": lam < constants.lambda1,
        "dt_below_half_inverse_eta": dt < 1.0 / (2 * eta),
        "dt_below_parabola_bound": denom == 0 or dt < 1.0 / denom,
        "cfl_with_xp_correction": lam * (sup_hp + Hxp * 2 * dx) < 1.0,
        "lambda_below_r_bound": lam <= (1 - 2 * Hxp * dt) / (r * Hpp + (1 + Hpp) * dx),
    }
