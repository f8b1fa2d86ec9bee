"""Space-time periodic difference solutions and the discrete effective Hamiltonian."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed

from .grid import EVEN, ODD, GridField, integrate_u
from .scheme import SchemeConfig, step_u, step_v

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    pass


def l1_distance(a: GridField, b: GridField) -> float:
    return float(np.sum(np.abs(a.values - b.values)) * 2 * a.grid.dx)


def _rewind(f: GridField) -> GridField:
    # after a whole number of periods the field sits on the same columns as at k = 0
    return GridField(f.grid, f.parity, 0, f.values)


def time_one_map(u: GridField, config: SchemeConfig, keep: bool = False):
    """Advance one period (2K steps); optionally also return the snapshots k = 0..2K-1."""
    snaps = []
    f = u
    for _ in range(config.grid.steps_per_period):
        if keep:
            snaps.append(f)
        f = step_u(f, config)
    f = _rewind(f)
    return (f, snaps) if keep else f


@dataclass
class PeriodicState:
    c: float
    config: SchemeConfig
    u0: GridField
    period: list[GridField]
    residuals: list[float]
    iterations: int
    rho: float
    h_bar: float | None = None
    h_bar_gap: float | None = None
    v0: GridField | None = None
    b: float | None = None

    @property
    def grid(self):
        return self.config.grid

    @property
    def residual(self) -> float:
        return self.residuals[-1] if self.residuals else 0.0


def _contraction_rate(residuals: list[float]) -> float:
    r = np.asarray(residuals)
    r = r[r > 0]
    if r.size < 2:
        return 0.0
    return float(np.median(r[1:] / r[:-1]))


def find_periodic_u(
    config: SchemeConfig,
    tol: float = 1e-10,
    max_periods: int = 1000,
    u_start: GridField | None = None,
) -> PeriodicState:
    """Iterate the time-1 map until successive periods differ by at most ``tol`` in L1."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    grid = config.grid
    u = GridField(grid, EVEN, 0, np.zeros(grid.N)) if u_start is None else _rewind(u_start.copy())
    if u.parity != EVEN:
        raise ValueError("u_start must be an even-parity field")
    if abs(u.mean()) > 1e-12:
        raise ValueError(f"u_start must have zero mean, found {u.mean():.3e}")
    residuals: list[float] = []
    for it in range(1, max_periods + 1):
        nxt = time_one_map(u, config)
        residuals.append(l1_distance(nxt, u))
        u = nxt
        if residuals[-1] <= tol:
            break
    else:
        monotone = bool(np.all(np.diff(residuals) < 0))
        raise ConvergenceError(
            f"no fixed point within {max_periods} periods (last residual {residuals[-1]:.3e}, "
            f"residuals {'decreasing' if monotone else 'not monotone'})"
        )
    _, period = time_one_map(u, config, keep=True)
    rho = _contraction_rate(residuals)
    log.info("c=%g: fixed point after %d periods, residual %.3e, rho %.4f", config.c, it, residuals[-1], rho)
    return PeriodicState(
        c=config.c, config=config, u0=u, period=period, residuals=residuals, iterations=it, rho=rho
    )


def contraction_history(
    config: SchemeConfig, u_a: GridField, u_b: GridField, max_periods: int = 500, floor: float = 1e-12
) -> np.ndarray:
    """L1 distance between two runs at integer times, until it drops below ``floor``."""
    a, b = _rewind(u_a.copy()), _rewind(u_b.copy())
    dist = [l1_distance(a, b)]
    for _ in range(max_periods):
        if dist[-1] < floor:
            break
        a, b = time_one_map(a, config), time_one_map(b, config)
        dist.append(l1_distance(a, b))
    return np.asarray(dist)


@dataclass
class EffectiveValue:
    method_a: float
    method_b: float
    drifts: np.ndarray

    @property
    def value(self) -> float:
        return self.method_a

    @property
    def gap(self) -> float:
        return abs(self.method_a - self.method_b)


def effective_hamiltonian(
    state: PeriodicState, config: SchemeConfig | None = None, periods: int = 8, average_last: int = 4, tol: float | None = None
) -> EffectiveValue:
    """Period average of H along the fixed point, and minus the per-period drift of the v-scheme."""
    config = state.config if config is None else config
    if average_last > periods:
        raise ValueError("average_last cannot exceed periods")
    grid = config.grid
    w = 2 * grid.dx * grid.dt
    a = sum(float(np.sum(config.model.H(f.x, f.t, config.c + f.values))) for f in state.period) * w

    vcfg = replace(config, h=0.0)
    v = integrate_u(state.u0)
    drifts = []
    for _ in range(periods):
        start = float(np.mean(v.values))
        for _ in range(grid.steps_per_period):
            v = step_v(v, vcfg)
        v = _rewind(v)
        drifts.append(float(np.mean(v.values)) - start)
    drifts = np.asarray(drifts)
    b = 0.0 - float(np.mean(drifts[-average_last:]))
    res = EffectiveValue(a, b, drifts)
    limit = 10 * (tol if tol is not None else max(state.residual, 1e-12))
    if res.gap > limit:
        warnings.warn(f"effective Hamiltonian methods disagree by {res.gap:.3e}; periodic state may not be converged")
    state.h_bar = res.value
    state.h_bar_gap = res.gap
    return res


@dataclass
class PeriodicV:
    v0: GridField
    b: float
    spread: float


def periodic_v(state: PeriodicState, config: SchemeConfig | None = None, tol: float = 1e-9) -> PeriodicV:
    """v-bar at level 0 and the constant b with psi^1(v-bar) = v-bar - b."""
    config = state.config if config is None else config
    if state.h_bar is None:
        effective_hamiltonian(state, config)
    vcfg = replace(config, h=state.h_bar)
    v0 = integrate_u(state.u0)
    v = v0
    for _ in range(config.grid.steps_per_period):
        v = step_v(v, vcfg)
    diff = _rewind(v).values - v0.values
    spread = float(np.max(diff) - np.min(diff))
    if spread > tol:
        raise ConvergenceError(f"v-bar is not periodic up to a constant: spread {spread:.3e} > {tol:.1e}")
    b = -float(np.mean(diff))
    state.v0, state.b = v0, b
    return PeriodicV(v0, b, spread)


def second_differences(c: np.ndarray, h: np.ndarray) -> np.ndarray:
    """theta h[i-1] + (1-theta) h[i+1] - h[i], doubled; the plain second difference on uniform grids."""
    c, h = np.asarray(c, float), np.asarray(h, float)
    theta = (c[2:] - c[1:-1]) / (c[2:] - c[:-2])
    return 2 * (theta * h[:-2] + (1 - theta) * h[2:] - h[1:-1])


@dataclass
class EffectiveCurve:
    c: np.ndarray
    h_bar: np.ndarray
    gap: np.ndarray
    residual: np.ndarray
    rho: np.ndarray
    failures: dict[float, str] = field(default_factory=dict)

    @property
    def second_difference(self) -> np.ndarray:
        return second_differences(self.c, self.h_bar)

    @property
    def min_second_difference(self) -> float:
        d = self.second_difference
        d = d[np.isfinite(d)]
        return float(np.min(d)) if d.size else float("nan")

    def sup_distance(self, other: EffectiveCurve) -> float:
        """sup over this curve's c-points of |h - h_other|, other interpolated linearly."""
        ref = np.interp(self.c, other.c, other.h_bar)
        return float(np.nanmax(np.abs(self.h_bar - ref)))

    def rows(self):
        sd = np.concatenate([[np.nan], self.second_difference, [np.nan]])
        for i in range(self.c.size):
            yield self.c[i], self.h_bar[i], self.gap[i], sd[i]


def _sweep_point(config: SchemeConfig, c: float, tol: float, max_periods: int):
    cfg = replace(config, c=float(c))
    try:
        state = find_periodic_u(cfg, tol=tol, max_periods=max_periods)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ev = effective_hamiltonian(state, cfg, tol=tol)
        return ev.value, ev.gap, state.residual, state.rho, None
    except Exception as exc:  # recorded, the sweep continues
        return np.nan, np.nan, np.nan, np.nan, f"{type(exc).__name__}: {exc}"


def sweep(
    config: SchemeConfig, c_list, tol: float = 1e-11, max_periods: int = 2000, n_jobs: int = 1
) -> EffectiveCurve:
    """h-bar over a sorted list of momenta, computed independently per point."""
    c = np.asarray(c_list, dtype=float)
    if c.size < 3:
        raise ValueError("a sweep needs at least 3 c-values")
    if np.any(np.diff(c) <= 0):
        raise ValueError("c_list must be strictly increasing")
    out = Parallel(n_jobs=n_jobs)(delayed(_sweep_point)(config, ci, tol, max_periods) for ci in c)
    h, gap, res, rho, err = zip(*out)
    failures = {float(ci): e for ci, e in zip(c, err) if e is not None}
    return EffectiveCurve(c, np.array(h), np.array(gap), np.array(res), np.array(rho), failures)
