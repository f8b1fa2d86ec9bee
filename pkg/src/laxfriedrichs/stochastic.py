"""Controlled backward random walks on the odd grid.

A walk starts at the apex (x_n, t_L) and steps to x - dx with probability
rho_bar = 1/2 + lambda xi / 2, or to x + dx with probability 1/2 - lambda xi / 2,
one level per backward time step. Expectations are evaluated exactly by
backward value recursion over the cone; Monte Carlo is only used for path
sampling.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .flux import legendre
from .grid import EVEN, ODD, GridField
from .scheme import SchemeConfig, Trajectory

log = logging.getLogger(__name__)


class ClampWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class WalkCone:
    """Backward cone of odd-grid nodes below the apex (x_n, t_depth)."""

    apex: int
    depth: int

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("cone depth must be at least 1")
        if (self.apex + self.depth) % 2 == 0:
            raise ValueError(f"apex column {self.apex} at level {self.depth} is not on the odd grid")

    def columns(self, k: int) -> np.ndarray:
        """Unwrapped columns of level k: |m - n| <= depth - k, same parity."""
        w = self.depth - k
        return self.apex - w + 2 * np.arange(w + 1)

    @property
    def node_count(self) -> int:
        return sum(self.depth - k + 1 for k in range(1, self.depth + 1))


@dataclass
class VelocityField:
    """xi^k on levels 1..depth of a cone, clamped to [-1/lambda, 1/lambda]."""

    cone: WalkCone
    lam: float
    levels: dict[int, np.ndarray]
    clamped: int = 0

    def __post_init__(self):
        bound = 1.0 / self.lam
        for k, vals in self.levels.items():
            vals = np.asarray(vals, dtype=float)
            if vals.shape != self.cone.columns(k).shape:
                raise ValueError(f"level {k}: expected {self.cone.columns(k).size} values")
            over = np.abs(vals) > bound
            self.clamped += int(np.count_nonzero(over))
            self.levels[k] = np.clip(vals, -bound, bound)

    @classmethod
    def constant(cls, cone: WalkCone, lam: float, value: float = 0.0) -> VelocityField:
        return cls(cone, lam, {k: np.full(cone.columns(k).size, float(value)) for k in range(1, cone.depth + 1)})

    def rho_left(self, k: int) -> np.ndarray:
        """rho_bar: probability of moving to x - dx at the previous level."""
        return 0.5 + 0.5 * self.lam * self.levels[k]

    def rho_right(self, k: int) -> np.ndarray:
        return 0.5 - 0.5 * self.lam * self.levels[k]


def occupation(xi: VelocityField) -> dict[int, np.ndarray]:
    """Probability of the walk sitting at each cone column, per level."""
    cone = xi.cone
    occ = {cone.depth: np.ones(1)}
    for k in range(cone.depth, 0, -1):
        p = occ[k]
        nxt = np.zeros(p.size + 1)
        nxt[:-1] += p * xi.rho_left(k)
        nxt[1:] += p * xi.rho_right(k)
        occ[k - 1] = nxt
    return occ


def _terminal_values(v0, cone: WalkCone, grid) -> np.ndarray:
    cols = cone.columns(0)
    if isinstance(v0, GridField):
        if v0.parity != ODD or v0.k != 0:
            raise ValueError("terminal data must be the odd field at level 0")
        return v0.at(cols)
    if callable(v0):
        return np.asarray(v0(cols * grid.dx), dtype=float)
    vals = np.asarray(v0, dtype=float)
    if vals.shape != cols.shape:
        raise ValueError(f"expected {cols.size} terminal values")
    return vals


def minimizing_velocity_field(v_trajectory: Trajectory, config: SchemeConfig, cone: WalkCone) -> VelocityField:
    """xi*^k_m = H_p(x_m, t_{k-1}, c + D_x v^{k-1}_m) on the cone."""
    grid = config.grid
    levels = {}
    for k in range(1, cone.depth + 1):
        try:
            vprev = v_trajectory.at_level(k - 1)
        except KeyError:
            raise ValueError(f"v trajectory is missing level {k - 1}") from None
        cols = cone.columns(k)
        du = (vprev.at(cols + 1) - vprev.at(cols - 1)) / (2 * grid.dx)
        levels[k] = config.model.H_p(cols * grid.dx, grid.t(k - 1), config.c + du)
    xi = VelocityField(cone, grid.lam, levels)
    if xi.clamped:
        warnings.warn(f"{xi.clamped} node(s) of the minimizing field hit the clamp |xi| = 1/lambda", ClampWarning)
    return xi


def _running_lagrangian(config: SchemeConfig, cols, k: int, xi_vals, tol=1e-13):
    grid = config.grid
    res = legendre(config.model, cols * grid.dx, grid.t(k - 1), xi_vals, tol=tol)
    return res.value - config.c * xi_vals


def _recursion(xi: VelocityField, terminal: np.ndarray, running: Callable[[int, np.ndarray], np.ndarray], dt: float):
    W = terminal
    for k in range(1, xi.cone.depth + 1):
        W = running(k, xi.cone.columns(k)) * dt + xi.rho_left(k) * W[:-1] + xi.rho_right(k) * W[1:]
    return float(W[0])


def expected_action(xi: VelocityField, cone: WalkCone, v0, config: SchemeConfig) -> float:
    """E[sum_k L^(c)(gamma^k, t_{k-1}, xi^k) dt + v0(gamma^0)] + h t_depth, computed exactly."""
    grid = config.grid
    terminal = _terminal_values(v0, cone, grid)

    def running(k, cols):
        return _running_lagrangian(config, cols, k, xi.levels[k])

    return _recursion(xi, terminal, running, grid.dt) + config.h * grid.t(cone.depth)


@dataclass
class BruteForceResult:
    value: float
    xi_levels: int
    gap_estimate: float
    controls: dict[int, np.ndarray]


def brute_force_value(
    cone: WalkCone, v0, config: SchemeConfig, xi_levels: int = 41, max_depth: int = 5
) -> BruteForceResult:
    """Infimum of the expected action over controls restricted to a uniform xi-grid.

    Each node's control only enters its own running cost and transition
    weights, so the infimum decouples into independent 1-D searches run
    backward level by level.
    """
    if cone.depth > max_depth:
        raise ValueError(f"cone depth {cone.depth} exceeds the brute-force limit {max_depth}")
    if xi_levels < 2:
        raise ValueError("need at least two control levels")
    grid = config.grid
    bound = 1.0 / grid.lam
    xis = np.linspace(-bound, bound, xi_levels)
    spacing = xis[1] - xis[0]
    W = _terminal_values(v0, cone, grid)
    controls = {}
    gap = 0.0
    for k in range(1, cone.depth + 1):
        cols = cone.columns(k)
        C, XI = np.meshgrid(cols, xis, indexing="ij")
        res = legendre(config.model, C * grid.dx, grid.t(k - 1), XI, tol=1e-13)
        Lc = res.value - config.c * XI
        rho_l = 0.5 + 0.5 * grid.lam * XI
        total = Lc * grid.dt + rho_l * W[:-1, None] + (1 - rho_l) * W[1:, None]
        j = np.argmin(total, axis=1)
        rows = np.arange(cols.size)
        controls[k] = xis[j]
        # quadratic loss from rounding the optimal control to the grid: L_xi_xi = 1/H_pp
        curv = 1.0 / config.model.H_pp(cols * grid.dx, grid.t(k - 1), res.maximizer[rows, j])
        gap += grid.dt * float(np.max(0.5 * curv * (0.5 * spacing) ** 2))
        W = total[rows, j]
    return BruteForceResult(
        value=float(W[0]) + config.h * grid.t(cone.depth),
        xi_levels=xi_levels,
        gap_estimate=gap,
        controls=controls,
    )


@dataclass
class PathSample:
    seed: int
    index: int
    gamma: np.ndarray
    eta: np.ndarray


@dataclass
class PathBundle:
    """Sampled walks; row i of ``gamma``/``eta`` is sample i, column k is level k."""

    seed: int
    cone: WalkCone
    t: np.ndarray
    gamma: np.ndarray
    eta: np.ndarray

    def __len__(self) -> int:
        return self.gamma.shape[0]

    def __getitem__(self, i: int) -> PathSample:
        return PathSample(self.seed, i, self.gamma[i], self.eta[i])

    @property
    def mean_path(self) -> np.ndarray:
        return self.gamma.mean(axis=0)

    @property
    def mean_path_stderr(self) -> np.ndarray:
        n = len(self)
        if n < 2:
            return np.full(self.gamma.shape[1], np.nan)
        return self.gamma.std(axis=0, ddof=1) / np.sqrt(n)

    @property
    def d_tilde(self) -> np.ndarray:
        return np.abs(self.gamma - self.eta).mean(axis=0)

    @property
    def sigma_tilde(self) -> np.ndarray:
        return ((self.gamma - self.eta) ** 2).mean(axis=0)


def _uniforms(seed: int, n_samples: int, depth: int) -> np.ndarray:
    # counter-based stream: sample i, level k always maps to the same counter
    gen = np.random.Generator(np.random.Philox(key=int(seed)))
    return gen.random((n_samples, depth))


def sample_paths(xi: VelocityField, cone: WalkCone, n_samples: int, seed: int, dx: float, dt: float) -> PathBundle:
    """Draw ``n_samples`` walks under mu(.; xi)."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    L = cone.depth
    U = _uniforms(seed, n_samples, L)
    idx = np.zeros(n_samples, dtype=int)  # index within the level's column array
    cols = np.empty((n_samples, L + 1), dtype=int)
    drift = np.zeros((n_samples, L + 1))
    cols[:, L] = cone.apex
    for k in range(L, 0, -1):
        xk = xi.levels[k][idx]
        left = U[:, L - k] < 0.5 + 0.5 * xi.lam * xk
        drift[:, k - 1] = drift[:, k] + xk * dt
        idx = np.where(left, idx, idx + 1)
        cols[:, k - 1] = cone.columns(k - 1)[idx]
    gamma = cols * dx
    eta = cone.apex * dx - drift
    return PathBundle(int(seed), cone, np.arange(L + 1) * dt, gamma, eta)


@dataclass
class EtaReport:
    t: np.ndarray
    d_tilde: np.ndarray
    sigma_tilde: np.ndarray
    bound: np.ndarray
    d_exact: bool
    d_stderr: np.ndarray | None = None

    @property
    def jensen_holds(self) -> bool:
        tol = 0.0 if self.d_exact else 1.0
        slack = 0.0 if self.d_stderr is None else 3 * 2 * self.d_tilde * self.d_stderr
        return bool(np.all(self.d_tilde**2 <= self.sigma_tilde * (1 + 1e-12) + 1e-300 + tol * slack))

    @property
    def variance_bound_holds(self) -> bool:
        return bool(np.all(self.sigma_tilde <= self.bound * (1 + 1e-12)))


def eta_deviation(
    xi: VelocityField,
    cone: WalkCone,
    dx: float,
    dt: float,
    state_budget: int = 200_000,
    n_samples: int = 100_000,
    seed: int = 0,
) -> EtaReport:
    """Per-level E|gamma^k - eta^k| and E|gamma^k - eta^k|^2 with the bound (t_L - t_k) dx / lambda.

    The deviation gamma - eta is a martingale whose increment at a node with
    control xi has conditional variance dx^2 - (xi dt)^2, so the second moment
    follows exactly from occupation probabilities. The first moment needs the
    joint law of (position, deviation); it is propagated exactly while the
    state count stays within ``state_budget`` and estimated by Monte Carlo
    otherwise.
    """
    L = cone.depth
    lam = dt / dx
    occ = occupation(xi)
    sigma = np.zeros(L + 1)
    for k in range(L - 1, -1, -1):
        k1 = k + 1
        sigma[k] = sigma[k1] + float(np.sum(occ[k1] * (dx**2 - (xi.levels[k1] * dt) ** 2)))
    t = np.arange(L + 1) * dt
    bound = (t[L] - t) * dx / lam

    d = np.zeros(L + 1)
    exact = True
    stderr = None
    # states: level-index -> {deviation: prob}
    states: dict[tuple[int, float], float] = {(0, 0.0): 1.0}
    for k in range(L, 0, -1):
        nxt: dict[tuple[int, float], float] = {}
        xk = xi.levels[k]
        for (i, dev), p in states.items():
            x = xk[i]
            pl = 0.5 + 0.5 * lam * x
            for j, step, pj in ((i, -dx, pl), (i + 1, dx, 1.0 - pl)):
                if pj <= 0.0:
                    continue
                key = (j, round(dev + step + x * dt, 14))
                nxt[key] = nxt.get(key, 0.0) + p * pj
        states = nxt
        if len(states) > state_budget:
            exact = False
            break
        d[k - 1] = sum(p * abs(dev) for (_, dev), p in states.items())
    if not exact:
        paths = sample_paths(xi, cone, n_samples, seed, dx, dt)
        dev = np.abs(paths.gamma - paths.eta)
        d = dev.mean(axis=0)
        stderr = dev.std(axis=0, ddof=1) / np.sqrt(n_samples)
    return EtaReport(t=t, d_tilde=d, sigma_tilde=sigma, bound=bound, d_exact=exact, d_stderr=stderr)


@dataclass
class SandwichResult:
    lower: float
    upper: float
    u_value: float
    theta: float
    dx: float

    def holds(self, theta: float) -> bool:
        return self.lower - theta * self.dx <= self.u_value <= self.upper + theta * self.dx


def entropy_sandwich(
    v_trajectory: Trajectory, config: SchemeConfig, apex: int, level: int, u0: GridField
) -> SandwichResult:
    """Both expectation bounds on u^level_{apex+1} from the walks of the neighbouring apexes.

    The upper bound follows the minimising walk from x_apex with initial data
    shifted by +dx; the lower bound follows the walk from x_{apex+2} with
    initial data shifted by -dx. ``theta`` is the smallest constant for which
    the two-sided inequality holds with slack theta * dx.
    """
    if u0.parity != EVEN or u0.k != 0:
        raise ValueError("u0 must be the even field at level 0")
    grid = config.grid

    def bound(apex_col: int, shift: int) -> float:
        cone = WalkCone(apex_col, level)
        xi = minimizing_velocity_field(v_trajectory, config, cone)
        terminal = u0.at(cone.columns(0) + shift)

        def running(k, cols):
            res = legendre(config.model, cols * grid.dx, grid.t(k - 1), xi.levels[k], tol=1e-13)
            return -config.model.H_x(cols * grid.dx, grid.t(k - 1), res.maximizer)

        return _recursion(xi, terminal, running, grid.dt)

    upper = bound(apex, +1)
    lower = bound(apex + 2, -1)
    v = v_trajectory.at_level(level)
    u_val = float((v.at(apex + 2) - v.at(apex)) / (2 * grid.dx))
    theta = max(0.0, (u_val - upper) / grid.dx, (lower - u_val) / grid.dx)
    return SandwichResult(lower=lower, upper=upper, u_value=u_val, theta=theta, dx=grid.dx)
