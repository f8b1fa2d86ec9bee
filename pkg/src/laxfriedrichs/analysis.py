"""Reference solutions, error norms, order fits, long-run stability and characteristic curves."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from joblib import Parallel, delayed
from scipy import integrate, optimize

from .flux import AprioriConstants, FluxModel, apriori_constants, legendre
from .grid import EVEN, GridField, StaggeredGrid, discretize_u0, discretize_v0, eval_u_delta, eval_v_delta, integrate_u
from .periodic import PeriodicState, effective_hamiltonian, find_periodic_u
from .scheme import SchemeConfig, Trajectory, cfl_margin, one_sided_lipschitz, solve, step_u

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# reference solutions


@dataclass
class ReferenceSolution:
    provenance: str
    u: Callable | None = None
    v: Callable | None = None
    meta: dict = field(default_factory=dict)
    u_breakpoints: Callable | None = None


def _lagrangian_c(model: FluxModel, xi, c: float):
    res = legendre(model, 0.0, 0.0, xi, tol=1e-13)
    return res.value - c * xi, res.maximizer


def _hopf_lax_objective(model, v0, c, x, y, t):
    L, p = _lagrangian_c(model, (x - y) / t, c)
    return t * L + v0(y), p


def hopf_lax_minimizer(model: FluxModel, v0: Callable, c: float, x, t: float, y_resolution: int = 1024, zooms: int = 4):
    """Minimiser y* and minimum of t L^(c)((x - y)/t) + v0(y) over y, with v0 1-periodic."""
    if model.x_dependent or model.t_dependent:
        raise ValueError("straight-line minimisers need a flux independent of x and t")
    if t <= 0:
        raise ValueError("t must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    # minimisers satisfy (x - y)/t = H_p(c + v0'(y)); centre on the drift of c
    ys = np.linspace(0.0, 1.0, 4097)
    lip = float(np.max(np.abs(np.diff(v0(ys)) / np.diff(ys))))
    drift = float(model.H_p(0.0, 0.0, c))
    reach = float(np.max(np.abs(model.H_p(0.0, 0.0, np.array([c - lip, c + lip])) - drift)))
    half = 0.5 + t * reach
    n = int(np.ceil(y_resolution * 2 * half))
    offsets = np.linspace(-half, half, n + 1)
    Y = (x - t * drift)[:, None] + offsets[None, :]
    vals, _ = _hopf_lax_objective(model, v0, c, x[:, None], Y, t)
    j = np.argmin(vals, axis=1)
    best = Y[np.arange(x.size), j]
    width = offsets[1] - offsets[0]
    fine = np.linspace(-1.0, 1.0, 65)
    for _ in range(zooms):
        Y = best[:, None] + width * fine[None, :]
        vals, _ = _hopf_lax_objective(model, v0, c, x[:, None], Y, t)
        j = np.argmin(vals, axis=1)
        best = Y[np.arange(x.size), j]
        width *= fine[1] - fine[0]
    value, p = _hopf_lax_objective(model, v0, c, x, best, t)
    return best, value, p


def hopf_lax_reference(
    model: FluxModel, v0: Callable, c: float, x, t: float, h: float = 0.0, y_resolution: int = 1024
) -> np.ndarray:
    """v(x, t) = min_y {t L^(c)((x - y)/t) + v0(y)} + h t for a flux depending on p only."""
    _, value, _ = hopf_lax_minimizer(model, v0, c, x, t, y_resolution)
    out = value + h * t
    return float(out[0]) if np.ndim(x) == 0 else out


def hopf_lax_solution(model: FluxModel, v0: Callable, c: float = 0.0, h: float = 0.0, y_resolution: int = 1024):
    """ReferenceSolution with u = p*((x - y*)/t) - c and v from the variational formula."""

    def u(x, t):
        if t == 0:
            raise ValueError("use the initial data at t = 0")
        _, _, p = hopf_lax_minimizer(model, v0, c, x, t, y_resolution)
        return p - c

    def v(x, t):
        if t == 0:
            return v0(np.asarray(x, dtype=float))
        return hopf_lax_reference(model, v0, c, np.atleast_1d(x), t, h, y_resolution)

    return ReferenceSolution("hopf-lax", u=u, v=v, meta={"y_resolution": y_resolution, "c": c, "h": h})


def trajectory_reference(u_traj: Trajectory | None = None, v_traj: Trajectory | None = None) -> ReferenceSolution:
    """Fine-mesh reference backed by stored trajectories."""
    grid = (u_traj or v_traj).config.grid
    ref = ReferenceSolution("fine-mesh", meta={"N": grid.N, "K": grid.K, "dx": grid.dx})
    if u_traj is not None:
        ref.u = lambda x, t: eval_u_delta(u_traj, x, t)

        def bps(t):
            f = u_traj.at_level(grid.k_of(t))
            return (f.offset - 1 + 2 * np.arange(grid.N + 1)) * grid.dx

        ref.u_breakpoints = bps
    if v_traj is not None:
        ref.v = lambda x, t: eval_v_delta(v_traj, x, t)
    return ref


# ---------------------------------------------------------------------------
# error norms


def _cell_edges(f: GridField) -> np.ndarray:
    return (f.offset - 1 + 2 * np.arange(f.grid.N + 1)) * f.grid.dx


def u_l1_error(traj: Trajectory, reference: ReferenceSolution, t: float, order: int = 4) -> float:
    """L1 norm over one period of u_Delta(., t) - u_ref(., t).

    Breakpoints of both step functions are merged, so the quadrature is exact
    when the reference is itself piecewise constant.
    """
    grid = traj.config.grid
    f = traj.at_level(grid.k_of(t))
    edges = _cell_edges(f)
    pts = [edges]
    if reference.u_breakpoints is not None:
        b = np.asarray(reference.u_breakpoints(t))
        pts.append(edges[0] + np.mod(b - edges[0], 1.0))
    brk = np.unique(np.concatenate(pts))
    brk = brk[(brk >= edges[0]) & (brk <= edges[-1])]
    nodes, weights = np.polynomial.legendre.leggauss(order)
    a, b = brk[:-1], brk[1:]
    X = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * nodes[None, :]
    diff = np.abs(eval_u_delta(f, X.ravel(), t) - np.asarray(reference.u(X.ravel(), t))).reshape(X.shape)
    return float(np.sum(0.5 * (b - a)[:, None] * weights[None, :] * diff))


def _dense_points(grid: StaggeredGrid, per_cell: int) -> np.ndarray:
    n = 2 * grid.N * per_cell // 2
    return (np.arange(n) + 0.5) / n


def u_sup_error(traj: Trajectory, reference: ReferenceSolution, t: float, per_cell: int = 8) -> float:
    x = _dense_points(traj.config.grid, per_cell)
    return float(np.max(np.abs(eval_u_delta(traj, x, t) - np.asarray(reference.u(x, t)))))


def v_sup_error(traj: Trajectory, reference: ReferenceSolution, t: float, per_cell: int = 8) -> float:
    x = _dense_points(traj.config.grid, per_cell)
    return float(np.max(np.abs(eval_v_delta(traj, x, t) - np.asarray(reference.v(x, t)))))


def error_report(
    traj: Trajectory, reference: ReferenceSolution, t: float, norms=("L1", "C0"), per_cell: int = 8
) -> dict[str, float]:
    """Error norms at time t: L1 and C0 of u for even trajectories, C0 of v for odd ones."""
    out = {}
    if traj.parity == EVEN:
        if "L1" in norms:
            out["u_L1"] = u_l1_error(traj, reference, t)
        if "C0" in norms:
            out["u_C0"] = u_sup_error(traj, reference, t, per_cell)
    else:
        if "C0" in norms:
            out["v_C0"] = v_sup_error(traj, reference, t, per_cell)
    return out


# ---------------------------------------------------------------------------
# order fits and convergence studies


@dataclass
class OrderFit:
    mesh: np.ndarray
    dx: np.ndarray
    errors: np.ndarray
    slope: float
    intercept: float
    residual: float
    guaranteed: float | None = None

    @property
    def exact(self) -> bool:
        return bool(np.all(self.errors == 0))

    @property
    def monotone(self) -> bool:
        order = np.argsort(self.dx)[::-1]
        return bool(np.all(np.diff(self.errors[order]) < 0))

    @property
    def passes(self) -> bool:
        if self.exact:
            return True
        return self.guaranteed is None or self.slope >= self.guaranteed

    def as_dict(self) -> dict:
        return {
            "mesh": self.mesh.tolist(),
            "dx": self.dx.tolist(),
            "errors": self.errors.tolist(),
            "slope": None if self.exact else self.slope,
            "intercept": None if self.exact else self.intercept,
            "residual": None if self.exact else self.residual,
            "guaranteed": self.guaranteed,
            "exact": self.exact,
            "monotone": self.monotone,
            "passes": self.passes,
        }


def fit_order(dx, errors, mesh=None, guaranteed: float | None = None) -> OrderFit:
    """Least-squares slope of log(error) against log(dx), all points weighted equally."""
    dx = np.asarray(dx, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if dx.size < 3:
        raise ValueError("an order fit needs at least 3 meshes")
    mesh = np.asarray(mesh if mesh is not None else 1.0 / (2 * dx))
    if np.all(errors == 0):
        return OrderFit(mesh, dx, errors, math.inf, -math.inf, 0.0, guaranteed)
    if np.any(errors <= 0):
        raise ValueError("errors must be positive for a log-log fit")
    lx, le = np.log(dx), np.log(errors)
    (slope, intercept), res, *_ = np.polyfit(lx, le, 1, full=True)
    resid = float(np.sqrt(res[0] / dx.size)) if res.size else 0.0
    return OrderFit(mesh, dx, errors, float(slope), float(intercept), resid, guaranteed)


@dataclass
class InitialValueProblem:
    """Initial-value problem for u (and v = antiderivative of u) on the torus."""

    model: FluxModel
    u0: Callable
    t: float
    v0: Callable | None = None
    c: float = 0.0
    h: float = 0.0
    lam: float = 1.0

    def grid(self, N: int) -> StaggeredGrid:
        K = N / self.lam
        if abs(K - round(K)) > 1e-9:
            raise ValueError(f"N={N} is incompatible with lambda={self.lam}")
        return StaggeredGrid(N, int(round(K)))

    def config(self, N: int) -> SchemeConfig:
        return SchemeConfig(self.model, self.grid(N), c=self.c, h=self.h)

    def levels(self, grid: StaggeredGrid) -> int:
        k = self.t / grid.dt
        if abs(k - round(k)) > 1e-9:
            raise ValueError(f"t={self.t} is not a grid time for K={grid.K}")
        return int(round(k))

    def run_u(self, N: int) -> Trajectory:
        cfg = self.config(N)
        k = self.levels(cfg.grid)
        return solve(cfg, discretize_u0(cfg.grid, self.u0), k, record_every=k)

    def run_v(self, N: int) -> Trajectory:
        cfg = self.config(N)
        k = self.levels(cfg.grid)
        anchor = 0.0 if self.v0 is None else float(self.v0(-cfg.grid.dx))
        return solve(cfg, discretize_v0(cfg.grid, self.u0, anchor=anchor), k, record_every=k)


GUARANTEED = {"v_C0": 0.5, "u_L1": 0.25, "u_C0": 0.25}


def _mesh_error(problem: InitialValueProblem, N: int, norm: str, reference: ReferenceSolution) -> float:
    if norm == "v_C0":
        return v_sup_error(problem.run_v(N), reference, problem.t)
    traj = problem.run_u(N)
    if norm == "u_L1":
        return u_l1_error(traj, reference, problem.t)
    if norm == "u_C0":
        return u_sup_error(traj, reference, problem.t)
    raise ValueError(f"unknown norm {norm!r}; choose from {sorted(GUARANTEED)}")


def convergence_study(
    problem: InitialValueProblem,
    meshes,
    norm: str = "v_C0",
    reference: str | ReferenceSolution = "auto",
    fine_factor: int = 4,
    n_jobs: int = 1,
) -> OrderFit:
    """Errors over a mesh family at fixed lambda and the fitted order.

    ``reference`` is ``"hopf-lax"``, ``"fine-mesh"``, ``"auto"`` (Hopf-Lax when
    the flux depends on p only) or a ready ReferenceSolution.
    """
    meshes = sorted(int(n) for n in meshes)
    if len(meshes) < 3:
        raise ValueError("a convergence study needs at least 3 meshes")
    if norm not in GUARANTEED:
        raise ValueError(f"unknown norm {norm!r}; choose from {sorted(GUARANTEED)}")
    if isinstance(reference, str):
        policy = reference
        if policy == "auto":
            policy = "fine-mesh" if (problem.model.x_dependent or problem.model.t_dependent) else "hopf-lax"
        if policy == "hopf-lax":
            if problem.v0 is None:
                raise ValueError("hopf-lax reference needs the exact v0")
            reference = hopf_lax_solution(problem.model, problem.v0, problem.c, problem.h)
        elif policy == "fine-mesh":
            if fine_factor < 4:
                raise ValueError("fine-mesh references must be at least 4x finer than the finest mesh")
            Nf = fine_factor * meshes[-1]
            reference = trajectory_reference(
                u_traj=problem.run_u(Nf) if norm != "v_C0" else None,
                v_traj=problem.run_v(Nf) if norm == "v_C0" else None,
            )
        else:
            raise ValueError(f"unknown reference policy {policy!r}")
    errors = Parallel(n_jobs=n_jobs)(delayed(_mesh_error)(problem, N, norm, reference) for N in meshes)
    fit = fit_order([1.0 / (2 * N) for N in meshes], errors, mesh=meshes, guaranteed=GUARANTEED[norm])
    if not fit.monotone:
        log.warning("errors are not monotone in the mesh size: %s", fit.errors)
    return fit


# ---------------------------------------------------------------------------
# long-run stability


class StabilityError(AssertionError):
    def __init__(self, k: int, what: str):
        self.k = k
        super().__init__(f"step k={k}: {what}")


@dataclass
class StabilityReport:
    periods: int
    barrier: float
    max_abs_integer: np.ndarray
    cfl_initial: float
    cfl_min_per_period: np.ndarray
    t: np.ndarray
    E_k: np.ndarray
    decay_envelope: np.ndarray
    late_envelope: float
    late_start: float
    checks: dict[str, bool]

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def stability_longrun(
    config: SchemeConfig,
    u0: GridField,
    n_periods: int,
    constants: AprioriConstants | None = None,
    strict: bool = False,
) -> StabilityReport:
    """Run ``n_periods`` periods and check the L-infinity barrier, the CFL margin and the E^k envelopes.

    Checks: max|u| at integer times <= beta1(1) + 1; CFL margin never below
    half its initial value; E^k <= 2 e^{eta t}/(H*_pp t) for 1 <= k <= 2K;
    E^k <= 4 e eta / H*_pp once t_k > 1/eta. With ``strict`` the first
    failure raises StabilityError naming the step.
    """
    if n_periods < 1:
        raise ValueError("n_periods must be at least 1")
    if u0.parity != EVEN:
        raise ValueError("stability runs take an even field")
    grid = config.grid
    if constants is None:
        window = config.c_window or (config.c, config.c)
        constants = apriori_constants(config.model, t_max=1.0, lambda1=grid.lam, c_range=window)
    barrier = constants.beta1(1.0) + 1.0
    late_start = 1.0 / constants.eta
    late = constants.late_bound

    checks = {"barrier": True, "cfl_half": True, "decay_envelope": True, "late_envelope": True}

    def fail(name: str, k: int, msg: str):
        checks[name] = False
        if strict:
            raise StabilityError(k, msg)

    f = u0.copy()
    margin0 = cfl_margin(f, config)
    n = grid.steps_per_period
    total = n_periods * n
    E = np.empty(total + 1)
    E[0] = one_sided_lipschitz(f)
    max_int = [float(np.max(np.abs(f.values)))]
    cfl_min = []
    period_min = math.inf
    for k in range(1, total + 1):
        f = step_u(f, config)
        m = cfl_margin(f, config)
        period_min = min(period_min, m)
        if m < 0.5 * margin0 and checks["cfl_half"]:
            fail("cfl_half", k, f"CFL margin {m:.4f} fell below half its initial value {margin0:.4f}")
        E[k] = one_sided_lipschitz(f)
        tk = k * grid.dt
        if k <= n and E[k] > constants.decay_bound(tk) and checks["decay_envelope"]:
            fail("decay_envelope", k, f"E^k = {E[k]:.4f} exceeds 2e^(eta t)/(H_pp t)")
        if tk > late_start and E[k] > late and checks["late_envelope"]:
            fail("late_envelope", k, f"E^k = {E[k]:.4f} exceeds 4 e eta / H_pp = {late:.4f}")
        if k % n == 0:
            mx = float(np.max(np.abs(f.values)))
            max_int.append(mx)
            cfl_min.append(period_min)
            period_min = math.inf
            if mx > barrier and checks["barrier"]:
                fail("barrier", k, f"max|u| = {mx:.4f} exceeds beta1(1) + 1 = {barrier:.4f}")
    t = np.arange(total + 1) * grid.dt
    with np.errstate(divide="ignore"):
        decay = np.where(t > 0, constants.decay_bound(np.where(t > 0, t, 1.0)), np.inf)
    return StabilityReport(
        periods=n_periods,
        barrier=barrier,
        max_abs_integer=np.asarray(max_int),
        cfl_initial=margin0,
        cfl_min_per_period=np.asarray(cfl_min),
        t=t,
        E_k=E,
        decay_envelope=decay,
        late_envelope=late,
        late_start=late_start,
        checks=checks,
    )


# ---------------------------------------------------------------------------
# characteristics and rotation numbers


@dataclass
class CharacteristicCurve:
    s: np.ndarray
    x: np.ndarray
    step: float
    description: str

    @property
    def max_speed(self) -> float:
        return float(np.max(np.abs(np.diff(self.x) / np.diff(self.s))))


def _field_evaluator(source) -> tuple[Callable, FluxModel | None, float, str]:
    if isinstance(source, PeriodicState):
        period = source.period

        grid = source.grid

        def u(x, s):
            level = grid.k_of(s) % grid.steps_per_period
            return eval_u_delta(period, x, level * grid.dt)

        return u, source.config.model, source.config.c, f"periodic state c={source.c:g}, N={source.grid.N}"
    if isinstance(source, Trajectory):
        return (lambda x, s: eval_u_delta(source, x, s)), source.config.model, source.config.c, "trajectory"
    if callable(source):
        return source, None, 0.0, "callable field"
    raise TypeError("field source must be a PeriodicState, a Trajectory or a callable u(x, s)")


def characteristic_ode(
    source,
    x0: float,
    window: tuple[float, float],
    n_steps: int = 1000,
    model: FluxModel | None = None,
    c: float | None = None,
) -> CharacteristicCurve:
    """Integrate x'(s) = H_p(x, s, c + u(x, s)) with classical RK4 from s = window[0] to window[1].

    The window may run backwards in time. ``u`` is reconstructed from the
    source as a step function on the unrolled line.
    """
    u, src_model, src_c, desc = _field_evaluator(source)
    model = model or src_model
    if model is None:
        raise ValueError("a flux model is needed for a callable field")
    c = src_c if c is None else c
    s0, s1 = map(float, window)
    h = (s1 - s0) / n_steps
    if n_steps < 1 or abs(h) < 1e-14 * max(1.0, abs(s0), abs(s1)):
        raise ValueError("integrator step size underflow")

    def rhs(x, s):
        return float(model.H_p(x, s, c + float(np.asarray(u(np.array([x]), s))[0])))

    s = s0 + h * np.arange(n_steps + 1)
    x = np.empty(n_steps + 1)
    x[0] = x0
    for i in range(n_steps):
        xi, si = x[i], s[i]
        k1 = rhs(xi, si)
        k2 = rhs(xi + 0.5 * h * k1, si + 0.5 * h)
        k3 = rhs(xi + 0.5 * h * k2, si + 0.5 * h)
        k4 = rhs(xi + h * k3, si + h)
        x[i + 1] = xi + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
    return CharacteristicCurve(s, x, h, desc)


def rotation_number(curve: CharacteristicCurve, n_windows: int = 10) -> tuple[float, float]:
    """Average speed over the whole window and half the spread of the per-subwindow speeds."""
    S = curve.s[-1] - curve.s[0]
    if abs(S) < 20:
        raise ValueError("rotation numbers need a window of at least 20 periods")
    omega = float((curve.x[-1] - curve.x[0]) / S)
    idx = np.linspace(0, curve.s.size - 1, n_windows + 1).astype(int)
    sub = np.diff(curve.x[idx]) / np.diff(curve.s[idx])
    return omega, float(0.5 * (np.max(sub) - np.min(sub)))


# ---------------------------------------------------------------------------
# effective Hamiltonian oracle and KAM self-convergence


def cell_problem_hbar(c: float, potential: Callable, vmax: float | None = None) -> float:
    """Effective Hamiltonian of H = p^2/2 + V(x) on the circle.

    Equal to max V when |c| <= mean sqrt(2 (max V - V)); otherwise the h > max V
    with mean sqrt(2 (h - V)) = |c|.
    """
    if vmax is None:
        xs = np.linspace(0, 1, 4097)
        j = int(np.argmax(potential(xs)))
        res = optimize.minimize_scalar(lambda x: -potential(x), bounds=(xs[max(j - 1, 0)], xs[min(j + 1, 4096)]), method="bounded", options={"xatol": 1e-14})
        vmax = float(max(-res.fun, potential(xs[j])))

    def action(h: float) -> float:
        val, _ = integrate.quad(lambda x: math.sqrt(max(2 * (h - potential(x)), 0.0)), 0, 1, limit=200, epsabs=1e-14, epsrel=1e-13)
        return val

    critical = action(vmax)
    if abs(c) <= critical:
        return vmax
    hi = vmax + 0.5 * c * c + 1.0
    while action(hi) < abs(c):
        hi *= 2
    return float(optimize.brentq(lambda h: action(h) - abs(c), vmax, hi, xtol=1e-15, rtol=1e-14))


@dataclass
class KamReport:
    c: float
    meshes: list[int]
    u_fit: OrderFit
    v_fit: OrderFit
    h_bar: dict[int, float]
    failures: dict[int, str]
    reference_orders: dict[str, float] = field(default_factory=dict)


def _periodic_at(model: FluxModel, c: float, N: int, lam: float, tol: float, max_periods: int):
    grid = StaggeredGrid(N, int(round(N / lam)))
    cfg = SchemeConfig(model, grid, c=c)
    state = find_periodic_u(cfg, tol=tol, max_periods=max_periods)
    effective_hamiltonian(state, cfg, tol=tol)
    return state


def kam_self_convergence(
    model: FluxModel,
    c: float,
    meshes,
    lam: float = 1.0,
    tol: float = 1e-11,
    max_periods: int = 5000,
    per_cell: int = 8,
    tau: float | None = None,
    n_jobs: int = 1,
) -> KamReport:
    """Sup distance of u-bar and v-bar at t = 0 to the finest mesh, with fitted orders.

    v-bar is normalised to zero mean before comparison. With ``tau`` the
    Diophantine-degraded exponents 1/(2(1+tau)) and 1/(4(1+tau)) are attached
    for qualitative comparison only.
    """
    meshes = sorted(int(n) for n in meshes)
    if len(meshes) < 4:
        raise ValueError("need at least 3 meshes plus the finest reference")
    failures: dict[int, str] = {}

    def run(N):
        try:
            return _periodic_at(model, c, N, lam, tol, max_periods)
        except Exception as exc:
            return f"{type(exc).__name__}: {exc}"

    states = dict(zip(meshes, Parallel(n_jobs=n_jobs)(delayed(run)(N) for N in meshes)))
    for N, s in list(states.items()):
        if isinstance(s, str):
            failures[N] = s
            del states[N]
    finest = meshes[-1]
    if finest not in states:
        raise RuntimeError(f"finest mesh failed: {failures[finest]}")
    ref = states[finest]
    x = (np.arange(2 * finest * per_cell) + 0.5) / (2 * finest * per_cell)

    def profiles(state):
        u = eval_u_delta(state.u0, x, 0.0)
        v = eval_v_delta(integrate_u(state.u0), x, 0.0)
        return u, v - v.mean()

    u_ref, v_ref = profiles(ref)
    used, eu, ev = [], [], []
    for N in meshes[:-1]:
        if N not in states:
            continue
        u, v = profiles(states[N])
        used.append(N)
        eu.append(float(np.max(np.abs(u - u_ref))))
        ev.append(float(np.max(np.abs(v - v_ref))))
    dx = [1.0 / (2 * N) for N in used]
    extra = {}
    if tau is not None:
        extra = {"u_kam": 1.0 / (4 * (1 + tau)), "v_kam": 1.0 / (2 * (1 + tau))}
    return KamReport(
        c=c,
        meshes=used,
        u_fit=fit_order(dx, eu, used, guaranteed=0.0),
        v_fit=fit_order(dx, ev, used, guaranteed=0.0),
        h_bar={N: s.h_bar for N, s in states.items()},
        failures=failures,
        reference_orders=extra,
    )
