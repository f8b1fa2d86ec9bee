"""Flux functions H(x, t, p), their Legendre transforms, and a-priori constants.

All evaluators are vectorised numpy callables ``f(x, t, p)``; x and t are
understood modulo 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Evaluator = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]

TWO_PI = 2.0 * math.pi


class LegendreError(RuntimeError):
    """Raised when the Legendre maximiser cannot be bracketed or refined."""


@dataclass(frozen=True)
class FluxModel:
    """A flux H(x, t, p) together with the partial derivatives the scheme needs."""

    name: str
    H: Evaluator
    H_p: Evaluator
    H_pp: Evaluator
    H_x: Evaluator
    H_xp: Evaluator
    H_xx: Evaluator
    x_dependent: bool = True
    t_dependent: bool = True
    params: dict = field(default_factory=dict)

    def describe(self) -> str:
        if not self.params:
            return self.name
        args = ", ".join(f"{k}={v:g}" for k, v in sorted(self.params.items()))
        return f"{self.name}({args})"


def _zeros(x, t, p):
    return np.zeros(np.broadcast(x, t, p).shape)


def _ones(x, t, p):
    return np.ones(np.broadcast(x, t, p).shape)


def quadratic() -> FluxModel:
    """Burgers flux H = p^2/2."""
    return FluxModel(
        name="quadratic",
        H=lambda x, t, p: 0.5 * np.asarray(p) ** 2 + _zeros(x, t, p),
        H_p=lambda x, t, p: np.asarray(p) + _zeros(x, t, p),
        H_pp=_ones,
        H_x=_zeros,
        H_xp=_zeros,
        H_xx=_zeros,
        x_dependent=False,
        t_dependent=False,
    )


def mechanical(amplitude: float = 0.25) -> FluxModel:
    """H = p^2/2 + A cos(2 pi x)."""
    a = float(amplitude)
    return FluxModel(
        name="mechanical",
        H=lambda x, t, p: 0.5 * np.asarray(p) ** 2 + a * np.cos(TWO_PI * np.asarray(x)) + _zeros(x, t, p),
        H_p=lambda x, t, p: np.asarray(p) + _zeros(x, t, p),
        H_pp=_ones,
        H_x=lambda x, t, p: -a * TWO_PI * np.sin(TWO_PI * np.asarray(x)) + _zeros(x, t, p),
        H_xp=_zeros,
        H_xx=lambda x, t, p: -a * TWO_PI**2 * np.cos(TWO_PI * np.asarray(x)) + _zeros(x, t, p),
        x_dependent=a != 0.0,
        t_dependent=False,
        params={"amplitude": a},
    )


def nonautonomous(amplitude: float = 0.25) -> FluxModel:
    """H = p^2/2 + A cos(2 pi x) cos(2 pi t)."""
    a = float(amplitude)

    def pot(x, t):
        return a * np.cos(TWO_PI * np.asarray(x)) * np.cos(TWO_PI * np.asarray(t))

    return FluxModel(
        name="nonautonomous",
        H=lambda x, t, p: 0.5 * np.asarray(p) ** 2 + pot(x, t) + _zeros(x, t, p),
        H_p=lambda x, t, p: np.asarray(p) + _zeros(x, t, p),
        H_pp=_ones,
        H_x=lambda x, t, p: -a * TWO_PI * np.sin(TWO_PI * np.asarray(x)) * np.cos(TWO_PI * np.asarray(t))
        + _zeros(x, t, p),
        H_xp=_zeros,
        H_xx=lambda x, t, p: -TWO_PI**2 * pot(x, t) + _zeros(x, t, p),
        x_dependent=a != 0.0,
        t_dependent=a != 0.0,
        params={"amplitude": a},
    )


def quartic(amplitude: float = 0.0) -> FluxModel:
    """H = p^4/4 + A cos(2 pi x).

    H_pp = 3p^2 vanishes at p = 0, so this model only satisfies strict
    convexity away from the origin; it is kept for Legendre tests.
    """
    a = float(amplitude)
    return FluxModel(
        name="quartic",
        H=lambda x, t, p: 0.25 * np.asarray(p) ** 4 + a * np.cos(TWO_PI * np.asarray(x)) + _zeros(x, t, p),
        H_p=lambda x, t, p: np.asarray(p) ** 3 + _zeros(x, t, p),
        H_pp=lambda x, t, p: 3.0 * np.asarray(p) ** 2 + _zeros(x, t, p),
        H_x=lambda x, t, p: -a * TWO_PI * np.sin(TWO_PI * np.asarray(x)) + _zeros(x, t, p),
        H_xp=_zeros,
        H_xx=lambda x, t, p: -a * TWO_PI**2 * np.cos(TWO_PI * np.asarray(x)) + _zeros(x, t, p),
        x_dependent=a != 0.0,
        t_dependent=False,
        params={"amplitude": a},
    )


MODELS: dict[str, Callable[..., FluxModel]] = {
    "quadratic": quadratic,
    "mechanical": mechanical,
    "nonautonomous": nonautonomous,
    "quartic": quartic,
}


def get_model(name: str, **params) -> FluxModel:
    try:
        factory = MODELS[name]
    except KeyError:
        raise ValueError(f"unknown flux model {name!r}; choose from {sorted(MODELS)}") from None
    return factory(**params)


# ---------------------------------------------------------------------------
# Legendre transform


@dataclass
class LegendreResult:
    value: np.ndarray | float
    maximizer: np.ndarray | float
    iterations: int
    residual: np.ndarray | float


def legendre(model: FluxModel, x, t, xi, tol: float = 1e-12, max_iter: int = 200) -> LegendreResult:
    """L(x, t, xi) = sup_p {xi p - H(x, t, p)}.

    Solves H_p(x, t, p) = xi by Newton's method safeguarded with bisection on
    a bracket grown geometrically from p = xi. The residual tolerance is
    relative: ``|H_p(p*) - xi| <= tol * max(1, |xi|)``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    scalar = np.ndim(x) == 0 and np.ndim(t) == 0 and np.ndim(xi) == 0
    x, t, xi = (np.array(a, dtype=float) for a in np.broadcast_arrays(x, t, xi))
    scale = tol * np.maximum(1.0, np.abs(xi))

    def f(p):
        return model.H_p(x, t, p) - xi

    # bracket [lo, hi] with f(lo) <= 0 <= f(hi)
    lo = xi.copy()
    hi = xi.copy()
    f0 = f(xi)
    step = np.maximum(1.0, np.abs(xi))
    need_hi = f0 < 0
    need_lo = f0 > 0
    for _ in range(max_iter):
        if not (need_hi.any() or need_lo.any()):
            break
        hi = np.where(need_hi, xi + step, hi)
        lo = np.where(need_lo, xi - step, lo)
        need_hi = need_hi & (f(hi) < 0)
        need_lo = need_lo & (f(lo) > 0)
        step = step * 2.0
    else:
        raise LegendreError(f"{model.describe()}: could not bracket H_p = xi; is H superlinear?")

    p = xi.copy()
    fp = f0
    active = np.abs(fp) > scale
    it = 0
    while active.any():
        if it >= max_iter:
            raise LegendreError(
                f"{model.describe()}: Legendre solve did not converge in {max_iter} iterations "
                f"(max residual {np.max(np.abs(fp)):.3e}); H_pp may vanish on the bracket"
            )
        it += 1
        lo = np.where(active & (fp < 0), p, lo)
        hi = np.where(active & (fp > 0), p, hi)
        hpp = model.H_pp(x, t, p)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = p - fp / hpp
        ok = np.isfinite(newton) & (newton > lo) & (newton < hi)
        cand = np.where(ok, newton, 0.5 * (lo + hi))
        p = np.where(active, cand, p)
        fp = f(p)
        width = hi - lo
        collapsed = width <= 4.0 * np.finfo(float).eps * np.maximum(1.0, np.abs(p))
        active = active & (np.abs(fp) > scale) & ~collapsed
    resid = np.abs(fp)
    if np.any(resid > scale * 1e3):
        raise LegendreError(f"{model.describe()}: Legendre residual {resid.max():.3e} exceeds tolerance")
    value = xi * p - model.H(x, t, p)
    if scalar:
        return LegendreResult(float(value), float(p), it, float(resid))
    return LegendreResult(value, p, it, resid)


def lagrangian(model: FluxModel, x, t, xi, c: float = 0.0, tol: float = 1e-12):
    """Shifted Lagrangian L^(c)(x, t, xi) = L(x, t, xi) - c xi."""
    res = legendre(model, x, t, xi, tol=tol)
    return res.value - c * np.asarray(xi)


lagrangian_shifted = lagrangian


def lagrangian_x(model: FluxModel, x, t, xi, tol: float = 1e-12):
    """L_x(x, t, xi) = -H_x(x, t, p*(xi)); independent of the shift c."""
    res = legendre(model, x, t, xi, tol=tol)
    return -model.H_x(x, t, res.maximizer)


def lagrangian_xi(model: FluxModel, x, t, xi, c: float = 0.0, tol: float = 1e-12):
    """L^(c)_xi = p*(xi) - c."""
    res = legendre(model, x, t, xi, tol=tol)
    return res.maximizer - c


# ---------------------------------------------------------------------------
# Standing assumptions


@dataclass
class AssumptionReport:
    periodic: bool
    derivatives_consistent: bool
    convex: bool
    superlinear: bool
    lagrangian_growth: bool
    min_H_pp: float
    alpha: float
    max_derivative_error: float
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def _lattice(density: int) -> np.ndarray:
    return np.arange(density) / density


def verify_assumptions(
    model: FluxModel,
    sample_density: int = 16,
    c_range: tuple[float, float] = (0.0, 0.0),
    p_range: tuple[float, float] = (-2.0, 2.0),
) -> AssumptionReport:
    """Sample (A1)-(A4) on a lattice and report pass/fail per assumption."""
    if sample_density < 8:
        raise ValueError("sample_density must be at least 8")
    xs = _lattice(sample_density)
    ts = _lattice(sample_density)
    ps = np.linspace(p_range[0], p_range[1], 2 * sample_density + 1)
    X, T, P = np.meshgrid(xs, ts, ps, indexing="ij")
    failures = []

    h0 = model.H(X, T, P)
    periodic = bool(
        np.allclose(model.H(X + 1.0, T, P), h0, atol=1e-10)
        and np.allclose(model.H(X, T + 1.0, P), h0, atol=1e-10)
    )
    if not periodic:
        failures.append("A1: H is not 1-periodic in x and t")

    # central differences, O(step^2)
    step = 1e-5
    fd_p = (model.H(X, T, P + step) - model.H(X, T, P - step)) / (2 * step)
    fd_x = (model.H(X + step, T, P) - model.H(X - step, T, P)) / (2 * step)
    fd_pp = (model.H_p(X, T, P + step) - model.H_p(X, T, P - step)) / (2 * step)
    fd_xp = (model.H_p(X + step, T, P) - model.H_p(X - step, T, P)) / (2 * step)
    fd_xx = (model.H_x(X + step, T, P) - model.H_x(X - step, T, P)) / (2 * step)
    errs = [
        np.max(np.abs(fd_p - model.H_p(X, T, P)) / (1 + np.abs(fd_p))),
        np.max(np.abs(fd_x - model.H_x(X, T, P)) / (1 + np.abs(fd_x))),
        np.max(np.abs(fd_pp - model.H_pp(X, T, P)) / (1 + np.abs(fd_pp))),
        np.max(np.abs(fd_xp - model.H_xp(X, T, P)) / (1 + np.abs(fd_xp))),
        np.max(np.abs(fd_xx - model.H_xx(X, T, P)) / (1 + np.abs(fd_xx))),
    ]
    max_err = float(max(errs))
    consistent = max_err < 1e-6
    if not consistent:
        failures.append(f"A1: analytic derivatives disagree with finite differences ({max_err:.2e})")

    hpp = model.H_pp(X, T, P)
    min_hpp = float(hpp.min())
    convex = min_hpp > 0
    if not convex:
        failures.append(f"A2: H_pp reaches {min_hpp:.3e} <= 0 on the lattice")

    # H(p)/|p| must keep growing along a geometric sequence of |p|
    big = max(abs(p_range[0]), abs(p_range[1]), 1.0) * 2.0 ** np.arange(1, 8)
    Xs, Ts = np.meshgrid(xs, ts, indexing="ij")
    superlinear = True
    for sign in (-1.0, 1.0):
        ratios = np.stack([model.H(Xs, Ts, sign * b) / b for b in big])
        if not np.all(np.diff(ratios, axis=0) > 0):
            superlinear = False
    if not superlinear:
        failures.append("A3: H(x,t,p)/|p| is not increasing for large |p|")

    alpha = float("nan")
    growth = False
    if convex and superlinear:
        xi_lo = float(model.H_p(X, T, np.full_like(P, p_range[0])).min())
        xi_hi = float(model.H_p(X, T, np.full_like(P, p_range[1])).max())
        xis = np.linspace(xi_lo, xi_hi, 2 * sample_density + 1)
        Xx, Tx, XIx = np.meshgrid(xs, ts, xis, indexing="ij")
        cs = np.unique(np.linspace(c_range[0], c_range[1], max(2, sample_density // 4)))
        res = legendre(model, Xx, Tx, XIx)
        lx = -model.H_x(Xx, Tx, res.maximizer)
        alpha = 0.0
        for c in cs:
            lc = res.value - c * XIx
            alpha = max(alpha, float(np.max(np.abs(lx) / (np.abs(lc) + 1.0))))
        growth = bool(np.isfinite(alpha))
    if not growth:
        failures.append("A4: no finite alpha with |L_x| <= alpha(|L|+1) on the lattice")

    return AssumptionReport(
        periodic=periodic,
        derivatives_consistent=consistent,
        convex=convex,
        superlinear=superlinear,
        lagrangian_growth=growth,
        min_H_pp=min_hpp,
        alpha=alpha,
        max_derivative_error=max_err,
        failures=failures,
    )


# ---------------------------------------------------------------------------
# A-priori constants


@dataclass
class AprioriConstants:
    """Lattice approximations of the a-priori constants.

    The stored values are the raw lattice extrema. ``beta1(t, safety)``
    multiplies the bound by a safety factor for use in inequality checks.
    """

    u_star: float
    H_xx_star: float
    H_xp_star: float
    H_pp_star: float
    eta: float
    E_star: float
    lambda1: float
    r: float
    c_range: tuple[float, float]
    t_values: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    C3: np.ndarray
    alpha1: float
    L_star: float
    _constants_at: Callable[[float], tuple[float, float, float]] | None = field(default=None, repr=False)

    def beta1(self, t: float, safety: float = 1.0) -> float:
        idx = np.flatnonzero(np.isclose(self.t_values, t))
        if idx.size:
            val = float(self.C3[idx[0]])
        elif self._constants_at is not None:
            val = self._constants_at(t)[2]
        else:
            raise KeyError(f"beta1 not available at t={t}")
        return safety * val

    def parabola(self, y):
        """Right-hand side H*_pp/2 y^2 - 2H*_xp y - H*_xx of the E-recursion."""
        return 0.5 * self.H_pp_star * y**2 - 2 * self.H_xp_star * y - self.H_xx_star

    def decay_bound(self, t):
        """Envelope 2 e^{eta t} / (H*_pp t) on E^k at time t > 0."""
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore"):
            return 2.0 * np.exp(self.eta * t) / (self.H_pp_star * t)

    @property
    def late_bound(self) -> float:
        """Envelope 4 e eta / H*_pp valid once t exceeds 1/eta."""
        return 4.0 * math.e * self.eta / self.H_pp_star


def apriori_constants(
    model: FluxModel,
    t_max: float = 1.0,
    lambda1: float = 1.0,
    c_range: tuple[float, float] = (0.0, 0.0),
    r: float = 1.0,
    density: int = 64,
    t_values=None,
) -> AprioriConstants:
    """Lattice estimates of u*, H*-extrema, eta, E* and the chain C1 -> C2 -> C3 = beta1."""
    if t_max <= 0 or lambda1 <= 0:
        raise ValueError("t_max and lambda1 must be positive")
    c0, c1 = float(c_range[0]), float(c_range[1])
    if c1 < c0:
        raise ValueError(f"empty c window [{c0}, {c1}]")
    xs = _lattice(density) if model.x_dependent else np.zeros(1)
    ts = _lattice(density) if model.t_dependent else np.zeros(1)
    cs = np.linspace(c0, c1, density) if c1 > c0 else np.array([c0])

    def window(xi_bound: float, n: int = 2 * density + 1) -> np.ndarray:
        return np.linspace(-xi_bound, xi_bound, n)

    def legendre_lattice(xis):
        X, T, XI = np.meshgrid(xs, ts, xis, indexing="ij")
        return X, T, XI, legendre(model, X, T, XI)

    # u* = sup |L^(c)_xi| over |xi| <= 1/lambda1
    _, _, _, res = legendre_lattice(window(1.0 / lambda1))
    p = res.maximizer
    u_star = float(max(np.max(np.abs(p - c)) for c in cs))

    us = np.linspace(-u_star, u_star, 2 * density + 1)
    X, T, U = np.meshgrid(xs, ts, us, indexing="ij")
    Hxx = max(float(np.max(np.abs(model.H_xx(X, T, c + U)))) for c in cs)
    Hxp = max(float(np.max(np.abs(model.H_xp(X, T, c + U)))) for c in cs)
    Hpp = min(float(np.min(np.abs(model.H_pp(X, T, c + U)))) for c in cs)
    if Hpp <= 0:
        raise ValueError(f"{model.describe()}: H_pp vanishes on the a-priori window")
    eta = max(2 * Hxp + Hpp, 0.5 * Hpp + Hxx)
    ratio = Hxp / Hpp
    E_star = 2 * ratio + math.sqrt(4 * ratio**2 + 2 * Hxx / Hpp)

    # L_* = |min(0, inf L^(c))| and inf_xi L^(c) = -H(x, t, c)
    Xc, Tc = np.meshgrid(xs, ts, indexing="ij")
    L_star = max(0.0, max(float(np.max(model.H(Xc, Tc, c))) for c in cs))

    def L_shift_min_max(xis):
        _, _, XI, r_ = legendre_lattice(xis)
        vals = np.stack([r_.value - c * XI for c in cs])
        return vals

    def constants_at(t: float) -> tuple[float, float, float]:
        xis = window(1.0 / t)
        vals = L_shift_min_max(xis)
        C1 = float(np.max(np.abs(vals))) * t
        level = C1 / t

        # C2: extent of the union of sublevel sets {L^(c) <= C1/t}, which contains [-1/t, 1/t]
        def min_over_lattice(xi: float) -> float:
            return float(np.min(L_shift_min_max(np.array([xi]))))

        ends = []
        for sign in (1.0, -1.0):
            inner = sign / t
            outer = 2 * inner
            while min_over_lattice(outer) <= level:
                inner, outer = outer, 2 * outer
            for _ in range(80):
                mid = 0.5 * (inner + outer)
                if min_over_lattice(mid) <= level:
                    inner = mid
                else:
                    outer = mid
            ends.append(abs(outer))
        C2 = max(ends)

        # alpha1 over the window actually visited by minimisers
        xi_alpha = window(max(C2, 1.0 / lambda1, 1.0 / t))
        Xa, Ta, XIa, ra = legendre_lattice(xi_alpha)
        lx = np.abs(model.H_x(Xa, Ta, ra.maximizer))
        alpha1 = max(float(np.max(lx / (np.abs(ra.value - c * XIa) + 1.0))) for c in cs)

        _, _, _, r2 = legendre_lattice(window(C2))
        sup_Lxi = max(float(np.max(np.abs(r2.maximizer - c))) for c in cs)
        C3 = alpha1 * (2 * L_star + 1) * t + alpha1 * C1 + sup_Lxi
        return C1, C2, C3, alpha1

    if t_values is None:
        t_values = sorted({min(1.0, t_max), t_max})
    t_values = np.asarray(sorted(t_values), dtype=float)
    rows = [constants_at(float(t)) for t in t_values]
    C1 = np.array([row[0] for row in rows])
    C2 = np.array([row[1] for row in rows])
    C3 = np.array([row[2] for row in rows])
    alpha1 = max(row[3] for row in rows)

    return AprioriConstants(
        u_star=u_star,
        H_xx_star=Hxx,
        H_xp_star=Hxp,
        H_pp_star=Hpp,
        eta=eta,
        E_star=E_star,
        lambda1=float(lambda1),
        r=float(r),
        c_range=(c0, c1),
        t_values=t_values,
        C1=C1,
        C2=C2,
        C3=C3,
        alpha1=alpha1,
        L_star=L_star,
        _constants_at=lambda t: constants_at(t)[:3],
    )
