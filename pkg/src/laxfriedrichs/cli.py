"""Command-line entry point.

    laxfriedrichs {solve,periodic,sweep,converge,walk,stability} --config run.ini --out results/

Exit codes: 0 success, 1 usage or config error, 2 numerical abort (CFL,
tolerance), 3 a verification assertion failed.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import re
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .analysis import InitialValueProblem, convergence_study, stability_longrun
from .flux import LegendreError, get_model
from .grid import EVEN, discretize_u0, integrate_u
from .initial import get_initial
from .periodic import ConvergenceError, effective_hamiltonian, find_periodic_u, periodic_v, sweep
from .scheme import CFLViolation, SchemeConfig, solve
from .stochastic import (
    ClampWarning,
    WalkCone,
    brute_force_value,
    eta_deviation,
    expected_action,
    minimizing_velocity_field,
    sample_paths,
)

log = logging.getLogger("laxfriedrichs")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ASSERT = 0, 1, 2, 3

# section -> key -> (type, default)
SCHEMA: dict[str, dict[str, tuple[type, object]]] = {
    "model": {"name": (str, "quadratic"), "amplitude": (float, 0.25)},
    "grid": {"N": (int, 32), "K": (int, 32)},
    "initial": {"name": (str, "zero"), "amplitude": (float, 0.2), "width": (float, 0.0625)},
    "run": {
        "c": (float, 0.0),
        "h": (float, 0.0),
        "steps": (int, 64),
        "record_every": (int, 0),
        "field": (str, "u"),
        "abort_on_cfl": (bool, True),
        "seed": (int, 0),
    },
    "periodic": {"tol": (float, 1e-10), "max_periods": (int, 1000), "periods": (int, 8)},
    "sweep": {"c_min": (float, -0.9), "c_max": (float, 0.9), "points": (int, 21), "tol": (float, 1e-11)},
    "converge": {
        "meshes": (str, "16,32,64,128"),
        "norm": (str, "v_C0"),
        "t": (float, 0.5),
        "reference": (str, "auto"),
        "lam": (float, 1.0),
    },
    "walk": {
        "apex": (int, 1),
        "depth": (int, 4),
        "n_samples": (int, 0),
        "xi_levels": (int, 41),
        "state_budget": (int, 200000),
    },
    "stability": {"periods": (int, 10)},
}


class ConfigError(ValueError):
    pass


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _convert(kind: type, raw: str):
    if kind is bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    return kind(raw.strip())


@dataclass
class RunConfig:
    values: dict[str, dict[str, object]] = field(default_factory=dict)

    def __post_init__(self):
        full = {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}
        for sec, keys in self.values.items():
            full[sec].update(keys)
        self.values = full

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    def to_ini(self) -> str:
        lines = []
        for sec, keys in SCHEMA.items():
            lines.append(f"[{sec}]")
            lines.extend(f"{k} = {_format(self.values[sec][k])}" for k in keys)
            lines.append("")
        return "\n".join(lines)

    @classmethod
    def from_ini(cls, text: str, source: str = "<config>") -> RunConfig:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}") from None

        def where(sec: str, key: str | None = None) -> str:
            current = None
            for n, line in enumerate(text.splitlines(), 1):
                m = re.match(r"\s*\[([^\]]+)\]", line)
                if m:
                    current = m.group(1).strip()
                    if key is None and current == sec:
                        return f"{source}:{n}"
                elif current == sec and key is not None and re.match(rf"\s*{re.escape(key)}\s*[=:]", line):
                    return f"{source}:{n}"
            return source

        values: dict[str, dict[str, object]] = {}
        for sec in parser.sections():
            if sec not in SCHEMA:
                raise ConfigError(f"{where(sec)}: unknown section [{sec}]")
            values[sec] = {}
            for key, raw in parser.items(sec):
                if key not in SCHEMA[sec]:
                    raise ConfigError(f"{where(sec, key)}: unknown key {sec}.{key}")
                kind = SCHEMA[sec][key][0]
                try:
                    values[sec][key] = _convert(kind, raw)
                except ValueError:
                    raise ConfigError(f"{where(sec, key)}: {sec}.{key} = {raw!r} is not a valid {kind.__name__}") from None
        return cls(values)

    @classmethod
    def load(cls, path) -> RunConfig:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_ini(text, source=str(path))

    def __eq__(self, other) -> bool:
        return isinstance(other, RunConfig) and self.values == other.values


# ---------------------------------------------------------------------------
# shared builders


def _model(cfg: RunConfig):
    name = cfg["model"]["name"]
    try:
        return get_model(name) if name == "quadratic" else get_model(name, amplitude=cfg["model"]["amplitude"])
    except ValueError as exc:
        raise ConfigError(f"model.name: {exc}") from None


def _initial(cfg: RunConfig):
    sec = cfg["initial"]
    name = sec["name"]
    try:
        if name == "zero":
            return get_initial("zero")
        if name == "sawtooth":
            return get_initial("sawtooth", amplitude=sec["amplitude"], width=sec["width"])
        return get_initial(name, amplitude=sec["amplitude"])
    except ValueError as exc:
        raise ConfigError(f"initial.name: {exc}") from None


def _scheme_config(cfg: RunConfig, c: float | None = None) -> SchemeConfig:
    from .validation import check_grid

    try:
        grid = check_grid(cfg["grid"]["N"], cfg["grid"]["K"])
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None
    run = cfg["run"]
    return SchemeConfig(
        _model(cfg), grid, c=run["c"] if c is None else c, h=run["h"], abort_on_cfl=run["abort_on_cfl"]
    )


def _summary(out: Path, command: str, results: dict, assertions: dict[str, bool]) -> dict:
    summary = {"command": command, "results": results, "assertions": assertions, "passed": all(assertions.values())}
    io.write_json(out / "summary.json", summary)
    return summary


def _print_table(summary: dict) -> None:
    rows = [(k, v) for k, v in summary["results"].items() if not isinstance(v, (list, dict))]
    rows += [(f"check: {k}", "pass" if v else "FAIL") for k, v in summary["assertions"].items()]
    width = max((len(k) for k, _ in rows), default=0)
    print(f"== {summary['command']} ==")
    for k, v in rows:
        print(f"{k:<{width}}  {io.fmt(v) if isinstance(v, float) else v}")


# ---------------------------------------------------------------------------
# commands


def cmd_solve(cfg: RunConfig, out: Path, threads: int = 1) -> dict:
    scfg = _scheme_config(cfg)
    data = _initial(cfg)
    run = cfg["run"]
    if run["steps"] < 0:
        raise ConfigError("run.steps must be non-negative")
    if run["field"] not in ("u", "v"):
        raise ConfigError("run.field must be 'u' or 'v'")
    u0 = discretize_u0(scfg.grid, data.u0)
    start = u0 if run["field"] == "u" else integrate_u(u0, anchor=0.0 if data.v0 is None else float(data.v0(-scfg.grid.dx)))
    every = run["record_every"] if run["record_every"] > 0 else max(run["steps"], 1)
    traj = solve(scfg, start, run["steps"], record_every=every)
    if run["record_every"] <= 0:
        traj.snapshots = [traj.final]
    io.write_trajectory(out, traj, prefix=run["field"])
    drift = float(np.max(np.abs(np.asarray(traj.mean) - traj.mean[0])))
    results = {
        "steps": run["steps"],
        "snapshots": len(traj.snapshots),
        "mean_drift": drift,
        "min_cfl_margin": float(min(traj.cfl_margin)),
        "final_max_abs": traj.max_abs[-1],
    }
    return _summary(out, "solve", results, {"mean_conserved": drift <= 1e-12, "cfl_positive": min(traj.cfl_margin) > 0})


def cmd_periodic(cfg: RunConfig, out: Path, threads: int = 1) -> dict:
    scfg = _scheme_config(cfg)
    p = cfg["periodic"]
    state = find_periodic_u(scfg, tol=p["tol"], max_periods=p["max_periods"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ev = effective_hamiltonian(state, scfg, periods=p["periods"], average_last=min(4, p["periods"]), tol=p["tol"])
    v_ok = True
    try:
        pv = periodic_v(state, scfg, tol=max(1e-9, 10 * p["tol"]))
        io.write_field_csv(out / "vbar.csv", pv.v0)
        spread = pv.spread
    except ConvergenceError as exc:
        log.warning("%s", exc)
        v_ok, spread = False, float("nan")
    io.write_field_csv(out / "ubar.csv", state.u0)
    io.write_rows(out / "residuals.csv", ["period", "l1_residual"], enumerate(state.residuals, 1))
    results = {
        "c": scfg.c,
        "h_bar": ev.value,
        "h_bar_drift": ev.method_b,
        "method_gap": ev.gap,
        "iterations": state.iterations,
        "residual": state.residual,
        "rho": state.rho,
        "v_spread": spread,
    }
    checks = {
        "converged": state.residual <= p["tol"],
        "methods_agree": ev.gap <= 10 * max(p["tol"], 1e-12),
        "zero_mean": abs(state.u0.mean()) <= 1e-12,
        "v_periodic": v_ok,
    }
    return _summary(out, "periodic", results, checks)


def cmd_sweep(cfg: RunConfig, out: Path, threads: int = 1) -> dict:
    scfg = _scheme_config(cfg, c=0.0)
    s = cfg["sweep"]
    c = np.linspace(s["c_min"], s["c_max"], s["points"])
    curve = sweep(scfg, c, tol=s["tol"], max_periods=cfg["periodic"]["max_periods"], n_jobs=threads)
    io.write_rows(out / "sweep.csv", ["c", "h_bar", "gap", "second_difference"], curve.rows())
    results = {
        "points": int(c.size),
        "min_second_difference": curve.min_second_difference,
        "max_method_gap": float(np.nanmax(curve.gap)) if np.isfinite(curve.gap).any() else float("nan"),
        "failures": {str(k): v for k, v in curve.failures.items()},
    }
    checks = {"convex": curve.min_second_difference >= -1e-8, "no_failures": not curve.failures}
    return _summary(out, "sweep", results, checks)


def cmd_converge(cfg: RunConfig, out: Path, threads: int = 1) -> dict:
    s = cfg["converge"]
    try:
        meshes = [int(v) for v in s["meshes"].split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"converge.meshes must be a comma-separated list of integers, got {s['meshes']!r}") from None
    data = _initial(cfg)
    problem = InitialValueProblem(_model(cfg), data.u0, s["t"], v0=data.v0, c=cfg["run"]["c"], h=cfg["run"]["h"], lam=s["lam"])
    try:
        fit = convergence_study(problem, meshes, norm=s["norm"], reference=s["reference"], n_jobs=threads)
    except ValueError as exc:
        raise ConfigError(f"converge: {exc}") from None
    local = np.concatenate([[np.nan], np.diff(np.log(fit.errors)) / np.diff(np.log(fit.dx))]) if not fit.exact else np.full(len(meshes), np.nan)
    io.write_rows(out / "order.csv", ["mesh", "dx", "error", "order"], zip(fit.mesh.tolist(), fit.dx, fit.errors, local))
    results = fit.as_dict()
    results["norm"] = s["norm"]
    return _summary(out, "converge", results, {"order_at_least_guaranteed": fit.passes})


def cmd_walk(cfg: RunConfig, out: Path, threads: int = 1, seed: int = 0) -> dict:
    scfg = _scheme_config(cfg)
    w = cfg["walk"]
    data = _initial(cfg)
    grid = scfg.grid
    try:
        cone = WalkCone(w["apex"], w["depth"])
    except ValueError as exc:
        raise ConfigError(f"walk: {exc}") from None
    v0 = integrate_u(discretize_u0(grid, data.u0), anchor=0.0 if data.v0 is None else float(data.v0(-grid.dx)))
    traj = solve(scfg, v0, cone.depth)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ClampWarning)
        xi = minimizing_velocity_field(traj, scfg, cone)
    clamped = any(issubclass(c.category, ClampWarning) for c in caught)
    action = expected_action(xi, cone, v0, scfg)
    scheme_value = float(traj.at_level(cone.depth).at(cone.apex))
    eta = eta_deviation(xi, cone, grid.dx, grid.dt, state_budget=w["state_budget"], seed=seed)
    io.write_json(
        out / "eta.json",
        {"t": eta.t, "d_tilde": eta.d_tilde, "sigma_tilde": eta.sigma_tilde, "bound": eta.bound, "exact": eta.d_exact},
    )
    results = {
        "apex": cone.apex,
        "depth": cone.depth,
        "expected_action": action,
        "scheme_value": scheme_value,
        "identity_error": abs(action - scheme_value),
        "d_exact": eta.d_exact,
    }
    checks = {
        "action_matches_scheme": abs(action - scheme_value) <= 1e-10,
        "variance_bound": eta.variance_bound_holds,
        "jensen": eta.jensen_holds,
        "no_clamping": not clamped,
    }
    if cone.depth <= 5:
        bf = brute_force_value(cone, v0, scfg, xi_levels=w["xi_levels"])
        results["brute_force_value"] = bf.value
        results["brute_force_gap_estimate"] = bf.gap_estimate
        checks["scheme_below_brute_force"] = scheme_value <= bf.value + 1e-12
    if w["n_samples"] > 0:
        paths = sample_paths(xi, cone, w["n_samples"], seed, grid.dx, grid.dt)
        rows = (
            (i, k, paths.t[k], paths.gamma[i, k], paths.eta[i, k])
            for i in range(len(paths))
            for k in range(cone.depth + 1)
        )
        io.write_rows(out / "paths.csv", ["sample", "k", "t_k", "gamma", "eta"], rows)
        io.write_rows(out / "mean_path.csv", ["k", "t_k", "mean", "stderr"], zip(range(cone.depth + 1), paths.t, paths.mean_path, paths.mean_path_stderr))
        results["n_samples"] = len(paths)
    return _summary(out, "walk", results, checks)


def cmd_stability(cfg: RunConfig, out: Path, threads: int = 1) -> dict:
    scfg = _scheme_config(cfg)
    data = _initial(cfg)
    u0 = discretize_u0(scfg.grid, data.u0)
    rep = stability_longrun(scfg, u0, cfg["stability"]["periods"])
    io.write_rows(
        out / "stability.csv",
        ["period", "max_abs", "cfl_min"],
        zip(range(1, rep.periods + 1), rep.max_abs_integer[1:], rep.cfl_min_per_period),
    )
    io.write_rows(out / "E_k.csv", ["k", "t_k", "E_k", "decay_envelope"], zip(range(rep.E_k.size), rep.t, rep.E_k, rep.decay_envelope))
    results = {
        "periods": rep.periods,
        "barrier": rep.barrier,
        "max_abs": float(np.max(rep.max_abs_integer)),
        "cfl_initial": rep.cfl_initial,
        "cfl_min": float(np.min(rep.cfl_min_per_period)),
        "late_envelope": rep.late_envelope,
    }
    return _summary(out, "stability", results, dict(rep.checks))


COMMANDS = {
    "solve": cmd_solve,
    "periodic": cmd_periodic,
    "sweep": cmd_sweep,
    "converge": cmd_converge,
    "walk": cmd_walk,
    "stability": cmd_stability,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="laxfriedrichs", description="Lax-Friedrichs experiments for periodic conservation laws and Hamilton-Jacobi equations.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", type=Path, help="INI config file; missing keys take defaults")
    p.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    p.add_argument("--threads", type=int, default=1, help="worker count for sweeps and mesh studies")
    p.add_argument("--seed", type=int, default=None, help="overrides run.seed")
    p.add_argument("--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg["run"]["seed"] = args.seed
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        out = args.out
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.ini").write_text(cfg.to_ini())
        func = COMMANDS[args.command]
        kwargs = {"threads": args.threads}
        if args.command == "walk":
            kwargs["seed"] = cfg["run"]["seed"]
        summary = func(cfg, out, **kwargs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CFLViolation as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConvergenceError, LegendreError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _print_table(summary)
    return EXIT_OK if summary["passed"] else EXIT_ASSERT


if __name__ == "__main__":
    sys.exit(main())
