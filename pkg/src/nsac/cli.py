"""Command line front end: configuration files, presets, runs and sweeps.

Configuration is line-oriented ``key=value`` text with ``#`` comments.
Every key is checked against the known field list so a typo fails loudly
with its line number instead of being silently ignored.  Flag values
override file values, file values override preset values.

Exit codes: 0 for a completed run (with strict monitors, if enabled,
silent), 1 for a run that failed to converge or tripped a strict monitor,
2 for configuration errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .assembly import Discretization
from .coupling import (NonConvergenceError, SolverConfig,
                       admissibility_check, run_simulation)
from .diagnostics import MonitorViolation
from .meshing import build_uniform_mesh
from .mixture import MixtureParams
from .reporting import emit_snapshot, emit_step_csv
from .scenarios import SCENARIOS, initial_state

DOMAIN_BOUNDS = ((-1.0, 1.0), (-1.0, 1.0))

SWEEP_CSV_HEADER = "method,beta,total_iters,E_phi_H1,status"


class ConfigError(Exception):
    """Invalid, unknown or missing configuration input."""


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings of one run.

    Mixture and solver fields mirror :class:`~nsac.mixture.MixtureParams`
    and :class:`~nsac.coupling.SolverConfig`; the rest is run plumbing.
    ``mesh_n`` and ``scenario`` have no defaults and must come from a
    preset, a config file or flags.
    """

    rho_a: float = 3.0
    rho_b: float = 1.0
    mu_a: float = 1.0
    mu_b: float = 1.0
    gamma: float = 1.0
    eta: float = 0.1
    sigma: float = 1.0
    beta: float = 0.0
    dt: float = 1.0 / 1300.0
    eps_pressure: float = 1e-8
    method: str = "fin"
    tol_fixed_point: float = 1e-9
    max_fixed_point_iters: int = 100
    t_final: float = 10.0 / 1300.0
    strict_monitors: bool = False
    monitor_max_principle: bool = True
    monitor_phase_bounds: bool = True
    monitor_velocity_bounds: bool = True
    monitor_divergence: bool = True
    mesh_n: int | None = None
    scenario: str | None = None
    output_dir: str = "nsac-out"
    snapshot_every: int = 0
    beta_sweep: tuple | None = None


_FLOAT_KEYS = frozenset({
    "rho_a", "rho_b", "mu_a", "mu_b", "gamma", "eta", "sigma", "beta",
    "dt", "eps_pressure", "tol_fixed_point", "t_final",
})
_INT_KEYS = frozenset({"max_fixed_point_iters", "mesh_n", "snapshot_every"})
_BOOL_KEYS = frozenset({
    "strict_monitors", "monitor_max_principle", "monitor_phase_bounds",
    "monitor_velocity_bounds", "monitor_divergence",
})
_STR_KEYS = frozenset({"method", "scenario", "output_dir"})
_LIST_KEYS = frozenset({"beta_sweep"})
_ALL_KEYS = _FLOAT_KEYS | _INT_KEYS | _BOOL_KEYS | _STR_KEYS | _LIST_KEYS


def _parse_bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_float_list(raw: str):
    v = raw.strip()
    if not v:
        return None
    return tuple(float(tok) for tok in v.split(","))


def _parse_value(key: str, raw: str, where: str):
    try:
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _INT_KEYS:
            return int(raw)
        if key in _BOOL_KEYS:
            return _parse_bool(raw)
        if key in _LIST_KEYS:
            return _parse_float_list(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {key!r}: {exc}") from exc


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key=value`` lines into a value dict.

    Raises
    ------
    ConfigError
        On unknown keys or unparseable values, naming the source line.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(
                f"{source}:{lineno}: expected key=value, got {line!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in _ALL_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, val.strip(), f"{source}:{lineno}")
    return values


#: Named parameter bundles.  The ``paper-table1-*`` family pins the rows of
#: the bundled method-comparison study on the manufactured-solution problem
#: (ten steps at dt=1/1300 on a 100x100 mesh, plus a tenfold-finer-step
#: variant); the ``quiescent-bounds-*`` family runs the monitored
#: relaxation scenario used by the bound and max-principle checks.
_MMS_ROW = {
    "scenario": "mms", "mesh_n": 100, "dt": 1.0 / 1300.0,
    "t_final": 10.0 / 1300.0,
}
_QUIESCENT_DT = 0.9 * 0.1 ** 2 / 13.0
_QUIESCENT_ROW = {
    "scenario": "quiescent", "mesh_n": 32, "dt": _QUIESCENT_DT,
    "t_final": 20 * _QUIESCENT_DT,
}
PRESETS = {
    "paper-table1-fin0": dict(_MMS_ROW, method="fin", beta=0.0),
    "paper-table1-fin1.125": dict(_MMS_ROW, method="fin", beta=1.125),
    "paper-table1-fip0": dict(_MMS_ROW, method="fip", beta=0.0,
                              max_fixed_point_iters=1000),
    "paper-table1-fip2": dict(_MMS_ROW, method="fip", beta=2.0,
                              max_fixed_point_iters=1000),
    "paper-table1-sce": dict(_MMS_ROW, method="sce", beta=0.0),
    "paper-table1-sce-dt10": dict(_MMS_ROW, method="sce", beta=0.0,
                                  dt=1.0 / 13000.0),
    "quiescent-bounds-fin": dict(_QUIESCENT_ROW, method="fin", beta=1.125),
    "quiescent-bounds-fip": dict(_QUIESCENT_ROW, method="fip", beta=2.0),
}


def parse_config(path: str | None = None, preset: str | None = None,
                 overrides: dict | None = None) -> RunConfig:
    """Resolve preset, file and flag layers into a validated RunConfig."""
    values: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; available: "
                              f"{', '.join(sorted(PRESETS))}")
        values.update(PRESETS[preset])
    if path is not None:
        try:
            with open(path) as handle:
                text = handle.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}")
        values.update(parse_config_text(text, source=path))
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})

    missing = [k for k in ("scenario", "mesh_n") if values.get(k) is None]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)} "
                          f"(supply via preset, config file or flags)")
    config = RunConfig(**values)
    _validate(config)
    return config


def _validate(config: RunConfig) -> None:
    if config.scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {config.scenario!r}; expected "
                          f"one of {', '.join(SCENARIOS)}")
    if config.mesh_n < 1:
        raise ConfigError("mesh_n must be at least 1")
    if config.snapshot_every < 0:
        raise ConfigError("snapshot_every must be nonnegative")
    try:
        to_mixture_params(config)
        to_solver_config(config)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def to_mixture_params(config: RunConfig) -> MixtureParams:
    return MixtureParams(
        rho_a=config.rho_a, rho_b=config.rho_b, mu_a=config.mu_a,
        mu_b=config.mu_b, gamma=config.gamma, eta=config.eta,
        sigma=config.sigma, beta=config.beta, dt=config.dt,
        eps_pressure=config.eps_pressure)


def to_solver_config(config: RunConfig) -> SolverConfig:
    return SolverConfig(
        method=config.method,
        tol_fixed_point=config.tol_fixed_point,
        max_fixed_point_iters=config.max_fixed_point_iters,
        t_final=config.t_final,
        mms_enabled=(config.scenario == "mms"),
        strict_monitors=config.strict_monitors,
        monitors_enabled={
            "max_principle": config.monitor_max_principle,
            "phase_bounds": config.monitor_phase_bounds,
            "velocity_bounds": config.monitor_velocity_bounds,
            "divergence": config.monitor_divergence,
        })


def _echo_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "%.17g" % value
    if isinstance(value, tuple):
        return ",".join("%.17g" % v for v in value)
    return str(value)


def emit_config_echo(config: RunConfig, path: str) -> None:
    """Write the resolved configuration as a parseable config file.

    ``parse_config`` applied to the written file reproduces ``config``
    exactly; 17 significant digits keep floats bit-stable across the
    round trip.
    """
    lines = [f"{f.name}={_echo_value(getattr(config, f.name))}"
             for f in dataclasses.fields(config)]
    with open(path, "w", newline="") as handle:
        handle.write("\n".join(lines) + "\n")


# -- run orchestration -----------------------------------------------------


def run_once(config: RunConfig, log=print) -> int:
    """Execute one configured run and write its artifacts.

    Returns the process exit code.
    """
    params = to_mixture_params(config)
    solver = to_solver_config(config)
    os.makedirs(config.output_dir, exist_ok=True)
    emit_config_echo(config,
                     os.path.join(config.output_dir, "config-echo.cfg"))

    report = admissibility_check(params, config.method)
    for warning in report.warnings:
        log(f"warning: {warning}", file=sys.stderr)

    disc = Discretization(build_uniform_mesh(DOMAIN_BOUNDS, config.mesh_n))
    state0 = initial_state(disc, params, config.scenario)

    def snapshot(step_index, state):
        name = f"snapshot-{step_index:06d}.vtk"
        emit_snapshot(disc, state, os.path.join(config.output_dir, name))

    if config.snapshot_every > 0:
        snapshot(0, state0)

    def sink(step_report, state):
        every = config.snapshot_every
        if every > 0 and (step_report.step_index + 1) % every == 0:
            snapshot(step_report.step_index + 1, state)

    csv_path = os.path.join(config.output_dir, "steps.csv")
    try:
        result = run_simulation(disc, params, solver, state0, sink=sink)
    except NonConvergenceError as exc:
        emit_step_csv(exc.reports, csv_path)
        log(f"error: {exc}", file=sys.stderr)
        return 1
    except MonitorViolation as exc:
        log(f"error: strict monitor violation: {exc}", file=sys.stderr)
        return 1

    emit_step_csv(result.reports, csv_path)
    reports = result.reports
    total = sum(r.fixed_point_iterations for r in reports)
    summary = [f"steps={len(reports)}", f"iterations={total}",
               f"max_abs_phi={max((r.max_abs_phi for r in reports), default=float('nan')):.6g}"]
    errs = [r.error_norms for r in reports if r.error_norms is not None]
    if errs:
        summary.append(f"E_u={max(e[0] for e in errs):.6g}")
        summary.append(f"E_phi={max(e[1] for e in errs):.6g}")
    ok = all(r.monitors_passed for r in reports)
    summary.append("monitors=ok" if ok else "monitors=VIOLATED")
    log(" ".join(summary))
    log(f"wrote {csv_path}")
    return 0


def _sweep_single(config: RunConfig) -> tuple:
    """One sweep entry; returns ``(method, beta, iters, E_phi_H1, status)``."""
    params = to_mixture_params(config)
    solver = to_solver_config(config)
    disc = Discretization(build_uniform_mesh(DOMAIN_BOUNDS, config.mesh_n))
    state0 = initial_state(disc, params, config.scenario)
    try:
        result = run_simulation(disc, params, solver, state0)
    except NonConvergenceError as exc:
        done = sum(r.fixed_point_iterations for r in exc.reports)
        return (config.method, config.beta,
                done + len(exc.variation_history), None, "nonconvergence")
    iters = sum(r.fixed_point_iterations for r in result.reports)
    h1 = [r.error_h1_phi for r in result.reports
          if r.error_h1_phi is not None]
    return (config.method, config.beta, iters,
            max(h1) if h1 else None, "converged")


def run_beta_sweep(config: RunConfig, betas, methods=("fin", "fip"),
                   parallel: int = 0) -> list:
    """Run every (method, beta) combination; returns CSV lines.

    Failed entries become rows with a non-``converged`` status; the sweep
    always continues.  ``parallel`` > 0 distributes entries over that many
    worker processes (entries share nothing).
    """
    configs = [dataclasses.replace(config, method=m, beta=b)
               for m in methods for b in betas]
    if parallel > 0:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            rows = list(pool.map(_sweep_single, configs))
    else:
        rows = [_sweep_single(c) for c in configs]
    lines = [SWEEP_CSV_HEADER]
    for method, beta, iters, h1, status in rows:
        h1_txt = "nan" if h1 is None else "%.17g" % h1
        lines.append(f"{method},{'%.17g' % beta},{iters},{h1_txt},{status}")
    return lines


# -- forcing oracle --------------------------------------------------------


def verify_mms_forcing(samples: int = 100, seed: int = 7, log=print) -> int:
    """Cross-check the hand-coded forcing against finite differences.

    Draws random space-time sample points, recomputes both forcing terms
    by central differences of the base field closures alone, and checks
    the manufactured velocity for its divergence-free and zero-trace
    properties.  Agreement is measured as the largest absolute deviation
    over the sample set divided by ``max(1, largest forcing value)``.
    """
    from .mms import (ManufacturedSolution, fd_forcing_ac, fd_forcing_ns,
                      mms_forcing_ac, mms_forcing_ns)

    mms = ManufacturedSolution()
    rng = np.random.default_rng(seed)
    t = rng.uniform(1e-3, mms.t_ref, samples)
    x = rng.uniform(-0.999, 0.999, samples)
    y = rng.uniform(-0.999, 0.999, samples)

    def rel(hand, fd):
        hand = np.asarray(hand, dtype=float)
        fd = np.asarray(fd, dtype=float)
        return float(np.max(np.abs(hand - fd))
                     / max(1.0, np.max(np.abs(hand))))

    checks = []
    params = MixtureParams()
    checks.append(("phase forcing vs finite differences",
                   rel(mms_forcing_ac(mms, params, t, x, y),
                       fd_forcing_ac(mms, params, t, x, y)), 1e-6))
    checks.append(("momentum forcing vs finite differences",
                   rel(mms_forcing_ns(mms, params, t, x, y),
                       fd_forcing_ns(mms, params, t, x, y)), 1e-5))
    uneven = MixtureParams(mu_a=10.0, mu_b=2.0)
    checks.append(("momentum forcing, uneven viscosities",
                   rel(mms_forcing_ns(mms, uneven, t, x, y),
                       fd_forcing_ns(mms, uneven, t, x, y)), 1e-5))

    td = rng.uniform(0.0, mms.t_ref, 1000)
    xd = rng.uniform(-1.0, 1.0, 1000)
    yd = rng.uniform(-1.0, 1.0, 1000)
    u1_x, _u1_y, _u2_x, u2_y = mms.u_grad(td, xd, yd)
    checks.append(("divergence of the reference velocity",
                   float(np.max(np.abs(u1_x + u2_y))), 1e-12))

    edge = rng.uniform(-1.0, 1.0, 250)
    ones = np.ones_like(edge)
    tb = rng.uniform(0.0, mms.t_ref, 250)
    trace = 0.0
    for xe, ye in ((edge, -ones), (edge, ones), (-ones, edge), (ones, edge)):
        u1, u2 = mms.u(tb, xe, ye)
        trace = max(trace, float(np.max(np.hypot(u1, u2))))
    checks.append(("boundary trace of the reference velocity", trace, 1e-12))

    ok = True
    for name, observed, tol in checks:
        passed = observed <= tol
        ok = ok and passed
        log(f"[{'PASS' if passed else 'FAIL'}] {name}: "
            f"observed={observed:.3e} tolerance={tol:.1e}")
    return 0 if ok else 1


# -- argument parsing ------------------------------------------------------


_OVERRIDE_KEYS = ("method", "beta", "dt", "mesh_n", "t_final",
                  "tol_fixed_point", "output_dir", "scenario",
                  "snapshot_every", "max_fixed_point_iters")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE",
                        help="key=value configuration file")
    parser.add_argument("--preset", metavar="NAME",
                        help="named parameter bundle; see --list-presets")
    parser.add_argument("--method", choices=("fin", "fip", "sce"))
    parser.add_argument("--beta", type=float,
                        help="stabilization coefficient")
    parser.add_argument("--dt", type=float, help="time step")
    parser.add_argument("--mesh-n", type=int, dest="mesh_n",
                        help="subdivisions per direction of the square")
    parser.add_argument("--t-final", type=float, dest="t_final")
    parser.add_argument("--tol", type=float, dest="tol_fixed_point",
                        help="fixed-point stopping tolerance")
    parser.add_argument("--max-iters", type=int,
                        dest="max_fixed_point_iters",
                        help="fixed-point iteration cap")
    parser.add_argument("--scenario", choices=tuple(SCENARIOS))
    parser.add_argument("--out", dest="output_dir", metavar="DIR")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nsac",
        description="Strongly coupled two-phase flow solver with "
                    "verification and monitoring tools.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser(
        "run", help="run one configured simulation")
    _add_config_flags(run_p)
    run_p.add_argument("--snapshot-every", type=int, dest="snapshot_every",
                       help="write a field snapshot every N steps")
    run_p.add_argument("--list-presets", action="store_true",
                       help="list preset names and exit")
    run_p.set_defaults(func=_cmd_run)

    sweep_p = sub.add_parser(
        "sweep", help="run a stabilization-coefficient sweep")
    _add_config_flags(sweep_p)
    sweep_p.add_argument("--betas", metavar="B1,B2,...",
                         help="stabilization values to sweep")
    sweep_p.add_argument("--methods", metavar="M1,M2,...",
                         default="fin,fip",
                         help="comma-separated methods (default fin,fip)")
    sweep_p.add_argument("--parallel", type=int, default=0, metavar="N",
                         help="distribute runs over N processes")
    sweep_p.set_defaults(func=_cmd_sweep)

    verify_p = sub.add_parser(
        "verify-mms-forcing",
        help="check the hand-coded forcing against finite differences")
    verify_p.add_argument("--samples", type=int, default=100)
    verify_p.add_argument("--seed", type=int, default=7)
    verify_p.set_defaults(func=_cmd_verify)
    return parser


def _overrides_from(args: argparse.Namespace) -> dict:
    return {key: getattr(args, key, None) for key in _OVERRIDE_KEYS}


def _cmd_run(args) -> int:
    if args.list_presets:
        for name in sorted(PRESETS):
            print(name)
        return 0
    config = parse_config(args.config, args.preset, _overrides_from(args))
    return run_once(config)


def _cmd_sweep(args) -> int:
    config = parse_config(args.config, args.preset, _overrides_from(args))
    betas = _parse_float_list(args.betas) if args.betas else config.beta_sweep
    if not betas:
        raise ConfigError("sweep needs --betas or a beta_sweep config key")
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    for m in methods:
        if m not in ("fin", "fip", "sce"):
            raise ConfigError(f"unknown method {m!r} in --methods")
    lines = run_beta_sweep(config, betas, methods, parallel=args.parallel)
    os.makedirs(config.output_dir, exist_ok=True)
    path = os.path.join(config.output_dir, "sweep.csv")
    with open(path, "w", newline="") as handle:
        handle.write("\n".join(lines) + "\n")
    print(f"wrote {path}")
    return 0 if all(line.endswith(",converged") for line in lines[1:]) else 1


def _cmd_verify(args) -> int:
    return verify_mms_forcing(samples=args.samples, seed=args.seed)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
