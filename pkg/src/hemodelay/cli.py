"""Command line front end.

Subcommands: equilibria | coeffs | scan | simulate | sweep | reproduce.
Each run reads one config file (the packaged reference set by default),
overlays command-line flags, writes CSV artifacts plus a JSON manifest into
--out-dir, and exits 0 on success, 2 on configuration errors, 3 on numerical
failures, 4 when a reproduction check fails.

All CSV floats are written with repr, so two runs on the same config produce
byte-identical files; the manifest's duration field is the only
run-dependent value.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, RunOptions, default_config_path, parse_config
from .dde import (
    History,
    PeriodEstimate,
    Trajectory,
    classify_asymptotics,
    detect_period,
    integrate,
    scaled_equilibrium_history,
)
from .equilibria import Equilibrium, positive_equilibrium, tau_max, trivial_equilibrium
from .linearization import char_coeffs, linearize
from .model import InvalidStateError, ModelParams, NumericalError, SystemState
from .switch import ScanResult, positive_root_intervals
from .switch import scan as run_scan

_NO_EQ_SPAN = 10.0  # tau span for outputs when no positive equilibrium exists
_DEFAULT_GRID_STEP = 0.005
# reproduction runs: (tau, t_end, transient), windows sized to hold several
# oscillation periods past the transient
_REPRO_RUNS = ((0.5, 1000.0, 100.0), (1.4, 1200.0, 400.0), (2.8, 2500.0, 800.0), (2.9, 2500.0, 800.0))


def _fmt(v: object) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: Path, header: list[str], rows: list[tuple]) -> Path:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")
    return path


def _jsonable(v: object) -> object:
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def _merge(opts: RunOptions, args: argparse.Namespace) -> RunOptions:
    def pick(name: str, current):
        flag = getattr(args, name, None)
        return flag if flag is not None else current

    return RunOptions(
        tau=pick("tau", opts.tau),
        t_end=pick("t_end", opts.t_end),
        transient=pick("transient", opts.transient),
        max_step=pick("max_step", opts.max_step),
        history=pick("history", opts.history),
        grid_step=pick("grid_step", opts.grid_step),
        n_max=pick("n_max", opts.n_max),
        seed=pick("seed", opts.seed),
    )


def _load(args: argparse.Namespace) -> tuple[ModelParams, RunOptions, Path]:
    cfg = args.config if args.config is not None else default_config_path()
    params, opts = parse_config(cfg)
    return params, _merge(opts, args), Path(cfg)


def _tau_grid(span: float, step: float) -> list[float]:
    if not (math.isfinite(step) and step > 0.0):
        raise ConfigError(f"grid step must be positive and finite, got {step!r}")
    count = math.ceil(span / step)
    grid = [i * step for i in range(count)]
    while grid and grid[-1] >= span:
        grid.pop()
    if len(grid) < 2:
        raise ConfigError(f"grid step {step!r} too large for span {span!r}")
    return grid


def _manifest(
    subcommand: str,
    cfg: Path,
    params: ModelParams,
    opts: RunOptions,
    outputs: list[Path],
    checks: list[dict],
) -> dict:
    r = params.rates
    return {
        "subcommand": subcommand,
        "config_path": str(cfg),
        "config_sha256": hashlib.sha256(cfg.read_bytes()).hexdigest(),
        "resolved": {
            "delta": params.delta,
            "gamma": params.gamma,
            "mu": params.mu,
            "k": params.k,
            "tau": params.tau,
            "beta0": r.beta0,
            "G": r.G,
            "a": r.a,
            "K": r.K,
            "r": r.r,
            "tau_max": _jsonable(tau_max(params)),
        },
        "options": {
            "tau": opts.tau,
            "t_end": opts.t_end,
            "transient": opts.transient,
            "max_step": opts.max_step,
            "history": opts.history,
            "grid_step": opts.grid_step,
            "n_max": opts.n_max,
            "seed": opts.seed,
        },
        "outputs": [str(p) for p in outputs],
        "checks": checks,
        "duration_seconds": None,
    }


def _reference_equilibrium(params: ModelParams, tau: float) -> Equilibrium:
    """The attracting candidate: the positive equilibrium if it exists, else trivial."""
    eq = positive_equilibrium(params, tau)
    return eq if eq is not None else trivial_equilibrium(params)


def _make_history(params: ModelParams, tau: float, spec: str | None) -> History:
    spec = spec if spec is not None else "equilibrium*1.1"
    if spec.startswith("equilibrium"):
        rest = spec[len("equilibrium"):]
        if rest == "":
            factor = 1.0
        elif rest.startswith("*"):
            try:
                factor = float(rest[1:])
            except ValueError:
                raise ConfigError(f"bad history factor in {spec!r}") from None
        else:
            raise ConfigError(f"bad history spec {spec!r}")
        return scaled_equilibrium_history(_reference_equilibrium(params, tau), factor)
    parts = spec.split(",")
    if len(parts) != 3:
        raise ConfigError(
            f"history must be 'equilibrium*FACTOR' or a 'Q,M,E' triple, got {spec!r}"
        )
    try:
        q, m, e = (float(x) for x in parts)
    except ValueError:
        raise ConfigError(f"bad history triple {spec!r}") from None
    return History.constant(SystemState(q, m, e))


def _equilibria_rows(params: ModelParams, grid: list[float]) -> list[tuple]:
    e0 = trivial_equilibrium(params).E
    rows = []
    for t in grid:
        eq = positive_equilibrium(params, t)
        rows.append(
            (t, 0.0, 0.0, e0)
            + ((eq.Q, eq.M, eq.E) if eq is not None else (None, None, None))
        )
    return rows


_EQ_HEADER = ["tau", "Q_trivial", "M_trivial", "E_trivial", "Q_positive", "M_positive", "E_positive"]


def _cmd_equilibria(args: argparse.Namespace) -> tuple[dict, int]:
    params, opts, cfg = _load(args)
    step = opts.grid_step if opts.grid_step is not None else _DEFAULT_GRID_STEP
    tm = tau_max(params)
    span = tm if tm is not None and math.isfinite(tm) else _NO_EQ_SPAN
    grid = _tau_grid(span, step)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    out = _write_csv(
        args.out_dir / "equilibria.csv", _EQ_HEADER, _equilibria_rows(params, grid)
    )
    print(f"tau_max = {tm}")
    if tm is None:
        print("no positive equilibrium at any delay")
    return _manifest("equilibria", cfg, params, opts, [out], []), 0


_COEFF_HEADER = [
    "tau", "A", "B", "C", "D", "G", "H",
    "a1", "a2", "a3", "a4", "a5", "a6", "b1", "b2", "b3",
]


def _coeff_rows(params: ModelParams, grid: list[float]) -> list[tuple]:
    rows = []
    for t in grid:
        eq = positive_equilibrium(params, t)
        if eq is None:
            continue
        lc = linearize(params, eq, t)
        cc = char_coeffs(lc, params.mu, params.k)
        rows.append(
            (t, lc.A, lc.B, lc.C, lc.D, lc.G, lc.H,
             cc.a1, cc.a2, cc.a3, cc.a4, cc.a5, cc.a6, cc.b1, cc.b2, cc.b3)
        )
    return rows


def _cmd_coeffs(args: argparse.Namespace) -> tuple[dict, int]:
    params, opts, cfg = _load(args)
    step = opts.grid_step if opts.grid_step is not None else _DEFAULT_GRID_STEP
    tm = tau_max(params)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    rows: list[tuple] = []
    if tm is not None:
        rows = _coeff_rows(params, _tau_grid(tm if math.isfinite(tm) else _NO_EQ_SPAN, step))
    else:
        print("no positive equilibrium at any delay; nothing to linearize")
    out = _write_csv(args.out_dir / "coeffs.csv", _COEFF_HEADER, rows)
    return _manifest("coeffs", cfg, params, opts, [out], []), 0


def _scan_outputs(args_out_dir: Path, result: ScanResult, n_max: int) -> list[Path]:
    outputs = []
    for n in range(n_max + 1):
        rows = [
            (t, c.branch, s)
            for c in result.curves
            if c.n == n
            for t, s in c.samples
        ]
        outputs.append(
            _write_csv(args_out_dir / f"s{n}_curve.csv", ["tau", "branch", "S"], rows)
        )
    outputs.append(
        _write_csv(
            args_out_dir / "switches.csv",
            ["tau_star", "omega_star", "n", "branch", "transversality", "direction", "residual", "refined"],
            [
                (r.tau_star, r.omega_star, r.n, r.branch, r.transversality,
                 r.direction, r.residual, int(r.refined))
                for r in result.reports
            ],
        )
    )
    outputs.append(
        _write_csv(
            args_out_dir / "partition.csv",
            ["tau_lo", "tau_hi", "verdict"],
            list(result.partition),
        )
    )
    return outputs


def _cmd_scan(args: argparse.Namespace) -> tuple[dict, int]:
    params, opts, cfg = _load(args)
    step = opts.grid_step if opts.grid_step is not None else _DEFAULT_GRID_STEP
    tm = tau_max(params)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    if tm is None:
        print("no positive equilibrium at any delay; scan skipped")
        return _manifest("scan", cfg, params, opts, [], []), 0
    grid = _tau_grid(tm if math.isfinite(tm) else _NO_EQ_SPAN, step)
    result = run_scan(params, grid, opts.n_max)
    outputs = _scan_outputs(args.out_dir, result, opts.n_max)
    for r in result.reports:
        print(
            f"crossing: tau*={r.tau_star:.6f} omega*={r.omega_star:.6f} "
            f"n={r.n} branch={r.branch} {r.direction} residual={r.residual:.2e}"
        )
    for lo, hi, verdict in result.partition:
        print(f"[{lo:.6f}, {hi:.6f}): {verdict}")
    return _manifest("scan", cfg, params, opts, outputs, []), 0


def _simulate_once(
    params: ModelParams,
    tau: float,
    t_end: float,
    transient: float,
    max_step: float | None,
    history_spec: str | None,
) -> tuple[Trajectory, str, PeriodEstimate | None, Equilibrium]:
    if not t_end > transient >= 0.0:
        raise ConfigError(
            f"need t_end > transient >= 0, got t_end={t_end!r}, transient={transient!r}"
        )
    p = replace(params, tau=tau)
    hist = _make_history(p, tau, history_spec)
    traj = integrate(p, hist, t_end, max_step=max_step)
    eq = _reference_equilibrium(p, tau)
    verdict = classify_asymptotics(traj, eq, transient)
    period = detect_period(traj, "Q", transient)
    return traj, verdict, period, eq


def _cmd_simulate(args: argparse.Namespace) -> tuple[dict, int]:
    params, opts, cfg = _load(args)
    if opts.tau is None:
        raise ConfigError("tau is required: pass --tau or set run.tau in the config")
    tau = opts.tau
    t_end = opts.t_end if opts.t_end is not None else 1000.0
    transient = opts.transient if opts.transient is not None else 100.0
    traj, verdict, period, _eq = _simulate_once(
        params, tau, t_end, transient, opts.max_step, opts.history
    )
    args.out_dir.mkdir(parents=True, exist_ok=True)
    out = args.out if args.out is not None else args.out_dir / f"sim_tau{tau:g}.csv"
    stride = args.stride
    if stride < 1:
        raise ConfigError(f"--stride must be at least 1, got {stride}")
    rows = [
        (t, s.Q, s.M, s.E)
        for i, (t, s) in enumerate(zip(traj.times, traj.states))
        if i % stride == 0
    ]
    _write_csv(Path(out), ["t", "Q", "M", "E"], rows)
    print(f"verdict: {verdict}")
    if period is not None:
        print(f"period: {period.period:.3f} +- {period.std:.3f} over {period.n_peaks} peaks")
    manifest = _manifest("simulate", cfg, replace(params, tau=tau), opts, [Path(out)], [])
    manifest["resolved"]["verdict"] = verdict
    manifest["resolved"]["period"] = None if period is None else period.period
    return manifest, 0


def _cmd_sweep(args: argparse.Namespace) -> tuple[dict, int]:
    params, opts, cfg = _load(args)
    if args.tau_max_flag is None:
        raise ConfigError("--tau-max is required for sweep")
    lo, hi, step = args.tau_min, args.tau_max_flag, args.tau_step
    if not (step > 0.0 and hi >= lo >= 0.0):
        raise ConfigError(
            f"need tau-max >= tau-min >= 0 and tau-step > 0, got {lo!r}, {hi!r}, {step!r}"
        )
    t_end = opts.t_end if opts.t_end is not None else 1200.0
    transient = opts.transient if opts.transient is not None else 400.0
    max_step = opts.max_step if opts.max_step is not None else 0.05
    rows = []
    taus = []
    t = lo
    while t <= hi + 1e-12:
        taus.append(round(t, 12))
        t = lo + len(taus) * step
    for tau in taus:
        _traj, verdict, period, _eq = _simulate_once(
            params, tau, t_end, transient, max_step, opts.history
        )
        rows.append(
            (tau, verdict,
             None if period is None else period.period,
             None if period is None else period.std,
             None if period is None else period.amplitude_ratio)
        )
        print(f"tau={tau:g}: {verdict}" + (f", period {period.period:.2f}" if period else ""))
    args.out_dir.mkdir(parents=True, exist_ok=True)
    out = _write_csv(
        args.out_dir / "sweep.csv",
        ["tau", "verdict", "period", "period_std", "amplitude_ratio"],
        rows,
    )
    return _manifest("sweep", cfg, params, opts, [out], []), 0


def _check(name: str, passed: bool, detail: str) -> dict:
    print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    return {"name": name, "passed": bool(passed), "detail": detail}


def _cmd_reproduce(args: argparse.Namespace) -> tuple[dict, int]:
    params, opts, cfg = _load(args)
    step = opts.grid_step if opts.grid_step is not None else _DEFAULT_GRID_STEP
    args.out_dir.mkdir(parents=True, exist_ok=True)
    tm = tau_max(params)
    outputs: list[Path] = []
    checks: list[dict] = []

    if tm is None:
        grid = _tau_grid(_NO_EQ_SPAN, step)
        outputs.append(
            _write_csv(args.out_dir / "equilibria.csv", _EQ_HEADER, _equilibria_rows(params, grid))
        )
        print("no positive equilibrium at any delay; scan and simulations skipped")
        manifest = _manifest("reproduce", cfg, params, opts, outputs, checks)
        manifest["note"] = "no positive equilibrium"
        return manifest, 0

    span = tm if math.isfinite(tm) else _NO_EQ_SPAN
    grid = _tau_grid(span, step)

    outputs.append(
        _write_csv(args.out_dir / "equilibria.csv", _EQ_HEADER, _equilibria_rows(params, grid))
    )
    checks.append(
        _check("existence_threshold", abs(tm - 2.99) <= 0.01, f"tau_max = {tm!r}")
    )

    f0k = trivial_equilibrium(params).E
    eq_near = positive_equilibrium(params, tm - 1e-6)
    if eq_near is None:
        dist = math.inf
    else:
        dist = max(abs(eq_near.Q), abs(eq_near.M), abs(eq_near.E - f0k))
    checks.append(
        _check(
            "trivial_limit",
            abs(f0k - 2346.4) <= 0.5 and dist <= 1e-3,
            f"f(0)/k = {f0k!r}; distance at tau_max - 1e-6 = {dist!r}",
        )
    )

    coeff_rows = _coeff_rows(params, grid)
    outputs.append(_write_csv(args.out_dir / "coeffs.csv", _COEFF_HEADER, coeff_rows))
    intervals = positive_root_intervals(params, grid)
    window_ok = (
        len(intervals) == 1
        and intervals[0][0] <= 1e-12
        and abs(intervals[0][1] - 2.92) <= 0.01
    )
    signs_ok = all(
        row[14] > 0.0 and row[15] < 0.0 for row in coeff_rows if row[0] <= 2.9
    )
    checks.append(
        _check(
            "root_window",
            window_ok and signs_ok,
            f"intervals = {intervals!r}; b2>0 and b3<0 on [0, 2.9]: {signs_ok}",
        )
    )

    result = run_scan(params, grid, opts.n_max)
    outputs.extend(_scan_outputs(args.out_dir, result, opts.n_max))
    refined = [r for r in result.reports if r.refined]
    s1_rootless = not any(r.n >= 1 for r in result.reports)
    switches_ok = (
        len(refined) == 2
        and len(result.reports) == 2
        and abs(refined[0].tau_star - 1.40) <= 0.05
        and refined[0].direction == "destabilizing"
        and abs(refined[1].tau_star - 2.82) <= 0.02
        and refined[1].direction == "stabilizing"
        and s1_rootless
        and all(r.residual < 1e-8 for r in refined)
    )
    checks.append(
        _check(
            "stability_switches",
            switches_ok,
            "crossings = "
            + repr([(r.tau_star, r.direction, r.residual) for r in result.reports])
            + f"; S1 rootless: {s1_rootless}",
        )
    )

    verdicts: dict[float, str] = {}
    periods: dict[float, float | None] = {}
    for tau, t_end, transient in _REPRO_RUNS:
        traj, verdict, period, _eq = _simulate_once(
            params, tau, t_end, transient, opts.max_step, opts.history
        )
        verdicts[tau] = verdict
        periods[tau] = None if period is None else period.period
        outputs.append(
            _write_csv(
                args.out_dir / f"sim_tau{tau:g}.csv",
                ["t", "Q", "M", "E"],
                [(t, s.Q, s.M, s.E) for t, s in zip(traj.times, traj.states)],
            )
        )
    regimes_ok = (
        verdicts[0.5] == "converging"
        and verdicts[2.9] == "converging"
        and verdicts[1.4] == "sustained-oscillation"
        and verdicts[2.8] == "sustained-oscillation"
    )
    checks.append(_check("regimes", regimes_ok, f"verdicts = {verdicts!r}"))
    p14, p28 = periods[1.4], periods[2.8]
    periods_ok = (
        p14 is not None
        and abs(p14 - 100.0) <= 15.0
        and p28 is not None
        and abs(p28 - 220.0) <= 25.0
    )
    checks.append(
        _check("oscillation_periods", periods_ok, f"periods = {periods!r}")
    )

    manifest = _manifest("reproduce", cfg, params, opts, outputs, checks)
    return manifest, 0 if all(c["passed"] for c in checks) else 4


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None,
                        help="parameter file (default: packaged reference set)")
    common.add_argument("--out-dir", type=Path, default=Path("out"),
                        help="directory for CSV artifacts and the manifest")
    common.add_argument("--grid-step", dest="grid_step", type=float, default=None,
                        help="tau grid spacing (default 0.005)")
    common.add_argument("--seed", type=int, default=None,
                        help="recorded in the manifest; all pipelines are deterministic")

    run_flags = argparse.ArgumentParser(add_help=False)
    run_flags.add_argument("--t-end", dest="t_end", type=float, default=None)
    run_flags.add_argument("--transient", type=float, default=None)
    run_flags.add_argument("--max-step", dest="max_step", type=float, default=None)
    run_flags.add_argument("--history", type=str, default=None,
                           help="'equilibrium*FACTOR' (default equilibrium*1.1) or a 'Q,M,E' triple")

    parser = argparse.ArgumentParser(
        prog="hemodelay",
        description="Delayed hematopoiesis model: equilibria, stability switches, simulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("equilibria", parents=[common],
                       help="steady states over the delay range (CSV)")
    p.set_defaults(handler=_cmd_equilibria)

    p = sub.add_parser("coeffs", parents=[common],
                       help="linearization and characteristic coefficients per tau (CSV)")
    p.set_defaults(handler=_cmd_coeffs)

    p = sub.add_parser("scan", parents=[common],
                       help="S_n curves, stability switches and the stability partition")
    p.add_argument("--n-max", dest="n_max", type=int, default=None)
    p.set_defaults(handler=_cmd_scan)

    p = sub.add_parser("simulate", parents=[common, run_flags],
                       help="integrate the system at one delay")
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--out", type=Path, default=None, help="CSV path (default out-dir/sim_tau*.csv)")
    p.add_argument("--stride", type=int, default=1, help="write every Nth mesh point")
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("sweep", parents=[common, run_flags],
                       help="simulate over a tau grid and classify each run")
    p.add_argument("--tau-min", dest="tau_min", type=float, default=0.0)
    p.add_argument("--tau-max", dest="tau_max_flag", type=float, default=None)
    p.add_argument("--tau-step", dest="tau_step", type=float, default=0.1)
    p.set_defaults(handler=_cmd_sweep)

    p = sub.add_parser("reproduce", parents=[common, run_flags],
                       help="full pipeline with reproduction checks; exit 4 if any fails")
    p.add_argument("--n-max", dest="n_max", type=int, default=None)
    p.set_defaults(handler=_cmd_reproduce)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        manifest, code = args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InvalidStateError as exc:
        print(f"invalid state: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    manifest["duration_seconds"] = time.perf_counter() - start
    args.out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = args.out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"manifest: {manifest_path}")
    return code


if __name__ == "__main__":
    sys.exit(main())
