"""Command-line entry point: ``wanewave <command> [options]``.

Every command writes CSV to ``--out`` (default stdout). The file starts with
``#`` comment lines naming the command and echoing the fully resolved
configuration as JSON. Exit status is 0 on success, 2 for input errors and 1
for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from contextlib import contextmanager
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .errors import NoEndemicEquilibrium, ParameterError, WanewaveError
from .model import HistoryFunction, ModelParams, endemic_equilibrium

log = logging.getLogger("wanewave")


def default_jobs() -> int:
    env = os.environ.get("WANEWAVE_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ParameterError(f"WANEWAVE_JOBS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def resolve_params(args) -> ModelParams:
    """Parameters from the optional JSON file, overridden by explicit flags."""
    data = {}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ParameterError("config file must hold a JSON object")
    for key in ("beta", "gamma", "d", "nu", "tau", "r0"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
            if key == "r0":
                data.pop("beta", None)
            elif key == "beta":
                data.pop("r0", None)
    return ModelParams.from_mapping(data)


@contextmanager
def _open_out(path: Optional[str]):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def write_csv(args, config: dict, columns: Sequence[str], rows, comments: Sequence[str] = ()) -> None:
    with _open_out(args.out) as fh:
        fh.write(f"# wanewave {__version__} {args.command}\n")
        fh.write(f"# config: {json.dumps(config, sort_keys=True)}\n")
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if math.isfinite(v) else ("nan" if math.isnan(v) else str(float(v)))
    if v is None:
        return ""
    return v


def _int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


# --- commands ---------------------------------------------------------------


def cmd_equilibrium(args, p: ModelParams, config: dict) -> None:
    eq = endemic_equilibrium(p)
    write_csv(args, config, ["beta", "gamma", "d", "nu", "tau", "r0", "s", "i"],
              [(p.beta, p.gamma, p.d, p.nu, p.tau, p.r0, eq.s, eq.i)])


def cmd_switches(args, p: ModelParams, config: dict) -> None:
    from .switching import find_switch_points

    prof = find_switch_points(p, tau_limit=args.tau_limit)
    comments = [f"unstable on {', '.join(f'({lo:.6g}, {hi:.6g})' for lo, hi in prof.merged_unstable_intervals()) or 'nothing'}"]
    comments += [f"tangential zero S_{sp.n} ({sp.branch}) at tau={sp.tau_star!r}" for sp in prof.tangential]
    write_csv(args, config, ["nu", "tau_star", "omega", "branch", "n", "delta"],
              [(p.nu, sp.tau_star, sp.omega, sp.branch, sp.n, sp.delta) for sp in prof.switch_points], comments)
    if args.intervals:
        with open(args.intervals, "w", newline="") as fh:
            fh.write(f"# wanewave {__version__} {args.command} intervals\n")
            fh.write(f"# config: {json.dumps(config, sort_keys=True)}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["nu", "tau_lo", "tau_hi", "verdict", "pair_count"])
            for lo, hi, verdict, count in prof.intervals:
                w.writerow([_fmt(p.nu), _fmt(lo), _fmt(hi), verdict, count])


def cmd_region(args, p: ModelParams, config: dict) -> None:
    from .switching import stability_region_2d

    nus = np.linspace(args.nu_min, args.nu_max, args.nu_steps)
    slices = stability_region_2d(nus, p, jobs=args.jobs, tau_limit=args.tau_limit)
    rows, comments = [], []
    for sl in slices:
        if sl.profile is None:
            comments.append(f"nu={sl.nu!r} skipped: {sl.error}")
            continue
        rows += [(sl.nu, sp.tau_star, sp.omega, sp.branch, sp.n, sp.delta) for sp in sl.profile.switch_points]
    write_csv(args, config, ["nu", "tau_star", "omega", "branch", "n", "delta"], rows, comments)


def cmd_region_dnu(args, p: ModelParams, config: dict) -> None:
    from .switching import stability_region_d_nu

    ds = np.linspace(args.d_min, args.d_max, args.d_steps)
    nus = np.linspace(args.nu_min, args.nu_max, args.nu_steps)
    cells = stability_region_d_nu(ds, nus, tau_fixed=args.tau, p_base=p, jobs=args.jobs)
    rows = []
    for c in cells:
        r0 = p.beta / (p.gamma + c.d)
        verdict = "" if c.unstable is None else ("unstable" if c.unstable else "stable")
        rows.append((c.d, c.nu, r0, verdict, c.pair_count, c.error or ""))
    write_csv(args, config, ["d", "nu", "r0", "verdict", "pair_count", "error"], rows)


def cmd_eigs(args, p: ModelParams, config: dict) -> None:
    from .spectral import rightmost_roots

    roots = rightmost_roots(p, k=args.count, m=args.m)
    write_csv(args, config, ["re", "im", "residual", "source"],
              [(r.lam.real, r.lam.imag, r.residual, r.source) for r in roots])


def cmd_hopf_converge(args, p: ModelParams, config: dict) -> None:
    from .spectral import hopf_convergence_study

    rows = hopf_convergence_study(p, args.m_list, reference=args.reference, half_width=args.half_width)
    write_csv(args, config, ["m", "tau_star", "error"], [(r.m, r.tau_star, r.error) for r in rows])


def cmd_simulate(args, p: ModelParams, config: dict) -> None:
    from .dynamics import integrate

    h = HistoryFunction.constant(args.s0, args.i0, p.tau, label="constant")
    traj = integrate(p, h, args.tmax, rtol=args.rtol, atol=args.atol)
    if args.dt:
        ts, vals = traj.sample(0.0, args.tmax, args.dt)
    else:
        ts, vals = traj.times, traj.states
    write_csv(args, config, ["t", "S", "I", "Y"], [(t, *v) for t, v in zip(ts, vals)])


def cmd_attractors(args, p: ModelParams, config: dict) -> None:
    from .dynamics import bistability_scan, default_history_grid

    hist = default_history_grid(p, n=args.grid, seed=args.seed)
    res = bistability_scan(p, hist, transient=args.transient, window=args.window, jobs=args.jobs)
    comments = [f"{len(res.runs)} runs, {len(res.errors)} failed"] + [f"error: {e}" for e in res.errors]
    write_csv(args, config, ["kind", "i_min", "i_max", "period", "peak_dispersion", "label"],
              [(a.kind, a.i_min, a.i_max, a.period, a.peak_dispersion, a.label) for a in res.attractors], comments)


def _diagram_sweep(task):
    from .scan import sweep_diagram

    p, lo, hi, steps, direction, transient, window = task
    return sweep_diagram(p, lo, hi, steps, direction, transient=transient, window=window)


def cmd_diagram(args, p: ModelParams, config: dict) -> None:
    directions = ["up", "down"] if args.both else [args.direction]
    tasks = [(p, args.tau_min, args.tau_max, args.steps, d, args.transient, args.window) for d in directions]
    if args.jobs > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=min(args.jobs, len(tasks))) as pool:
            sweeps = list(pool.map(_diagram_sweep, tasks))
    else:
        sweeps = [_diagram_sweep(t) for t in tasks]
    rows = [(r.tau, r.sweep, r.summary.kind, r.summary.i_min, r.summary.i_max, r.summary.period) for sweep in sweeps for r in sweep]
    write_csv(args, config, ["tau", "sweep", "kind", "i_min", "i_max", "period"], rows)


COMMANDS = {
    "equilibrium": cmd_equilibrium,
    "switches": cmd_switches,
    "region": cmd_region,
    "region-dnu": cmd_region_dnu,
    "eigs": cmd_eigs,
    "hopf-converge": cmd_hopf_converge,
    "simulate": cmd_simulate,
    "attractors": cmd_attractors,
    "diagram": cmd_diagram,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model parameters (flags override --config)")
    g.add_argument("--config", help="JSON file with keys beta, gamma, d, nu, tau (or r0 instead of beta)")
    g.add_argument("--beta", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--d", type=float)
    g.add_argument("--r0", type=float, help="set beta = r0 (gamma + d)")
    g.add_argument("--nu", type=float)
    common.add_argument("--out", "-o", help="output CSV path (default: stdout)")
    common.add_argument("--jobs", type=int, default=None, help="worker processes (default: $WANEWAVE_JOBS or all cores)")
    common.add_argument("--seed", type=int, default=0, help="seed for randomised history grids")
    common.add_argument("-v", "--verbose", action="count", default=0)

    with_tau = argparse.ArgumentParser(add_help=False)
    with_tau.add_argument("--tau", type=float)

    parser = _Parser(prog="wanewave", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    sp = sub.add_parser("equilibrium", parents=[common, with_tau], help="endemic equilibrium (S*, I*)")

    sp = sub.add_parser("switches", parents=[common], help="stability switch points over tau for one nu")
    sp.add_argument("--tau-limit", type=float, default=None, help="only seek switches below this delay")
    sp.add_argument("--intervals", help="also write the stability intervals to this CSV path")

    sp = sub.add_parser("region", parents=[common], help="switch points over a nu grid")
    sp.add_argument("--nu-min", type=float, required=True)
    sp.add_argument("--nu-max", type=float, required=True)
    sp.add_argument("--nu-steps", type=int, default=20)
    sp.add_argument("--tau-limit", type=float, default=None)

    sp = sub.add_parser("region-dnu", parents=[common, with_tau], help="stability verdicts on a (d, nu) grid at fixed tau")
    sp.add_argument("--d-min", type=float, default=0.005)
    sp.add_argument("--d-max", type=float, default=0.04)
    sp.add_argument("--d-steps", type=int, default=20)
    sp.add_argument("--nu-min", type=float, default=0.0)
    sp.add_argument("--nu-max", type=float, default=5.0)
    sp.add_argument("--nu-steps", type=int, default=20)

    sp = sub.add_parser("eigs", parents=[common, with_tau], help="rightmost characteristic roots")
    sp.add_argument("--m", type=int, default=40, help="collocation degree")
    sp.add_argument("--count", type=int, default=6)

    sp = sub.add_parser("hopf-converge", parents=[common], help="Hopf-location error against collocation degree")
    sp.add_argument("--m-list", type=_int_list, default=[10, 13, 16, 19, 22, 25, 28, 31])
    sp.add_argument("--reference", type=float, default=None, help="reference switch point (default: largest analytic one)")
    sp.add_argument("--half-width", type=float, default=0.3)

    sp = sub.add_parser("simulate", parents=[common, with_tau], help="integrate from a constant history")
    sp.add_argument("--s0", type=float, required=True)
    sp.add_argument("--i0", type=float, required=True)
    sp.add_argument("--tmax", type=float, required=True)
    sp.add_argument("--dt", type=float, default=None, help="resample on a uniform grid (default: accepted steps)")
    sp.add_argument("--rtol", type=float, default=1e-9)
    sp.add_argument("--atol", type=float, default=1e-12)

    sp = sub.add_parser("attractors", parents=[common, with_tau], help="distinct attractors from a grid of histories")
    sp.add_argument("--grid", type=int, default=3, help="lattice points per axis")
    sp.add_argument("--transient", type=float, default=500.0)
    sp.add_argument("--window", type=float, default=100.0)

    sp = sub.add_parser("diagram", parents=[common], help="warm-started sweep over tau")
    sp.add_argument("--tau-min", type=float, required=True)
    sp.add_argument("--tau-max", type=float, required=True)
    sp.add_argument("--steps", type=int, required=True)
    sp.add_argument("--direction", choices=["up", "down"], default="up")
    sp.add_argument("--both", action="store_true", help="run the up and the down sweep")
    sp.add_argument("--transient", type=float, default=300.0)
    sp.add_argument("--window", type=float, default=60.0)
    return parser


def _config(args, p: ModelParams) -> dict:
    skip = {"config", "out", "verbose", "beta", "gamma", "d", "r0", "nu", "tau"}
    opts = {k: v for k, v in vars(args).items() if k not in skip}
    return {"params": p.to_dict(), "r0": p.r0, "options": opts}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.jobs is None:
            args.jobs = default_jobs()
        if args.jobs < 1:
            raise ParameterError("--jobs must be at least 1")
        p = resolve_params(args)
        if args.command == "region-dnu":
            args.tau = p.tau if p.tau > 0 else 7.0
            p = p.with_(tau=args.tau)
        elif args.command in ("eigs", "simulate", "attractors") and p.tau <= 0:
            raise ParameterError(f"{args.command} needs --tau > 0")
        COMMANDS[args.command](args, p, _config(args, p))
    except (ParameterError, NoEndemicEquilibrium, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"wanewave {args.command}: input error: {exc}", file=sys.stderr)
        return 2
    except WanewaveError as exc:
        print(f"wanewave {args.command}: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
