"""Command-line interface.

Exit codes: 0 success, 2 numerical failure (divergence, solver or
quadrature failure), 3 input error (bad arguments, files or parameters).
Output files go to ``--out``, defaulting to ``$DISLOCATION_DDE_OUT`` or the
current directory. ``--config FILE`` supplies option defaults as flat
``key=value`` lines (keys are option names, dashes or underscores).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import AnalyticSolution, ConstantModel, t_cr_constant
from .errors import AccuracyError, DivergenceError, DomainError, FormatError, SolverError
from .error_harness import CASES, get_case, run_case, stability_scan
from .integrators import METHOD_ALIASES, detect_t_cr, solve_constant
from .quadrature import QuadratureConfig
from .scenarios import (
    DEFAULT_RHO0,
    build_track,
    compare_lines,
    get_preset,
    load_preset_file,
    load_track_csv,
    read_key_values,
    run_scenario,
)

OUT_ENV = "DISLOCATION_DDE_OUT"
EXIT_OK, EXIT_NUMERIC, EXIT_INPUT = 0, 2, 3


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _csv_list(text, conv=str):
    items = [s.strip() for s in str(text).split(",") if s.strip()]
    return [conv(s) for s in items]


def _model_args(p, with_case=True):
    if with_case:
        p.add_argument("--case", choices=list(CASES), help="benchmark parameter set")
    g = p.add_argument_group("model parameters (override the case)")
    for name in ("A1", "A2", "A3", "a8", "rho0"):
        g.add_argument(f"--{name}", type=float)
    g.add_argument("--rho-cr", type=float, dest="rho_cr")
    g.add_argument("--t-cr", type=float, dest="t_cr", help="delay; default from the closed form")


def _method_arg(p):
    p.add_argument("--method", default="rk4", choices=sorted(METHOD_ALIASES))


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or .)")
    common.add_argument("--config", default=None, help="key=value file with option defaults")

    ap = _Parser(prog="dislocation-dde", description="Dislocation-density DDE solver")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("solve", parents=[common], help="solve the constant-coefficient model")
    _model_args(p)
    _method_arg(p)
    p.add_argument("--N", type=int, default=1000, help="steps per delay interval")
    p.add_argument("--intervals", type=int, default=10)
    p.add_argument("--preset", help="solve the full model for a preset along --track instead")
    p.add_argument("--preset-file")
    p.add_argument("--track")
    p.add_argument("--horizon", type=float)

    p = sub.add_parser("analytic", parents=[common], help="tabulate the reference solution")
    _model_args(p)
    p.add_argument("--points", type=int, default=100, help="samples per delay interval")
    p.add_argument("--intervals", type=int, default=None)
    p.add_argument("--exact", action="store_true", help="pointwise quadrature instead of the table")

    p = sub.add_parser("tcr", parents=[common], help="critical time: closed form and detection")
    _model_args(p)
    p.add_argument("--preset")
    p.add_argument("--preset-file")
    p.add_argument("--track")
    p.add_argument("--horizon", type=float)
    p.add_argument("--step", type=float)

    p = sub.add_parser("convergence", parents=[common], help="error ladder and orders")
    p.add_argument("--case", choices=list(CASES), default="ii")
    p.add_argument("--methods", default="euler,beuler,rk4")
    p.add_argument("--ladder", default=None, help="comma-separated N values")
    p.add_argument("--window-only", action="store_true",
                   help="a8=1 cases: compare only on the analytic window")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("stability", parents=[common], help="classify oscillations over A3")
    p.add_argument("--case", choices=list(CASES), default="v")
    p.add_argument("--A3", default="0,0.5,1,1.5,2,3,4,5", help="comma-separated A3 values")
    p.add_argument("--N", type=int, default=1000)
    p.add_argument("--intervals", type=int, default=10)
    _method_arg(p)

    p = sub.add_parser("scenario", parents=[common], help="full model along a track")
    p.add_argument("--preset", default="copper")
    p.add_argument("--preset-file")
    p.add_argument("--track")
    p.add_argument("--compare", nargs=2, metavar=("CENTER", "SURFACE"))
    p.add_argument("--rho0", type=float, default=DEFAULT_RHO0)
    _method_arg(p)
    p.add_argument("--N", type=int, default=1000)
    p.add_argument("--horizon", type=float)
    return ap


# ---------------------------------------------------------------------------
# helpers


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _model(args) -> ConstantModel:
    base = get_case(args.case).model if getattr(args, "case", None) else CASES["ii"].model
    changes = {k: getattr(args, k) for k in ("A1", "A2", "A3", "a8", "rho0", "rho_cr")
               if getattr(args, k, None) is not None}
    return base.replace(**changes)


def _delay(model: ConstantModel, t_cr: float | None) -> float:
    if t_cr is not None:
        if not t_cr > 0:
            raise DomainError("--t-cr must be positive")
        return t_cr
    if model.A1 == 0:
        # no hardening: the critical time collapses; any positive delay works
        return 1.0
    return t_cr_constant(model)


def _preset(args):
    if getattr(args, "preset_file", None):
        return load_preset_file(args.preset_file)
    return get_preset(args.preset)


def _write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True, default=float) + "\n",
                          encoding="utf-8")


def _positive_int(value, name):
    if value is None or value < 1:
        raise DomainError(f"{name} must be a positive integer")
    return value


# ---------------------------------------------------------------------------
# commands


def cmd_solve(args) -> int:
    _positive_int(args.N, "--N")
    if args.preset or args.preset_file or args.track:
        if not args.track:
            raise InputError("--track is required with --preset")
        res = run_scenario(_preset(args) if (args.preset or args.preset_file) else "copper",
                           args.track, args.rho0 if args.rho0 is not None else DEFAULT_RHO0,
                           args.method, args.N, args.horizon, args.t_cr)
        path, summary = res.path, res.summary()
    else:
        _positive_int(args.intervals, "--intervals")
        model = _model(args)
        t_cr = _delay(model, args.t_cr)
        path = solve_constant(model, args.method, args.N, args.intervals, t_cr=t_cr)
        t, y = path.flat()
        summary = {
            "model": {"A1": model.A1, "A2": model.A2, "A3": model.A3, "a8": model.a8,
                      "rho0": model.rho0, "rho_cr": model.rho_cr},
            "t_cr": t_cr, "method": path.method, "N": args.N, "intervals": args.intervals,
            "rho_max": float(np.max(y)), "rho_min": float(np.min(y)), "rho_end": float(y[-1]),
            "flags": {"went_negative": path.went_negative, "exceeded_bound": path.exceeded_bound},
        }
    out = _out_dir(args)
    path.to_csv(out / "solution.csv")
    _write_json(out / "summary.json", summary)
    print(f"wrote {out / 'solution.csv'} and {out / 'summary.json'}")
    return EXIT_OK


def cmd_analytic(args) -> int:
    model = _model(args)
    if model.a8 not in (0, 1):
        raise DomainError("the analytic reference needs a8 in {0, 1}")
    _positive_int(args.points, "--points")
    sol = AnalyticSolution.from_model(model, QuadratureConfig())
    n = args.intervals or (sol.max_intervals or 10)
    if sol.max_intervals is not None and n > sol.max_intervals:
        raise DomainError(f"a8=1 reference is limited to {sol.max_intervals} intervals")
    rows = []
    for j in range(n):
        ts = j * sol.t_cr + np.arange(args.points + (1 if j == n - 1 else 0)) * sol.t_cr / args.points
        iv = sol.interval(j)
        ys = [iv.exact(t) for t in ts] if args.exact else iv(ts)
        rows += [(j, float(t), float(y)) for t, y in zip(ts, np.atleast_1d(ys))]
    out = _out_dir(args)
    with open(out / "analytic.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["interval", "t", "rho"])
        for j, t, y in rows:
            w.writerow([j, f"{t:.17g}", f"{y:.17g}"])
    _write_json(out / "analytic.json", {
        "t_cr": sol.t_cr, "intervals": n, "points": args.points, "exact": args.exact,
        "error_bound": max(sol.interval(j).error_bound for j in range(n)),
    })
    print(f"wrote {out / 'analytic.csv'}")
    return EXIT_OK


def cmd_tcr(args) -> int:
    if args.preset or args.preset_file or args.track:
        if not args.track:
            raise InputError("--track is required with --preset")
        preset = _preset(args) if (args.preset or args.preset_file) else get_preset("copper")
        track = build_track(preset, load_track_csv(args.track))
        rho0 = args.rho0 if args.rho0 is not None else DEFAULT_RHO0
        hit = detect_t_cr(track, rho0, args.horizon or track.t_last, args.step)
        result = {"preset": preset.name, "closed_form": None,
                  "detected": None if hit is None else hit.t,
                  "rho_at_t_cr": None if hit is None else hit.rho}
    else:
        from .coefficients import CoefficientTrack

        model = _model(args)
        closed = t_cr_constant(model)
        track = CoefficientTrack.constant(model.A1, model.A2, model.A3, rho_cr=model.rho_cr, a8=model.a8)
        hit = detect_t_cr(track, model.rho0, args.horizon or 4.0 * closed, args.step)
        result = {"closed_form": closed, "detected": None if hit is None else hit.t,
                  "rho_at_t_cr": None if hit is None else hit.rho,
                  "abs_diff": None if hit is None else abs(hit.t - closed)}
    out = _out_dir(args)
    _write_json(out / "tcr.json", result)
    print(json.dumps(result, sort_keys=True, default=float))
    return EXIT_OK


def cmd_convergence(args) -> int:
    methods = _csv_list(args.methods)
    if not methods:
        raise InputError("empty method list")
    for m in methods:
        if m.lower() not in METHOD_ALIASES:
            raise InputError(f"unknown method {m!r}")
    ladder = None
    if args.ladder is not None:
        try:
            ladder = _csv_list(args.ladder, int)
        except ValueError:
            raise InputError("--ladder must be comma-separated integers") from None
        if not ladder or any(n < 1 for n in ladder):
            raise InputError("--ladder needs positive integers")
    report = run_case(args.case, methods, ladder, window_only=args.window_only,
                      workers=max(1, args.workers))
    out = _out_dir(args)
    report.to_csv(out / f"convergence_{args.case}.csv")
    table = report.text_table()
    (out / f"convergence_{args.case}.txt").write_text(table, encoding="utf-8")
    print(table, end="")
    return EXIT_OK


def cmd_stability(args) -> int:
    try:
        values = _csv_list(args.A3, float)
    except ValueError:
        raise InputError("--A3 must be comma-separated numbers") from None
    if not values:
        raise InputError("empty A3 list")
    if any(not math.isfinite(v) or v < 0 for v in values):
        raise InputError("A3 values must be finite and nonnegative")
    _positive_int(args.N, "--N")
    results = stability_scan(get_case(args.case).model, values, args.N, args.intervals, args.method)
    out = _out_dir(args)
    with open(out / "stability.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["A3", "ratio", "label", "sign_changes", "growth", "steady"])
        for r in results:
            w.writerow([repr(r.A3), repr(r.ratio), r.label, r.sign_changes,
                        "" if r.growth is None else repr(r.growth), repr(r.steady)])
    for r in results:
        g = "-" if r.growth is None else f"{r.growth:.3f}"
        print(f"A3={r.A3:<8g} A3/A2={r.ratio:<8g} {r.label:<20} sign changes={r.sign_changes:<3} growth={g}")
    return EXIT_OK


def cmd_scenario(args) -> int:
    preset = _preset(args)
    _positive_int(args.N, "--N")
    out_files = []
    if args.compare:
        center_samples = load_track_csv(args.compare[0])
        surface_samples = load_track_csv(args.compare[1])
        rc = run_scenario(preset, center_samples, args.rho0, args.method, args.N, args.horizon)
        rs = run_scenario(preset, surface_samples, args.rho0, args.method, args.N, args.horizon)
        cmp = compare_lines(rc, rs)
        out = _out_dir(args)
        for tag, res in (("center", rc), ("surface", rs)):
            res.to_csv(out / f"scenario_{tag}.csv")
            res.to_json(out / f"scenario_{tag}.json")
        _write_json(out / "comparison.json", {
            "first": cmp.first, "t_cr_center": cmp.t_cr_center,
            "t_cr_surface": cmp.t_cr_surface, "report": cmp.text,
        })
        print(cmp.text)
        return EXIT_OK
    if not args.track:
        raise InputError("scenario needs --track or --compare")
    res = run_scenario(preset, args.track, args.rho0, args.method, args.N, args.horizon)
    out = _out_dir(args)
    res.to_csv(out / "scenario.csv")
    res.to_json(out / "scenario.json")
    print(json.dumps(res.summary(), sort_keys=True, default=float))
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "analytic": cmd_analytic,
    "tcr": cmd_tcr,
    "convergence": cmd_convergence,
    "stability": cmd_stability,
    "scenario": cmd_scenario,
}


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    kv = read_key_values(known.config)
    command = next((a for a in argv if a in COMMANDS), None)
    if command is None:
        return
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    subparser = sub.choices[command]
    dests = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, value in kv.items():
        dest = key.replace("-", "_")
        if dest not in dests or dest in ("help", "config"):
            raise FormatError(f"unknown config key {key!r}")
        action = dests[dest]
        if isinstance(action, argparse._StoreTrueAction):
            defaults[dest] = value.strip().lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            try:
                defaults[dest] = action.type(value)
            except ValueError:
                raise FormatError(f"config key {key!r}: bad value {value!r}") from None
        else:
            defaults[dest] = value
    subparser.set_defaults(**defaults)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    except (DivergenceError, SolverError, AccuracyError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, DomainError, FormatError, FileNotFoundError, ValueError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
