"""Command-line front end: ``sheetlab <command> [options]``.

Every randomized command needs ``--seed``.  Options may also come from a
``--config`` file of ``key = value`` lines (keys are option names with or
without leading dashes); flags given on the command line win.  Reports are
JSON with a ``header`` (the only place a timestamp appears), the effective
``config`` and a ``result``.  Exit status: 0 on success, 1 if any verdict
is false, 2 on usage errors.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import averaging, gronwall, localtime, solver
from .drift import parse_drift
from .field import GridSpec, coarsen, generate_sheet, read_csv, sup_norm, write_csv
from .girsanov import martingale_check
from .montecarlo import derive_seeds, ordered_map
from .uniqueness import uniqueness_experiment as _uniqueness_on_path


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _eta_grid(text: str) -> np.ndarray:
    """``start:stop:count`` (inclusive linspace) or a comma list."""
    if ":" in text:
        a, b, c = text.split(":")
        return np.linspace(float(a), float(b), int(c))
    return np.array(_floats(text))


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _to_jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _collect_verdicts(obj) -> list:
    out = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            if k == "verdict":
                out.append(v)
            else:
                out.extend(_collect_verdicts(v))
    elif isinstance(obj, list):
        for v in obj:
            out.extend(_collect_verdicts(v))
    return out


def _emit(args, result: dict) -> int:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config") and v is not None}
    doc = {
        "header": {"command": args.command, "version": __version__,
                   "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat()},
        "config": _to_jsonable(config),
        "result": _to_jsonable(result),
    }
    text = json.dumps(doc, indent=2, sort_keys=True)
    if getattr(args, "report", None):
        Path(args.report).write_text(text + "\n")
    else:
        print(text)
    return 1 if any(v is False for v in _collect_verdicts(doc["result"])) else 0


def _need_seed(args) -> int:
    if args.seed is None:
        raise UsageError(f"'{args.command}' is randomized and needs --seed")
    return int(args.seed)


def _sheet_from_args(args):
    if getattr(args, "sheet", None):
        sheet = read_csv(args.sheet)
        return sheet
    return generate_sheet(GridSpec(args.grid_n, args.dim), _need_seed(args))


# ----------------------------------------------------------------- commands


def cmd_simulate(args) -> int:
    sheet = generate_sheet(GridSpec(args.grid_n, args.dim), _need_seed(args))
    if not args.out:
        raise UsageError("simulate needs --out")
    write_csv(sheet, args.out)
    return _emit(args, {"N": sheet.n, "d": sheet.dim, "sup_norm": sup_norm(sheet), "W_11": sheet.values[-1, -1]})


def cmd_solve(args) -> int:
    sheet = _sheet_from_args(args)
    drift = parse_drift(args.drift)
    boundary = solver.BoundaryTrace.constant(sheet.grid, args.boundary)
    if args.scheme == "explicit":
        sol = solver.solve_explicit(drift, sheet, boundary)
    elif args.scheme == "picard":
        sol = solver.solve_picard(drift, sheet, boundary, tol=args.tol, max_iter=args.max_iter)
    else:
        sol = solver.solve_truncated(drift, sheet, boundary)
    if args.out:
        write_csv(sol.field, args.out)
    return _emit(args, sol.report(drift, sheet))


def cmd_gronwall(args) -> int:
    result: dict = {}
    if args.vanishing:
        rep = gronwall.vanishing_check(args.n_max, args.d, args.c1)
        doc = rep.as_dict()
        doc["L"] = {str(n): v for n, v in zip(doc.pop("n"), doc["L"])}
        doc["precondition_ok"] = {str(n): ok for n, ok in zip(rep.n_values, doc["precondition_ok"])}
        result["vanishing"] = doc
    if args.table:
        table = gronwall.discrete_bound_table(args.n, args.d, args.c1, args.beta_log2)
        if args.out:
            table.to_csv(args.out)
        lo, hi = gronwall.beta_interval_log2(args.n)
        result["table"] = {"n": args.n, "d": args.d, "c1": args.c1, "beta_log2": args.beta_log2,
                           "growth_log2": table.growth_log2, "corner_log2": table.entry(2**args.n, 2**args.n),
                           "beta_interval_log2": [lo, hi]}
    if args.resolvent:
        result["resolvent"] = {"M": args.M, "N": args.resolvent_n,
                               "residual": gronwall.verify_resolvent(args.M, args.resolvent_n),
                               "i0_2sqrtM": gronwall.bessel_i0(2 * math.sqrt(args.M))}
    if not result:
        raise UsageError("gronwall needs at least one of --vanishing, --table, --resolvent")
    return _emit(args, result)


def _window(args) -> averaging.WindowSpec:
    a, a_prime, eps, eps_prime = _floats(args.window)
    return averaging.WindowSpec(a, a_prime, eps, eps_prime)


def cmd_rho_tail(args) -> int:
    seed = _need_seed(args)
    window = _window(args)
    drift = parse_drift(args.drift)
    if args.eta:
        eta = _eta_grid(args.eta)
    else:
        eta = np.arange(1, 20) / 20 * math.sqrt(window.eps * window.eps_prime)
    rep = averaging.tail_estimate(drift, window, _floats(args.x), _floats(args.y), args.samples, eta, seed,
                                  grid_n=args.grid_n, workers=args.workers)
    return _emit(args, rep.as_dict())


def cmd_rho_scan(args) -> int:
    sheet = _sheet_from_args(args)
    drift = parse_drift(args.drift)
    if args.mode == "modulus":
        res = averaging.modulus_scan(sheet, drift, args.n, args.m_max)
    else:
        pts = [p for p in averaging.dyadic_points(args.m_max, sheet.dim) if np.any(p != 0)]
        res = averaging.zero_anchor_scan(sheet, drift, args.n, pts, extended_log=args.n >= 5)
    return _emit(args, {"mode": args.mode, **res.as_dict()})


def cmd_exp_moment(args) -> int:
    seed = _need_seed(args)
    drift = parse_drift(args.drift)
    res = averaging.exp_moment_sweep(drift, _floats(args.eps), args.alpha, args.samples, seed, dim=args.dim,
                                     grid_n=args.grid_n, workers=args.workers)
    est = [r.estimate for r in res]
    ratio = max(est) / min(est)
    return _emit(args, {"windows": [r.as_dict() for r in res], "max_over_min": ratio,
                        "verdict": bool(ratio <= args.max_ratio and not any(r.unstable for r in res))})


def cmd_localtime(args) -> int:
    sheet = _sheet_from_args(args)
    x = np.linspace(args.x_min, args.x_max, args.x_count)
    if args.plane:
        est = localtime.plane_local_time(sheet, args.s, args.t, x, args.bandwidth)
        expected = args.s * args.t
    else:
        est = localtime.row_local_time(sheet, sheet.grid.index_of(args.s), args.t, x, args.bandwidth)
        expected = args.t
    if args.out:
        est.to_csv(args.out)
    mass = est.total_mass()
    return _emit(args, {"bandwidth": est.bandwidth, "total_mass": mass, "expected_mass": expected,
                        "verdict": bool(abs(mass - expected) <= 0.02 * expected) if expected > 0 else None})


def cmd_tanaka(args) -> int:
    seed = _need_seed(args)
    sizes = sorted(_ints(args.grid_n_list))
    top = sizes[-1]
    if any(top % n for n in sizes):
        raise UsageError("every grid size must divide the largest one")

    def one(sd):
        sheet = generate_sheet(GridSpec(top, 1), int(sd))
        out = []
        for n in sizes:
            w = coarsen(sheet, top // n)
            out.append(localtime.tanaka_residual(w, w.grid.index_of(args.s), args.t, args.x))
        return out

    res = np.array(ordered_map(one, derive_seeds(seed, args.seeds, stream=4), args.workers))
    rms = np.sqrt(np.mean(res**2, axis=0))
    return _emit(args, {"N": sizes, "seeds": args.seeds, "rms": rms.tolist(),
                        "verdict": bool(np.all(np.diff(rms) < 0))})


def cmd_lts_check(args) -> int:
    seed = _need_seed(args)
    f, df = localtime.coordinate_bump(args.coord)

    def one(sd):
        sheet = generate_sheet(GridSpec(args.grid_n, args.dim), int(sd))
        terms = localtime.lts_formula_terms(sheet, f, df, args.coord, args.s, args.t, args.xi_cut, args.u_cut)
        return terms.residual, terms.lhs

    res = np.array(ordered_map(one, derive_seeds(seed, args.seeds, stream=5), args.workers))
    rms_res = float(np.sqrt(np.mean(res[:, 0] ** 2)))
    rms_lhs = float(np.sqrt(np.mean(res[:, 1] ** 2)))
    ratio = rms_res / rms_lhs if rms_lhs > 0 else math.inf
    return _emit(args, {"N": args.grid_n, "seeds": args.seeds, "rms_residual": rms_res, "rms_lhs": rms_lhs,
                        "ratio": ratio, "verdict": bool(ratio <= args.rel_tol)})


def cmd_girsanov(args) -> int:
    seed = _need_seed(args)
    rep = martingale_check(parse_drift(args.drift), args.samples, _floats(args.t_grid), seed,
                           grid_n=args.grid_n, dim=args.dim, workers=args.workers)
    return _emit(args, rep.as_dict())


def uniqueness_experiment(args) -> dict:
    """Run the uniqueness experiment on ``args.seeds`` sheets and aggregate the reports."""
    seed = _need_seed(args)
    drift = parse_drift(args.drift)
    grid = GridSpec(args.grid_n, args.dim)

    def one(sd):
        sheet = generate_sheet(grid, int(sd))
        return _uniqueness_on_path(sheet, drift, args.n, beta=args.beta, seed=int(sd) ^ 0x5EED,
                                   base_level=args.base_level)

    reports = ordered_map(one, derive_seeds(seed, args.seeds, stream=6), args.workers)
    gaps = [r.fixed_point_gap for r in reports]
    margins = [float(np.min(r.margin)) for r in reports]
    return {
        "n": args.n,
        "beta": args.beta,
        "seeds": args.seeds,
        "max_fixed_point_gap": max(gaps),
        "min_margin_log2": min(margins),
        "per_seed": [r.as_dict() for r in reports],
        "summary": "consistent with uniqueness" if all(r.verdict for r in reports) else "inconsistent on some path",
        "verdict": all(r.verdict for r in reports),
    }


def cmd_uniqueness(args) -> int:
    result = uniqueness_experiment(args)
    for rep in result["per_seed"]:
        rep.pop("verdict")
    return _emit(args, result)


def cmd_report(args) -> int:
    merged = {}
    for path in args.inputs:
        doc = json.loads(Path(path).read_text())
        merged[str(path)] = {"command": doc.get("header", {}).get("command"),
                             "verdicts": _collect_verdicts(doc.get("result", {})),
                             "result": doc.get("result")}
    verdicts = [v for item in merged.values() for v in item["verdicts"]]
    return _emit(args, {"inputs": merged, "verdict": all(v is not False for v in verdicts)})


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sheetlab", description="Brownian-sheet numerical laboratory")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--config", help="key = value file; command-line flags override it")
        p.add_argument("--report", help="write the JSON report here instead of stdout")
        p.add_argument("--workers", type=int, default=None, help="thread-pool size for Monte Carlo loops")
        return p

    def grid_opts(p, n=64, dim=1, sheet=False):
        p.add_argument("--grid-n", type=int, default=n)
        p.add_argument("--dim", type=int, default=dim)
        p.add_argument("--seed", type=int)
        if sheet:
            p.add_argument("--sheet", help="read the sheet from this CSV instead of sampling")

    p = command("simulate", cmd_simulate, "sample a Brownian sheet and write it as CSV")
    grid_opts(p)
    p.add_argument("--out")

    p = command("solve", cmd_solve, "solve the integral equation on a sheet")
    grid_opts(p, sheet=True)
    p.add_argument("--drift", default="tanh:1.0")
    p.add_argument("--scheme", choices=["explicit", "picard", "truncated"], default="explicit")
    p.add_argument("--boundary", type=float, default=0.0, help="constant boundary trace value")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--out")

    p = command("gronwall", cmd_gronwall, "Bessel resolvent and Gronwall bounds")
    p.add_argument("--vanishing", action="store_true")
    p.add_argument("--table", action="store_true")
    p.add_argument("--resolvent", action="store_true")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--n-max", type=int, default=16)
    p.add_argument("--c1", type=float, default=1.0)
    p.add_argument("--beta-log2", type=float, default=0.0)
    p.add_argument("--M", type=float, default=1.0)
    p.add_argument("--resolvent-n", type=int, default=128)
    p.add_argument("--out")

    p = command("rho-tail", cmd_rho_tail, "tail probabilities of the averaging operator on a window")
    p.add_argument("--drift", default="tanh:1.0")
    p.add_argument("--window", default="0.75,0.75,0.25,0.25", help="a,a',eps,eps'")
    p.add_argument("--x", default="0.25")
    p.add_argument("--y", default="-0.25")
    p.add_argument("--samples", type=int, default=20000)
    p.add_argument("--eta", help="start:stop:count or comma list")
    p.add_argument("--grid-n", type=int, default=64)
    p.add_argument("--seed", type=int)

    p = command("rho-scan", cmd_rho_scan, "path-wise modulus constants of the averaging operator")
    grid_opts(p, sheet=True)
    p.add_argument("--drift", default="tanh:1.0")
    p.add_argument("--mode", choices=["modulus", "zero-anchor"], default="modulus")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--m-max", type=int, default=3)

    p = command("exp-moment", cmd_exp_moment, "exponential moment of the averaged gradient over shrinking windows")
    p.add_argument("--drift", default="tanh:1.0")
    p.add_argument("--eps", default="1,0.5,0.25,0.125")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--grid-n", type=int, default=128)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--max-ratio", type=float, default=3.0)
    p.add_argument("--seed", type=int)

    p = command("localtime", cmd_localtime, "row or plane occupation density")
    grid_opts(p, n=1024, sheet=True)
    p.add_argument("--plane", action="store_true")
    p.add_argument("--s", type=float, default=1.0)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--x-min", type=float, default=-4.0)
    p.add_argument("--x-max", type=float, default=4.0)
    p.add_argument("--x-count", type=int, default=801)
    p.add_argument("--bandwidth", type=float)
    p.add_argument("--out")

    p = command("tanaka", cmd_tanaka, "RMS Tanaka residual across grid sizes")
    p.add_argument("--grid-n-list", default="512,1024")
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--s", type=float, default=1.0)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--x", type=float, default=0.0)
    p.add_argument("--seed", type=int)

    p = command("lts-check", cmd_lts_check, "local-time-space identity residual")
    p.add_argument("--grid-n", type=int, default=1024)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--coord", type=int, default=0)
    p.add_argument("--seeds", type=int, default=200)
    p.add_argument("--s", type=float, default=1.0)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--xi-cut", type=float, default=1 / 16)
    p.add_argument("--u-cut", type=float, default=1 / 16)
    p.add_argument("--rel-tol", type=float, default=0.05)
    p.add_argument("--seed", type=int)

    p = command("girsanov", cmd_girsanov, "martingale normalisation of the density")
    p.add_argument("--drift", default="const:0.5")
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--samples", type=int, default=20000)
    p.add_argument("--t-grid", default="0.25,0.5,1")
    p.add_argument("--grid-n", type=int, default=64)
    p.add_argument("--seed", type=int)

    p = command("uniqueness", cmd_uniqueness, "path-by-path uniqueness experiment")
    p.add_argument("--drift", default="sign")
    p.add_argument("--grid-n", type=int, default=256)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--beta", type=float, default=1e-6)
    p.add_argument("--base-level", type=float, default=0.5)
    p.add_argument("--seed", type=int)

    p = command("report", cmd_report, "merge JSON reports and combine their verdicts")
    p.add_argument("inputs", nargs="+")
    return parser


def _read_config(path: str) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    sub = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in _read_config(args.config).items():
        if key not in actions or key in ("config", "help"):
            raise UsageError(f"unknown config key {key!r} for '{args.command}'")
        action = actions[key]
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = value.lower() in ("1", "true", "yes", "on")
        else:
            defaults[key] = value
    sub.set_defaults(**defaults)
    # string defaults are converted by the option's type on the second parse
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else 2
    except (UsageError, ValueError, OSError) as exc:
        print(f"sheetlab: error: {exc}", file=sys.stderr)
        return 2
    except solver.SolverError as exc:
        print(f"sheetlab: solver failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
