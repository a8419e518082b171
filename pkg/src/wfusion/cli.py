"""Command-line entry point: ``wfusion {fuse2,fuse3,validate,pipeline,feasibility}``.

Exit codes: 0 success, 2 bad arguments or failed precondition, 3 numerical
failure (integrator norm drift).
"""

import argparse
import csv
import io
import json
import math
import re
import sys
from pathlib import Path
from typing import Any

from . import __version__
from .cavity import CavityParams, dispersive_error, magic_time
from .linalg import NumericalError
from .pipeline import StrategyConfig, exact_costs, feasibility_report, simulate_pipeline
from .protocols import fuse_three, fuse_two

EXIT_USAGE = 2
EXIT_NUMERICAL = 3
SIG_DIGITS = 15

_PI_RE = re.compile(r"^\s*([0-9]*\.?[0-9]*)\s*\*?\s*(pi|π)\s*(?:/\s*([0-9]*\.?[0-9]+))?\s*$", re.IGNORECASE)


class UsageError(ValueError):
    pass


def parse_lambda_t(text: str) -> float:
    """Accept decimals and multiples of pi such as ``2pi/9``."""
    m = _PI_RE.match(text)
    if m:
        coef = float(m.group(1)) if m.group(1) else 1.0
        den = float(m.group(3)) if m.group(3) else 1.0
        if den == 0:
            raise argparse.ArgumentTypeError("division by zero")
        return coef * math.pi / den
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number or multiple of pi: {text!r}") from None
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError("lambda-t must be finite")
    return value


def _float_list(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_range(text: str) -> list:
    """``5``, ``3,4,7`` or ``3-8``."""
    out = []
    try:
        for part in text.split(","):
            if "-" in part.strip()[1:]:
                lo, hi = part.split("-", 1)
                out.extend(range(int(lo), int(hi) + 1))
            elif part.strip():
                out.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers or a range, got {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("no values given")
    return out


def fmt_number(x: float) -> str:
    return format(x, f".{SIG_DIGITS}g")


def _rounded(obj: Any) -> Any:
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, float):
        return float(fmt_number(obj)) if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rounded(v) for v in obj]
    return obj


def envelope(command: str, parameters: dict, results: Any, seed=None) -> dict:
    env = {"command": command, "parameters": parameters, "results": results, "tool_version": __version__}
    if seed is not None:
        env["seed"] = seed
    return _rounded(env)


def to_csv(rows: list, columns: list) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if v is None else fmt_number(v) if isinstance(v, float) else v)
                         for k, v in row.items()})
    return buf.getvalue()


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _dump(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=False) + "\n"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_fuse(args) -> int:
    sizes = (args.n, args.m) if args.command == "fuse2" else (args.n, args.m, args.t)
    if any(s < 2 for s in sizes):
        raise UsageError(f"input sizes must be >= 2, got {sizes}")
    report = fuse_two(*sizes, lambda_t=args.lambda_t) if len(sizes) == 2 else fuse_three(*sizes, lambda_t=args.lambda_t)
    params = {"sizes": list(sizes), "lambda_t": args.lambda_t}
    if args.format == "csv":
        _emit(to_csv(report.csv_rows(), list(report.CSV_COLUMNS)), args.out)
    else:
        _emit(_dump(envelope(args.command, params, report.to_dict())), args.out)
    return 0


VALIDATE_COLUMNS = ["delta_over_g", "atomic_fidelity", "photon_leakage",
                    "mean_atomic_fidelity", "mean_photon_leakage", "interaction_time_s", "steps"]


def cmd_validate(args) -> int:
    if not args.g_khz > 0:
        raise UsageError("g must be positive")
    bad = [r for r in args.delta_over_g if not r >= 1]
    if bad or not args.delta_over_g:
        raise UsageError(f"every delta/g must be >= 1, got {args.delta_over_g}")
    if args.dt_divisor < 4:
        raise UsageError("dt-divisor must be >= 4")
    g = 2 * math.pi * args.g_khz * 1e3
    rows = []
    for ratio in args.delta_over_g:
        res = dispersive_error(CavityParams(g=g, delta=ratio * g, n_max=args.nmax),
                               args.lambda_t, steps_per_period=args.dt_divisor)
        rows.append({
            "delta_over_g": ratio,
            "atomic_fidelity": res.atomic_fidelity,
            "photon_leakage": res.photon_leakage,
            "mean_atomic_fidelity": res.mean_atomic_fidelity,
            "mean_photon_leakage": res.mean_photon_leakage,
            "interaction_time_s": res.interaction_time,
            "steps": res.steps,
        })
    params = {"delta_over_g": args.delta_over_g, "g_khz": args.g_khz, "nmax": args.nmax,
              "dt_divisor": args.dt_divisor, "lambda_t": args.lambda_t}
    if args.format == "csv":
        _emit(to_csv(rows, VALIDATE_COLUMNS), args.out)
    else:
        _emit(_dump(envelope("validate", params, rows)), args.out)
    return 0


PIPELINE_COLUMNS = ["target", "strategy", "expected_cost", "mc_mean", "mc_stderr", "trials", "seed"]


def cmd_pipeline(args) -> int:
    if args.trials < 1:
        raise UsageError("trials must be >= 1")
    rows, results = [], []
    for target in args.target:
        strategy = StrategyConfig(target_size=target, primitive=args.primitive, recycle=args.recycle,
                                  max_rounds=args.max_rounds, lambda_t=args.lambda_t)
        exact = exact_costs(strategy)
        entry = {"target": target, "exact": exact}
        row = {"target": target,
               "strategy": f"{args.primitive}{'+recycle' if args.recycle else ''}",
               "expected_cost": exact["expected_bell_pairs"],
               "mc_mean": None, "mc_stderr": None, "trials": None, "seed": None}
        if not args.exact:
            stats = simulate_pipeline(strategy, args.trials, args.seed, workers=args.workers)
            entry["monte_carlo"] = stats.to_dict()
            row.update(mc_mean=stats.expected_bell_pairs, mc_stderr=stats.stderr,
                       trials=args.trials, seed=args.seed)
        results.append(entry)
        rows.append(row)
    params = {"target": args.target, "primitive": args.primitive, "recycle": args.recycle,
              "max_rounds": args.max_rounds, "trials": args.trials, "exact": args.exact,
              "workers": args.workers, "lambda_t": args.lambda_t}
    if args.format == "csv":
        _emit(to_csv(rows, PIPELINE_COLUMNS), args.out)
    else:
        _emit(_dump(envelope("pipeline", params, results, seed=None if args.exact else args.seed)), args.out)
    return 0


FEASIBILITY_COLUMNS = ["g", "delta", "lam", "lambda_t", "interaction_time", "atomic_decay_time",
                       "cavity_decay_time", "time_margin_atomic", "time_margin_cavity",
                       "reference_operation_time"]


def cmd_feasibility(args) -> int:
    for name in ("g_khz", "delta_over_g", "atomic_decay_s", "cavity_decay_s"):
        if not getattr(args, name) > 0:
            raise UsageError(f"--{name.replace('_', '-')} must be positive")
    g = 2 * math.pi * args.g_khz * 1e3
    rep = feasibility_report(g, args.delta_over_g * g, args.atomic_decay_s, args.cavity_decay_s)
    params = {"g_khz": args.g_khz, "delta_over_g": args.delta_over_g,
              "atomic_decay_s": args.atomic_decay_s, "cavity_decay_s": args.cavity_decay_s}
    if args.format == "csv":
        _emit(to_csv([rep.to_dict()], FEASIBILITY_COLUMNS), args.out)
    else:
        _emit(_dump(envelope("feasibility", params, rep.to_dict())), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wfusion", description="Cavity-QED W-state fusion analyses.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, default_format="json"):
        p.add_argument("--format", choices=["json", "csv"], default=default_format)
        p.add_argument("--out", type=Path, default=None, help="write to a file instead of stdout")

    magic = magic_time()
    for name, arity in (("fuse2", 2), ("fuse3", 3)):
        p = sub.add_parser(name, help=f"branch table for the {arity}-input fusion")
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--m", type=int, required=True)
        if arity == 3:
            p.add_argument("--t", type=int, required=True)
        p.add_argument("--lambda-t", type=parse_lambda_t, default=magic, help="default 2pi/9")
        common(p)
        p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("validate", help="exact cavity dynamics vs. effective propagator")
    p.add_argument("--delta-over-g", type=_float_list, default=[5.0, 10.0, 20.0])
    p.add_argument("--g-khz", type=float, default=24.0, help="g / (2 pi) in kHz")
    p.add_argument("--nmax", type=int, default=3)
    p.add_argument("--dt-divisor", type=int, default=64, help="RK4 steps per detuning period")
    p.add_argument("--lambda-t", type=parse_lambda_t, default=magic)
    common(p, default_format="csv")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("pipeline", help="resource cost of iterated fusion")
    p.add_argument("--target", type=_int_range, required=True, help="size, list or range like 3-8")
    p.add_argument("--primitive", choices=["two", "three"], default="two")
    p.add_argument("--recycle", action="store_true")
    p.add_argument("--max-rounds", type=int, default=None)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--exact", action="store_true", help="only the exact Markov-chain value")
    p.add_argument("--lambda-t", type=parse_lambda_t, default=magic)
    common(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("feasibility", help="interaction time vs. decay times")
    p.add_argument("--g-khz", type=float, default=24.0, help="g / (2 pi) in kHz")
    p.add_argument("--delta-over-g", type=float, default=10.0)
    p.add_argument("--atomic-decay-s", type=float, default=3e-2)
    p.add_argument("--cavity-decay-s", type=float, default=3e-2)
    common(p)
    p.set_defaults(func=cmd_feasibility)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"wfusion: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"wfusion: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
