"""Command-line front end: ``qfibounds {classify,abcurve,bound,report,builtin}``.

Exit codes: 0 success, 1 model parse error, 2 solver failure, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from importlib import metadata
from typing import Optional

import numpy as np

from . import algebra
from .bound import (
    IntegratorConfig,
    asymptotes,
    integrate_bound,
    log_sample,
    ql_crossover_time,
)
from .model import (
    BUILTIN_IDS,
    ModelFormatError,
    builtin_model,
    dumps_model,
    load_model,
    model_to_dict,
    validate_model,
    write_atomic,
)
from .plot import loglog_svg
from .scaling import (
    EPS_ZERO,
    ScalingClass,
    ScalingError,
    ab_curve,
    classify,
    compute_constants,
    transition_times,
)
from .sdp.solver import SDPError, SolverConfig

EXIT_OK, EXIT_PARSE, EXIT_SOLVER, EXIT_USAGE = 0, 1, 2, 64

CAMEL = {
    ScalingClass.QUADRATIC_LINEAR: "QuadraticLinear",
    ScalingClass.QUADRATIC_QUADRATIC: "QuadraticQuadratic",
    ScalingClass.LINEAR_LINEAR: "LinearLinear",
    ScalingClass.LINEAR_QUADRATIC: "LinearQuadratic",
    ScalingClass.UNINFORMATIVE: "Uninformative",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive(conv):
    def f(s):
        try:
            v = conv(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid value {s!r}") from None
        if not (v > 0 and math.isfinite(v)):
            raise argparse.ArgumentTypeError(f"must be positive, got {s}")
        return v
    return f


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qfibounds", description="QFI upper bounds and scaling classes for Markovian sensing models.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, formats):
        sp.add_argument("model", nargs="?", help="model JSON file")
        sp.add_argument("--builtin", type=str.upper, choices=BUILTIN_IDS, help="use a built-in model instead of a file")
        sp.add_argument("--omega", type=float, default=1.0)
        sp.add_argument("--gamma", type=float, default=0.4)
        sp.add_argument("--out", help="output path (default: stdout)")
        sp.add_argument("--format", choices=formats, default=formats[0])
        sp.add_argument("--eps-zero", type=_positive(float), default=EPS_ZERO)

    common(sub.add_parser("classify", help="scaling class, constants and transition times"), ["text", "json"])
    sp = sub.add_parser("abcurve", help="tabulate the achievable (b, a) curve")
    common(sp, ["csv", "json"])
    sp.add_argument("--points", type=int, default=100)
    sp = sub.add_parser("bound", help="integrate the QFI bound")
    common(sp, ["csv", "json", "svg"])
    sp.add_argument("--tmax", type=float, default=1e4)
    sp.add_argument("--dt", type=_positive(float), help="uniform step (default: per-decade steps)")
    sp.add_argument("--steps-per-decade", type=_positive(int), default=10_000)
    sp.add_argument("--per-decade", type=_positive(int), default=100, help="output samples per decade")
    sp.add_argument("--points", type=int, default=100, help="curve resolution")
    common(sub.add_parser("report", help="full JSON report"), ["json"])
    sp = sub.add_parser("builtin", help="print a built-in model as JSON")
    sp.add_argument("id", type=str.upper, choices=BUILTIN_IDS)
    sp.add_argument("--omega", type=float, default=1.0)
    sp.add_argument("--gamma", type=float, default=0.4)
    sp.add_argument("--out")
    return p


def _load(args):
    if (args.model is None) == (args.builtin is None):
        raise UsageError("give exactly one of a model file or --builtin")
    if args.builtin:
        if args.gamma < 0:
            raise UsageError("--gamma must be non-negative")
        return builtin_model(args.builtin, omega=args.omega, gamma=args.gamma)
    try:
        return load_model(args.model)
    except OSError as exc:
        raise ModelFormatError(f"{args.model}: {exc.strerror}") from None
    except ModelFormatError as exc:
        raise ModelFormatError(f"{args.model}: {exc}") from None


def _emit(text: str, out: Optional[str]):
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _analysis(m, eps_zero, cfg):
    """Constants, class, times and algebraic verdicts; ``solver_ok`` is False on failures."""
    st_ok, st_res = algebra.short_time_condition(m)
    span_ok, span_res = algebra.span_membership(algebra.g_operator(m), algebra.lindblad_span(m))
    info = {
        "short_time_condition": {"holds": st_ok, "residual": st_res},
        "span_membership": {"holds": span_ok, "residual": span_res},
    }
    try:
        c = compute_constants(m, cfg, eps_zero=eps_zero)
    except ScalingError as exc:
        info["error"] = str(exc)
        return info, None, None, None, False
    cls = classify(c)
    tt = transition_times(c, cls)
    info.update(
        {
            "class": cls.value,
            "constants": {k: _num(v) for k, v in c.as_dict().items()},
            "transition_times": {k: (_num(v) if k != "notes" else v) for k, v in tt.as_dict().items()},
        }
    )
    if c.failures:
        info["solver_warnings"] = list(c.failures)
    return info, c, cls, tt, not c.failures


def cmd_classify(args, cfg) -> int:
    m = _load(args)
    info, c, cls, tt, ok = _analysis(m, args.eps_zero, cfg)
    if args.format == "json":
        _emit(_dumps(info), args.out)
    else:
        lines = [f"model: {m.label or args.model}"]
        if cls is not None:
            lines.append(f"class: {cls.value} ({CAMEL[cls]})")
            for k, v in info["constants"].items():
                lines.append(f"{k}: {v!r}")
            for k, v in info["transition_times"].items():
                if k != "notes":
                    lines.append(f"{k}: {v!r}" if v is not None else f"{k}: absent")
            for note in tt.notes:
                lines.append(f"note: {note}")
        for key in ("short_time_condition", "span_membership"):
            lines.append(f"{key}: {info[key]['holds']} (residual {info[key]['residual']:.3e})")
        if "error" in info:
            lines.append(f"error: {info['error']}")
        for w in info.get("solver_warnings", []):
            lines.append(f"warning: {w}")
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK if ok else EXIT_SOLVER


def _curve(m, args, cfg):
    if args.points < 2:
        raise UsageError("--points must be at least 2")
    c = compute_constants(m, cfg, eps_zero=args.eps_zero)
    return c, ab_curve(m, args.points, c, cfg)


def cmd_abcurve(args, cfg) -> int:
    m = _load(args)
    c, curve = _curve(m, args, cfg)
    if args.format == "json":
        text = _dumps({"b": [_num(x) for x in curve.b], "a": [_num(x) for x in curve.a], "status": curve.status})
    else:
        text = curve.to_csv()
    _emit(text, args.out)
    print(f"endpoints: (b={float(curve.b[0])!r}, a={float(curve.a[0])!r}) .. (b={float(curve.b[-1])!r}, a={float(curve.a[-1])!r})", file=sys.stderr)
    failed = c.failures or not np.all(curve.valid)
    return EXIT_SOLVER if failed else EXIT_OK


def cmd_bound(args, cfg) -> int:
    if not (args.tmax > 0 and math.isfinite(args.tmax)):
        raise UsageError("--tmax must be positive")
    if args.dt is not None and args.dt > args.tmax:
        raise UsageError("--dt must not exceed --tmax")
    m = _load(args)
    c, curve = _curve(m, args, cfg)
    icfg = IntegratorConfig(t_max=args.tmax, dt=args.dt, steps_per_decade=args.steps_per_decade)
    trace = integrate_bound(curve, icfg)
    out = log_sample(trace, args.per_decade)
    if args.format == "json":
        text = _dumps({"t": out.t.tolist(), "F": out.F.tolist()})
    elif args.format == "svg":
        cls = classify(c)
        tt = transition_times(c, cls)
        short, long = asymptotes(c, cls)
        tpos = out.t[out.t > 0]
        overlays = []
        if short is not None:
            overlays.append((f"short: {short.coef:.4g} t^{short.power}", tpos, short(tpos)))
            overlays.append((f"long: {long.coef:.4g} t^{long.power}", tpos, long(tpos)))
        marks = [("tau", tt.tau)] if tt.merged else [("tau-", tt.tau_minus), ("tau+", tt.tau_plus)]
        text = loglog_svg(out.t, out.F, title=f"{m.label or 'model'} ({cls.value})", overlays=overlays, vlines=marks)
    else:
        text = out.to_csv()
    _emit(text, args.out)
    return EXIT_SOLVER if c.failures else EXIT_OK


def _version(name):
    try:
        return metadata.version(name)
    except metadata.PackageNotFoundError:
        return None


def cmd_report(args, cfg) -> int:
    m = _load(args)
    rep = validate_model(m)
    doc = {"model": model_to_dict(m), "validation": {"ok": rep.ok, "problems": rep.problems}}
    info, c, cls, tt, ok = _analysis(m, args.eps_zero, cfg)
    doc.update(info)
    if c is not None:
        curve = ab_curve(m, 100, c, cfg)
        doc["curve"] = {
            "points": len(curve),
            "valid_points": int(np.sum(curve.valid)),
            "first": {"b": _num(curve.b[0]), "a": _num(curve.a[0])},
            "last": {"b": _num(curve.b[-1]), "a": _num(curve.a[-1])},
        }
        ok = ok and bool(np.all(curve.valid))
        short, long = asymptotes(c, cls)
        doc["asymptotes"] = None if short is None else {
            "short": {"coef": short.coef, "power": short.power},
            "long": {"coef": long.coef, "power": long.power},
        }
        analytic = {"generic": {"a": _num(c.a_minus), "b": _num(c.b_plus)}}
        if cls is ScalingClass.QUADRATIC_LINEAR:
            analytic["quadratic_linear"] = {
                "a_plus": c.a_plus,
                "b_plus": c.b_plus,
                "t_c": ql_crossover_time(c.a_plus, c.b_plus),
            }
            doc["t_c"] = analytic["quadratic_linear"]["t_c"]
        doc["analytic_bounds"] = analytic
    doc["provenance"] = {
        "solver": {"gap_tol": cfg.gap_tol, "feas_tol": cfg.feas_tol, "max_iter": cfg.max_iter},
        "eps_zero": args.eps_zero,
        "versions": {
            "artifact": _version("artifact"),
            "numpy": np.__version__,
            "scipy": _version("scipy"),
            "python": ".".join(map(str, sys.version_info[:3])),
        },
    }
    _emit(_dumps(doc), args.out)
    return EXIT_OK if ok else EXIT_SOLVER


def cmd_builtin(args, cfg) -> int:
    if args.gamma < 0:
        raise UsageError("--gamma must be non-negative")
    _emit(dumps_model(builtin_model(args.id, omega=args.omega, gamma=args.gamma)), args.out)
    return EXIT_OK


COMMANDS = {
    "classify": cmd_classify,
    "abcurve": cmd_abcurve,
    "bound": cmd_bound,
    "report": cmd_report,
    "builtin": cmd_builtin,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        try:
            cfg = SolverConfig.from_env()
        except ValueError as exc:
            raise UsageError(f"bad solver setting in environment: {exc}") from None
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ModelFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ScalingError, SDPError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
