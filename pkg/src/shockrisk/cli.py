"""Command-line interface: ``shockrisk <command> [options]``.

Exit codes: 0 success, 1 simulation disagreement (|z| > 4) or failed
validation, 2 bad arguments or model spec, 3 series non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

from . import analytic, closed_forms
from .analytic import EvalConfig, Model, Rates
from .schemes import Scheme
from .simulator import SimConfig, run as run_simulation, z_score
from .special import NonConvergenceError
from .thresholds import (
    DIVERGENT,
    Custom,
    Deterministic,
    Geometric,
    Harmonic,
    NegBinomial2,
    ShiftedPoisson,
    ThresholdDistribution,
    ThresholdError,
)

EXIT_OK = 0
EXIT_DISAGREE = 1
EXIT_USAGE = 2
EXIT_NONCONVERGENCE = 3
Z_LIMIT = 4.0
DEFAULT_GRID = (0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0)


class SpecError(ValueError):
    pass


def fmt(x: float) -> str:
    if x == DIVERGENT:
        return "divergent"
    return format(x, ".17g")


# --------------------------------------------------------------- parsing


_FAMILIES = {
    "geometric": (Geometric, "p", float),
    "poisson1": (ShiftedPoisson, "eta", float),
    "negbinom2": (NegBinomial2, "p", float),
    "det": (Deterministic, "k", int),
}


def parse_threshold(text: str) -> ThresholdDistribution:
    """Parse ``family[:param=value]`` into a threshold law."""
    family, _, rest = text.strip().partition(":")
    family = family.strip().lower()
    try:
        if family == "harmonic":
            if rest.strip():
                raise SpecError(f"harmonic takes no parameters, got {rest!r}")
            return Harmonic()
        if family == "pmf":
            return _parse_pmf(rest.strip())
        if family not in _FAMILIES:
            raise SpecError(
                f"unknown threshold family {family!r}; expected one of "
                f"{sorted([*_FAMILIES, 'harmonic', 'pmf'])}"
            )
        cls, key, conv = _FAMILIES[family]
        name, eq, value = rest.partition("=")
        if not eq or name.strip() != key:
            raise SpecError(f"{family} expects '{key}=<value>', got {rest!r}")
        try:
            v = conv(value.strip())
        except ValueError:
            raise SpecError(f"bad value {value.strip()!r} for {family}:{key}") from None
        return cls(v)
    except ThresholdError as exc:
        raise SpecError(str(exc)) from None


def _parse_pmf(body: str) -> Custom:
    if not body:
        raise SpecError("pmf needs a CSV path or inline k=p pairs")
    if "=" not in body:
        try:
            return Custom.from_csv(body)
        except OSError as exc:
            raise SpecError(f"cannot read pmf file {body!r}: {exc.strerror}") from None
    table = {}
    for token in body.split(","):
        k, eq, p = token.partition("=")
        try:
            if not eq:
                raise ValueError
            key = int(k)
            if key in table:
                raise SpecError(f"duplicate k in pmf token {token!r}")
            table[key] = float(p)
        except ValueError:
            raise SpecError(f"bad pmf token {token!r}; expected k=p") from None
    return Custom(table)


def _scheme(text):
    try:
        return Scheme.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be positive and finite: {text!r}")
    return v


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text!r}")
    return v


def _grid(text):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None
    if not values or any(v < 0 for v in values) or values != sorted(values):
        raise argparse.ArgumentTypeError("grid must be nonnegative and ascending")
    return values


def build_model(args) -> Model:
    threshold = parse_threshold(args.threshold)
    cfg = EvalConfig(series_tol=args.tol)
    return Model(Rates(args.lambda1, args.lambda2), args.scheme, threshold, cfg)


# --------------------------------------------------------------- output


def write_table(args, header: list[str], rows: list[list]) -> None:
    if args.format == "json":
        payload = [
            {h: (None if isinstance(v, float) and math.isnan(v) else _json_value(v)) for h, v in zip(header, row)}
            for row in rows
        ]
        _emit(args, json.dumps(payload, indent=2) + "\n")
        return
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, float) else v for v in row])
    _emit(args, buf.getvalue())


def _json_value(v):
    if isinstance(v, float) and v == DIVERGENT:
        return "divergent"
    return v


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _time_grid(tmax: float, steps: int) -> list[float]:
    return [tmax * j / steps for j in range(steps + 1)]


# --------------------------------------------------------------- evaluation


def _evaluate(method: str, closed, series):
    if method == "series":
        return series()
    if method == "closed":
        return closed()
    try:
        return closed()
    except NonConvergenceError:
        return series()


def survival_value(m: Model, t: float, method: str = "auto") -> float:
    return _evaluate(
        method,
        lambda: closed_forms.survival(m.scheme, m.rates, m.threshold, t, m.config.series_tol),
        lambda: analytic.survival(m, t),
    )


def subdensity_value(m: Model, i: int, t: float, method: str = "auto") -> float:
    return _evaluate(
        method,
        lambda: closed_forms.subdensity(m.scheme, m.rates, m.threshold, i, t, m.config.series_tol),
        lambda: analytic.subdensity(m, i, t),
    )


def delta_value(m: Model, i: int, method: str = "auto") -> float:
    if method != "series" and m.scheme is Scheme.SUM:
        return m.rates.rate(i) / m.rates.total
    return analytic.delta_probability(m, i)


def moment_value(m: Model, i: int, s: int, method: str = "auto") -> float:
    if method != "series" and m.scheme is Scheme.SUM:
        return closed_forms.sum_conditional_moment(m.rates, m.threshold, s)
    return analytic.conditional_moment(m, i, s)


# --------------------------------------------------------------- commands


def cmd_survival(args) -> int:
    m = build_model(args)
    rows = [[t, survival_value(m, t, args.method)] for t in _time_grid(args.tmax, args.steps)]
    write_table(args, ["t", "survival"], rows)
    return EXIT_OK


def cmd_subdensity(args) -> int:
    m = build_model(args)
    rows = []
    for t in _time_grid(args.tmax, args.steps):
        f1 = subdensity_value(m, 1, t, args.method)
        f2 = subdensity_value(m, 2, t, args.method)
        rows.append([t, f1, f2, f1 + f2])
    write_table(args, ["t", "f1", "f2", "f_total"], rows)
    return EXIT_OK


def cmd_delta(args) -> int:
    m = build_model(args)
    d1, d2 = delta_value(m, 1, args.method), delta_value(m, 2, args.method)
    write_table(args, ["quantity", "value"], [["delta1", d1], ["delta2", d2], ["sum", d1 + d2]])
    return EXIT_OK


def cmd_moments(args) -> int:
    m = build_model(args)
    rows = [[s, moment_value(m, 1, s, args.method), moment_value(m, 2, s, args.method)]
            for s in range(1, args.smax + 1)]
    write_table(args, ["s", "cause1", "cause2"], rows)
    return EXIT_OK


def simulation_report(m: Model, cfg: SimConfig, grid) -> dict:
    summ = run_simulation(m, cfg, grid)
    n = summ.samples
    report = {
        "scheme": m.scheme.value,
        "lambda1": m.rates.lambda1,
        "lambda2": m.rates.lambda2,
        "threshold": repr(m.threshold),
        "samples": n,
        "seed": cfg.seed,
        "workers": cfg.workers,
        "censored_count": summ.censored_count,
        "inconsistent_count": summ.inconsistent_count,
        "rows": [],
    }
    rows = report["rows"]

    def add(quantity, empirical, se, exact, binomial=False):
        z = None
        if exact is not None and math.isfinite(exact) and not math.isnan(empirical):
            z = z_score(empirical, exact, se, n if binomial else None)
        rows.append({
            "quantity": quantity,
            "empirical": _nan_none(empirical),
            "se": _nan_none(se),
            "analytic": None if exact is None else _json_value(exact),
            "z": z if z is None or math.isfinite(z) else "inf",
        })

    for t, s, se in zip(summ.grid, summ.survival, summ.survival_se):
        add(f"survival({t:g})", s, se, survival_value(m, t), binomial=True)
    deltas = []
    for i in (1, 2):
        deltas.append(analytic.delta_probability(m, i))
        add(f"delta{i}", summ.delta_hat[i - 1], summ.delta_se[i - 1], deltas[-1], binomial=True)
    moments = []
    for i in (1, 2):
        moments.append(analytic.conditional_moment(m, i, 1))
        add(f"E(T|delta={i})", summ.cond_mean[i - 1], summ.cond_mean_se[i - 1], moments[-1])
    total_mean = sum(d * mu for d, mu in zip(deltas, moments))
    add("E(T)", summ.mean_time, summ.mean_time_se, total_mean)
    zs = [r["z"] for r in rows if r["z"] is not None]
    worst = max((math.inf if z == "inf" else z for z in zs), default=0.0)
    report["max_abs_z"] = worst if math.isfinite(worst) else "inf"
    report["agrees"] = worst <= Z_LIMIT and summ.inconsistent_count == 0
    return report


def _nan_none(x):
    return None if isinstance(x, float) and math.isnan(x) else x


def cmd_simulate(args) -> int:
    m = build_model(args)
    cfg = SimConfig(samples=args.samples, seed=args.seed, max_events=args.max_events,
                    workers=args.workers)
    report = simulation_report(m, cfg, args.grid)
    _emit(args, json.dumps(report, indent=2) + "\n")
    return EXIT_OK if report["agrees"] else EXIT_DISAGREE


def cmd_validate(args) -> int:
    from . import validation

    rep = validation.report(validation.run_all())
    text = json.dumps(rep, indent=2, default=str) + "\n"
    _emit(args, text)
    for suite in rep["suites"]:
        mark = "PASS" if suite["passed"] else "FAIL"
        print(f"{mark} {suite['name']} worst={suite['worst']:.3g} bound={suite['bound']:.3g}",
              file=sys.stderr)
    return EXIT_OK if rep["passed"] else EXIT_DISAGREE


def cmd_clt(args) -> int:
    d = parse_threshold(args.threshold)
    approx = closed_forms.clt_survival(args.h, args.lam, d, args.t0, args.tol)
    exact = closed_forms.superposed_survival(args.h, args.lam, d, args.t0, args.tol)
    write_table(args, ["h", "lambda", "t0", "approx", "exact", "abs_error"],
                [[args.h, args.lam, args.t0, approx, exact, abs(approx - exact)]])
    return EXIT_OK


# --------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=_positive_float, default=1e-12,
                        help="relative series truncation tolerance")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--scheme", type=_scheme, required=True, help="sum, min or max")
    model.add_argument("--lambda1", type=_positive_float, required=True)
    model.add_argument("--lambda2", type=_positive_float, required=True)
    model.add_argument("--threshold", required=True,
                       help="geometric:p=0.5 | poisson1:eta=2 | harmonic | negbinom2:p=0.4 | "
                            "det:k=3 | pmf:FILE.csv | pmf:1=0.5,2=0.5")
    model.add_argument("--method", choices=("series", "closed", "auto"), default="auto")

    curve = argparse.ArgumentParser(add_help=False)
    curve.add_argument("--tmax", type=_positive_float, required=True)
    curve.add_argument("--steps", type=_positive_int, default=100)

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--samples", type=_positive_int, default=100_000)
    sim.add_argument("--workers", type=_positive_int, default=1)

    p = argparse.ArgumentParser(prog="shockrisk", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("survival", parents=[common, model, curve], help="survival curve")
    s.set_defaults(func=cmd_survival)
    s = sub.add_parser("subdensity", parents=[common, model, curve], help="cause sub-densities")
    s.set_defaults(func=cmd_subdensity)
    s = sub.add_parser("delta", parents=[common, model], help="cause probabilities")
    s.set_defaults(func=cmd_delta)
    s = sub.add_parser("moments", parents=[common, model], help="conditional moments")
    s.add_argument("--smax", type=_positive_int, default=2)
    s.set_defaults(func=cmd_moments)
    s = sub.add_parser("simulate", parents=[common, model, sim], help="Monte Carlo comparison")
    s.add_argument("--grid", type=_grid, default=list(DEFAULT_GRID),
                   help="comma-separated ascending times")
    s.add_argument("--max-events", type=_positive_int, default=10**6)
    s.set_defaults(func=cmd_simulate)
    s = sub.add_parser("validate", parents=[common], help="run every invariant suite")
    s.set_defaults(func=cmd_validate)
    s = sub.add_parser("clt", parents=[common], help="normal approximation vs exact")
    s.add_argument("--h", type=_positive_int, required=True, help="number of shock types")
    s.add_argument("--lambda", dest="lam", type=_positive_float, required=True,
                   help="per-type rate")
    s.add_argument("--threshold", required=True)
    s.add_argument("--t0", type=_positive_float, required=True)
    s.set_defaults(func=cmd_clt)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed", 0) is not None and not 0 <= getattr(args, "seed", 0) < 2**64:
        parser.error(f"seed must be a 64-bit unsigned integer, got {args.seed}")
    if args.command == "clt" and args.h < 2:
        parser.error("--h must be >= 2")
    try:
        return args.func(args)
    except SpecError as exc:
        print(f"shockrisk: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NonConvergenceError as exc:
        print(f"shockrisk: did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
