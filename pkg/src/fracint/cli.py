"""Command-line front end.

Subcommands ``integrate``, ``kernel``, ``convergence``, ``bench`` and
``oracle`` write RFC-4180 CSV (header row, ``.`` decimal, 17 significant
digits) to ``--out`` or stdout. Exit status is 0 on success, 2 for invalid
configuration and 3 for numerical or assertion failures.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from fracint.core import FractionalOrder, TimeGrid, make_order
from fracint.errors import AccuracyError, DomainError, PreconditionError
from fracint.expsum import TruncationBudget, certify, kernel_for_budget, write_kernel
from fracint.fastconv import OpCounter, StreamingConvolution, direct_convolution, fast_convolution
from fracint.glquad import (
    backward_euler_coefficients,
    default_lambda_star,
    exact_node_solution_const,
    gl_integrate,
    trapezoidal_coefficients,
)
from fracint.oracle import MonomialSpec, rl_monomial, rl_numeric

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class ConfigError(Exception):
    pass


class NumericFailure(Exception):
    pass


def _num(x: float) -> str:
    return f"{float(x):.17g}"


# {{{ built-in functions


@dataclass(frozen=True)
class BuiltinFunction:
    name: str
    func: Callable
    #: monomial exponent when the closed form applies
    power: float | None = None

    def reference(self, order: FractionalOrder, a: float, t: float) -> float:
        if self.power is not None:
            return rl_monomial(order, MonomialSpec(self.power, a), t)
        if t == a:
            return 0.0
        return rl_numeric(order, self.func, a, t)


def parse_function(spec: str, a: float) -> BuiltinFunction:
    """``const``, ``linear``, ``monomial:p``, ``cos`` or ``exp``; monomials are in ``t - a``."""
    if spec == "const":
        return BuiltinFunction(spec, lambda t: np.ones_like(np.asarray(t, dtype=float)), 0.0)
    if spec == "linear":
        return BuiltinFunction(spec, MonomialSpec(1.0, a), 1.0)
    if spec.startswith("monomial:"):
        try:
            p = float(spec.partition(":")[2])
        except ValueError:
            raise ConfigError(f"f: cannot parse monomial exponent in {spec!r}") from None
        if not p >= 0:
            raise ConfigError(f"f: monomial exponent must be >= 0, got {p}")
        return BuiltinFunction(spec, MonomialSpec(p, a), p)
    if spec == "cos":
        return BuiltinFunction(spec, np.cos)
    if spec == "exp":
        return BuiltinFunction(spec, np.exp)
    raise ConfigError(f"f: unknown function {spec!r} (const|linear|monomial:p|cos|exp)")


# }}}


# {{{ argument handling


def _order(args) -> FractionalOrder:
    try:
        return make_order(args.alpha)
    except DomainError as exc:
        raise ConfigError(f"alpha: {exc}") from None


def _grid(args) -> TimeGrid:
    if not args.a < args.b:
        raise ConfigError(f"a/b: need a < b, got a={args.a}, b={args.b}")
    if args.grid_file:
        try:
            with open(args.grid_file, encoding="utf-8") as fp:
                rows = [r for r in csv.reader(fp) if r and not r[0].startswith("#")]
            values = []
            for r in rows:
                try:
                    values.append(float(r[0]))
                except ValueError:
                    continue  # header
            return TimeGrid(np.array(values))
        except (OSError, DomainError) as exc:
            raise ConfigError(f"grid-file: {exc}") from None
    if args.steps < 1:
        raise ConfigError(f"steps: must be >= 1, got {args.steps}")
    return TimeGrid.uniform(args.a, args.b, args.steps)


def _stepper(name: str) -> str:
    return name.replace("-", "_")


@contextmanager
def _output(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fp:
            yield fp


def _writer(fp):
    return csv.writer(fp, lineterminator="\n")


def _common(p: argparse.ArgumentParser, grid: bool = True) -> None:
    p.add_argument("--alpha", type=float, required=True, help="order in (0, 1)")
    p.add_argument("--a", type=float, default=0.0, help="lower terminal")
    p.add_argument("--b", type=float, default=1.0, help="final time")
    if grid:
        p.add_argument("--steps", type=int, default=1000, help="uniform steps P")
        p.add_argument("--grid-file", default=None, help="explicit grid, one time per line")
    p.add_argument("--f", default="const", help="const|linear|monomial:p|cos|exp")
    p.add_argument("--out", default=None, help="output CSV path (default stdout)")


# }}}


# {{{ commands


def cmd_integrate(args) -> int:
    order = _order(args)
    grid = _grid(args)
    fn = parse_function(args.f, grid.a)
    t = grid.points[1:]

    if args.method == "oracle":
        values = np.array([fn.reference(order, grid.a, ti) for ti in t])
    elif args.method == "direct":
        values = direct_convolution(order, grid, fn.func)
    elif args.method == "expsum":
        delta = float(grid.steps.min()) if args.delta is None else args.delta
        horizon = grid.b - grid.a
        try:
            budget = TruncationBudget(args.epsilon, delta, horizon=horizon)
        except DomainError as exc:
            raise ConfigError(f"epsilon/delta: {exc}") from None
        kernel = kernel_for_budget(order, budget)
        try:
            values = fast_convolution(kernel, order, grid, fn.func)
        except PreconditionError as exc:
            raise ConfigError(f"delta: {exc}") from None
    else:
        if args.Lambda < 1:
            raise ConfigError(f"Lambda: must be >= 1, got {args.Lambda}")
        lambda_star = args.lambda_star
        if args.truncate_j1 and lambda_star is None:
            lambda_star = default_lambda_star(args.Lambda)
        if lambda_star is not None and not 1 <= lambda_star <= args.Lambda:
            raise ConfigError(f"lambda-star: must lie in [1, {args.Lambda}]")
        values = gl_integrate(
            order, fn.func, grid, args.Lambda, _stepper(args.stepper), lambda_star
        )

    if not np.all(np.isfinite(values)):
        raise NumericFailure("non-finite values in the result")

    ref = np.array([fn.reference(order, grid.a, ti) for ti in t])
    with _output(args.out) as fp:
        w = _writer(fp)
        w.writerow(["t", "value", "reference", "abs_error"])
        for ti, vi, ri in zip(t, values, ref):
            w.writerow([_num(ti), _num(vi), _num(ri), _num(abs(vi - ri))])
    return EXIT_OK


def cmd_kernel(args) -> int:
    order = _order(args)
    try:
        budget = TruncationBudget(
            args.epsilon,
            args.delta,
            horizon=args.horizon,
            C1=args.C1,
            C2=args.C2,
            beta_exp=args.beta_exp,
            theta=args.theta,
        )
    except DomainError as exc:
        raise ConfigError(f"budget: {exc}") from None

    kernel = kernel_for_budget(order, budget)
    report = certify(kernel, args.n_check)

    if args.out:
        write_kernel(kernel, args.out)
    if args.table:
        with _output(args.table) as fp:
            w = _writer(fp)
            w.writerow(["t", "approx", "exact", "rel_error"])
            for row in zip(report.t, report.approx, report.exact, report.rel_error):
                w.writerow([_num(x) for x in row])

    print(
        f"Lambda={kernel.n_terms} h={_num(kernel.h)} M={kernel.M} N={kernel.N} "
        f"max_rel_error={_num(report.max_rel_error)} at t={_num(report.argmax)}"
    )
    if not report.max_rel_error <= 100.0 * args.epsilon:
        raise NumericFailure(
            f"certified error {report.max_rel_error:.3e} exceeds 100*epsilon; "
            "check the bound constants"
        )
    return EXIT_OK


def fitted_order(params: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of ``log(error)`` against ``log(param)``."""
    x = np.log(np.asarray(params, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def _node_error(order: FractionalOrder, stepper: str, r: float, h: float, t_end: float) -> float:
    n_steps = round(t_end / h)
    if not math.isclose(n_steps * h, t_end, rel_tol=1e-12):
        raise ConfigError(f"h: {h} does not divide the interval length {t_end}")
    if stepper == "backward_euler":
        a, b = backward_euler_coefficients(order, r, h)
        forcing = 1.0
    else:
        a, b = trapezoidal_coefficients(order, r, h)
        forcing = 2.0
    phi = 0.0
    for _ in range(n_steps):
        phi = a * phi + b * forcing
    return abs(phi - exact_node_solution_const(order, r, t_end))


def cmd_convergence(args) -> int:
    order = _order(args)
    fn = parse_function(args.f, args.a)
    if not args.a < args.b:
        raise ConfigError(f"a/b: need a < b, got a={args.a}, b={args.b}")
    stepper = _stepper(args.stepper)
    length = args.b - args.a

    rows = []
    if args.sweep == "h":
        params = args.h_values or [1e-2 / 2**k for k in range(5)]
        for h in params:
            if args.target == "node":
                if fn.power != 0.0:
                    raise ConfigError("f: the node target needs f=const")
                err = _node_error(order, stepper, args.r, h, length)
            else:
                grid = TimeGrid.uniform(args.a, args.b, round(length / h))
                val = gl_integrate(order, fn.func, grid, args.Lambda, stepper)[-1]
                err = abs(val - fn.reference(order, args.a, args.b))
            rows.append((h, err))
    else:
        params = args.Lambda_values or [10, 20, 40, 80]
        grid = TimeGrid.uniform(args.a, args.b, round(length / args.h))
        ref = fn.reference(order, args.a, args.b)
        for n in params:
            if n < 1:
                raise ConfigError(f"Lambda-values: must be >= 1, got {n}")
            val = gl_integrate(order, fn.func, grid, n, stepper)[-1]
            rows.append((n, abs(val - ref)))

    errors = [e for _, e in rows]
    if not all(math.isfinite(e) for e in errors):
        raise NumericFailure("a run produced a non-finite error")

    with _output(args.out) as fp:
        w = _writer(fp)
        w.writerow([args.sweep, "error", "order"])
        prev = None
        for p, e in rows:
            rate = ""
            if prev is not None and e > 0 and prev[1] > 0:
                rate = _num(math.log(prev[1] / e) / abs(math.log(p / prev[0])))
            w.writerow([_num(p) if args.sweep == "h" else str(p), _num(e), rate])
            prev = (p, e)

    if args.sweep == "h" and all(e > 0 for e in errors):
        print(f"fitted order: {fitted_order(params, errors):.4f}", file=sys.stderr)
    return EXIT_OK


def bench_counts(order: FractionalOrder, P_values: Sequence[int], epsilon: float, length: float = 1.0):
    """Operation counters and live-state sizes of the fast and direct paths."""
    delta = length / max(P_values)
    kernel = kernel_for_budget(order, TruncationBudget(epsilon, delta, horizon=length))
    rows = []
    for P in P_values:
        grid = TimeGrid.uniform(0.0, length, P)
        F = np.cos(grid.points)
        fast = OpCounter()
        stream = StreamingConvolution(kernel, order, grid.a, counter=fast)
        for ti, Fi in zip(grid.points[1:], F[1:]):
            stream.push(ti, Fi)
        direct = OpCounter()
        direct_convolution(order, grid, F, counter=direct)
        rows.append((P, fast.count, direct.count, stream.live_state_size, P + 1))
    return kernel, rows


def _doubling_ratio(c1: float, c2: float, p1: float, p2: float) -> float:
    """Counter ratio normalized to a doubling of P."""
    return (c2 / c1) ** (math.log(2.0) / math.log(p2 / p1))


def cmd_bench(args) -> int:
    order = _order(args)
    P_values = sorted(args.P)
    if len(P_values) < 2 or P_values[0] < 1:
        raise ConfigError("P: need at least two positive values")

    _, rows = bench_counts(order, P_values, args.epsilon)
    failures = []
    with _output(args.out) as fp:
        w = _writer(fp)
        w.writerow(
            ["P", "fast_ops", "direct_ops", "fast_state", "direct_state", "fast_ratio", "direct_ratio"]
        )
        prev = None
        for row in rows:
            P, fo, do, fs, ds = row
            fr = dr = ""
            if prev is not None:
                fr_v = _doubling_ratio(prev[1], fo, prev[0], P)
                dr_v = _doubling_ratio(prev[2], do, prev[0], P)
                fr, dr = _num(fr_v), _num(dr_v)
                if not 1.9 <= fr_v <= 2.1:
                    failures.append(f"fast ratio {fr_v:.4f} at P={P} outside [1.9, 2.1]")
                if not 3.8 <= dr_v <= 4.2:
                    failures.append(f"direct ratio {dr_v:.4f} at P={P} outside [3.8, 4.2]")
                if fs != prev[3]:
                    failures.append(f"fast live state changed with P ({prev[3]} -> {fs})")
            w.writerow([P, fo, do, fs, ds, fr, dr])
            prev = row
    if failures:
        raise NumericFailure("; ".join(failures))
    return EXIT_OK


def cmd_oracle(args) -> int:
    order = _order(args)
    grid = _grid(args)
    fn = parse_function(args.f, grid.a)
    with _output(args.out) as fp:
        w = _writer(fp)
        w.writerow(["t", "value"])
        for ti in grid.points[1:]:
            if fn.power is not None:
                v = fn.reference(order, grid.a, ti)
            else:
                v = rl_numeric(order, fn.func, grid.a, ti, args.tol)
            w.writerow([_num(ti), _num(v)])
    return EXIT_OK


# }}}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracint",
        description="Riemann-Liouville fractional integrals via diffusive representations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("integrate", help="evaluate I^alpha f on a grid")
    _common(p)
    p.add_argument(
        "--method",
        choices=["expsum", "gauss-laguerre", "direct", "oracle"],
        default="gauss-laguerre",
    )
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--delta", type=float, default=None, help="default: smallest step")
    p.add_argument("--Lambda", type=int, default=60, help="Gauss-Laguerre nodes")
    p.add_argument("--stepper", choices=["backward-euler", "trapezoidal"], default="trapezoidal")
    p.add_argument("--truncate-j1", action="store_true", help="use ceil(Lambda/2) nodes for r < 0")
    p.add_argument("--lambda-star", type=int, default=None)
    p.set_defaults(handler=cmd_integrate)

    p = sub.add_parser("kernel", help="build and certify an exponential-sum kernel")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--C1", type=float, default=1.0)
    p.add_argument("--C2", type=float, default=1.0)
    p.add_argument("--beta-exp", type=float, default=0.0)
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--n-check", type=int, default=200)
    p.add_argument("--out", default=None, help="kernel file")
    p.add_argument("--table", default=None, help="certification table CSV")
    p.set_defaults(handler=cmd_kernel)

    p = sub.add_parser("convergence", help="error against step size or node count")
    _common(p, grid=False)
    p.add_argument("--sweep", choices=["h", "Lambda"], default="h")
    p.add_argument("--stepper", choices=["backward-euler", "trapezoidal"], default="trapezoidal")
    p.add_argument("--target", choices=["node", "integral"], default="node")
    p.add_argument("--r", type=float, default=0.0, help="diffusive variable for --target node")
    p.add_argument("--h-values", type=float, nargs="+", default=None)
    p.add_argument("--Lambda-values", type=int, nargs="+", default=None)
    p.add_argument("--Lambda", type=int, default=60)
    p.add_argument("--h", type=float, default=1e-3)
    p.set_defaults(handler=cmd_convergence)

    p = sub.add_parser("bench", help="operation counts of fast vs direct convolution")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--P", type=int, nargs="+", default=[200, 400, 800])
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_bench)

    p = sub.add_parser("oracle", help="reference values of I^alpha f")
    _common(p)
    p.add_argument("--tol", type=float, default=1e-12)
    p.set_defaults(handler=cmd_oracle)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"fracint: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, PreconditionError) as exc:
        print(f"fracint: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericFailure, AccuracyError, FloatingPointError) as exc:
        print(f"fracint: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
