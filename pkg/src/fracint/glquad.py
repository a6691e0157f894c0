r"""Gauss-Laguerre evaluation of the diffusive representation.

For :math:`0 < \alpha < 1` the integral is

.. math::

    I_a^\alpha f(t) = \int_{-\infty}^{\infty} \phi(t, r) \,\mathrm{d}r,

where, for each fixed :math:`r`, :math:`\phi(\cdot, r)` solves

.. math::

    \partial_t \phi = -\psi(r) \phi + c_\alpha (1 + e^{-r}) \psi(r)^{1-\alpha} f(t),
    \qquad \phi(a, r) = 0.

Splitting at :math:`r = 0` and substituting :math:`r = -s/(1-\alpha)` on the
negative half and :math:`r = s/\alpha` on the positive half turns both pieces
into integrals against :math:`e^{-s}` on :math:`[0, \infty)`, which a
:math:`\Lambda`-point Gauss-Laguerre rule approximates. Each quadrature node
then carries one scalar ODE, stepped with backward Euler or the trapezoidal
rule (both A-stable).

Decay rates :math:`\psi(r)` at the nodes range from far below machine epsilon
to far above the overflow threshold, so all step coefficients are formed in
log space.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, TextIO

import numpy as np
from scipy.linalg import eigh_tridiagonal

from fracint.core import (
    FractionalOrder,
    SampledFunction,
    TimeGrid,
    log1p_exp_neg,
    psi,
    psi_exponent,
)
from fracint.errors import DomainError

Stepper = Literal["backward_euler", "trapezoidal"]
STEPPERS = ("backward_euler", "trapezoidal")


# {{{ Gauss-Laguerre rule


def laguerre_eval(n: int, x):
    """Return ``(L_n(x), L_{n-1}(x))`` by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    p_prev = np.zeros_like(x)
    p = np.ones_like(x)
    for k in range(n):
        p_prev, p = p, ((2 * k + 1 - x) * p - k * p_prev) / (k + 1)
    return p, p_prev


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights of the rule for :math:`\\int_0^\\infty e^{-x} g(x) dx`."""

    nodes: np.ndarray
    weights: np.ndarray
    #: ``log(weights)``; stays finite when the smallest weights underflow
    log_weights: np.ndarray
    #: number of leading nodes used for the negative half-line, if truncated
    lambda_star: int | None = None

    def __post_init__(self) -> None:
        n = self.nodes.size
        if self.lambda_star is not None and not 1 <= self.lambda_star <= n:
            raise DomainError(f"lambda_star must lie in [1, {n}], got {self.lambda_star}")
        for arr in (self.nodes, self.weights, self.log_weights):
            arr.setflags(write=False)

    @property
    def size(self) -> int:
        return self.nodes.size

    def __len__(self) -> int:
        return self.nodes.size

    def truncated(self, lambda_star: int | None) -> QuadratureRule:
        return QuadratureRule(self.nodes, self.weights, self.log_weights, lambda_star)


def laguerre_rule(n: int, lambda_star: int | None = None) -> QuadratureRule:
    """Build the ``n``-point Gauss-Laguerre rule.

    Nodes are eigenvalues of the Jacobi matrix (diagonal ``2k + 1``,
    off-diagonal ``k``), polished by one Newton step on ``L_n``. Weights
    come from ``x / ((n + 1)^2 L_{n+1}(x)^2)``.
    """
    if n < 1:
        raise DomainError(f"the rule needs at least one node, got {n}")

    k = np.arange(n)
    x = eigh_tridiagonal(2.0 * k + 1.0, np.arange(1.0, n), eigvals_only=True)
    x = np.sort(x)

    p, p_prev = laguerre_eval(n, x)
    dp = n * (p - p_prev) / x
    x = x - p / dp

    q, _ = laguerre_eval(n + 1, x)
    log_w = np.log(x) - 2.0 * math.log(n + 1) - 2.0 * np.log(np.abs(q))
    return QuadratureRule(x, np.exp(log_w), log_w, lambda_star)


def default_lambda_star(n: int) -> int:
    return math.ceil(n / 2)


def write_rule(rule: QuadratureRule, target: str | Path | TextIO) -> None:
    """Write ``l,x,w`` records (1-based ``l``) with 17 significant digits."""
    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8", newline="") as fp:
            write_rule(rule, fp)
        return
    writer = csv.writer(target, lineterminator="\n")
    writer.writerow(["l", "x", "w"])
    for l, (x, w) in enumerate(zip(rule.nodes, rule.weights), start=1):
        writer.writerow([l, f"{x:.17g}", f"{w:.17g}"])


def read_rule(source: str | Path | TextIO) -> QuadratureRule:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fp:
            return read_rule(fp)
    rows = list(csv.DictReader(source))
    x = np.array([float(r["x"]) for r in rows])
    w = np.array([float(r["w"]) for r in rows])
    with np.errstate(divide="ignore"):
        return QuadratureRule(x, w, np.log(w))


# }}}


# {{{ per-node ODE


def phi_rhs_coefficients(order: FractionalOrder, r):
    """Return ``(decay, source)`` so that ``dphi/dt = -decay*phi + source*f(t)``.

    ``decay = psi(r)`` overflows to ``inf`` for ``r`` beyond ~709; the
    steppers never form it directly.
    """
    alpha = order.alpha
    decay = psi(r)
    with np.errstate(over="ignore"):
        source = order.c_alpha * np.exp(log1p_exp_neg(r) + (1.0 - alpha) * psi_exponent(r))
    if np.ndim(source) == 0:
        source = float(source)
    return decay, source


def _log_source(order: FractionalOrder, r):
    """``log(source / c_alpha)``; ``-inf`` where the source underflows."""
    return log1p_exp_neg(r) + (1.0 - order.alpha) * psi_exponent(r)


def _check_step(h: float) -> None:
    if not (h > 0 and math.isfinite(h)):
        raise DomainError(f"step size must be positive, got {h}")


def backward_euler_coefficients(order: FractionalOrder, r, h: float):
    """``(a, b)`` with ``phi_new = a * phi + b * f_n``.

    ``a = 1 / (1 + h psi)`` and ``b = h source / (1 + h psi)``.
    """
    _check_step(h)
    log_hd = math.log(h) + psi_exponent(r)
    log_den = np.logaddexp(0.0, log_hd)
    a = np.exp(-log_den)
    with np.errstate(over="ignore"):
        b = order.c_alpha * np.exp(math.log(h) + _log_source(order, r) - log_den)
    return a, b


def trapezoidal_coefficients(order: FractionalOrder, r, h: float):
    """``(a, b)`` with ``phi_new = a * phi + b * (f_n + f_prev)``.

    ``a = (1 - q) / (1 + q) = -tanh(log(q) / 2)`` for ``q = h psi / 2``, and
    ``b = (h/2) source / (1 + q)``.
    """
    _check_step(h)
    log_q = math.log(0.5 * h) + psi_exponent(r)
    a = -np.tanh(0.5 * log_q)
    with np.errstate(over="ignore"):
        b = order.c_alpha * np.exp(
            math.log(0.5 * h) + _log_source(order, r) - np.logaddexp(0.0, log_q)
        )
    return a, b


def node_parameters(order: FractionalOrder, rule: QuadratureRule) -> tuple[np.ndarray, np.ndarray]:
    """Diffusive variables ``r_l = -x_l/(1-alpha)`` and ``r~_l = x_l/alpha``."""
    return -rule.nodes / (1.0 - order.alpha), rule.nodes / order.alpha


def exact_node_solution_const(order: FractionalOrder, r, t: float):
    """Solution for ``f = 1`` started at zero: ``source * (1 - exp(-psi t)) / psi``."""
    d = psi(r)
    _, s = phi_rhs_coefficients(order, r)
    with np.errstate(invalid="ignore", divide="ignore"):
        g = np.where(d > 0, -np.expm1(-d * t) / np.where(d > 0, d, 1.0), t)
    return s * g


# }}}


# {{{ state and stepping


@dataclass
class DiffusiveState:
    """Per-node values on both half-lines at time ``t_current``."""

    phi: np.ndarray
    phi_tilde: np.ndarray
    t_current: float = 0.0

    @classmethod
    def zeros(cls, n: int, t0: float = 0.0) -> DiffusiveState:
        return cls(np.zeros(n), np.zeros(n), float(t0))

    def copy(self) -> DiffusiveState:
        return DiffusiveState(self.phi.copy(), self.phi_tilde.copy(), self.t_current)


def step_backward_euler(
    state: DiffusiveState,
    order: FractionalOrder,
    rule: QuadratureRule,
    f_n: float,
    h: float,
) -> DiffusiveState:
    r, r_tilde = node_parameters(order, rule)
    a, b = backward_euler_coefficients(order, r, h)
    at, bt = backward_euler_coefficients(order, r_tilde, h)
    return DiffusiveState(
        a * state.phi + b * f_n,
        at * state.phi_tilde + bt * f_n,
        state.t_current + h,
    )


def step_trapezoidal(
    state: DiffusiveState,
    order: FractionalOrder,
    rule: QuadratureRule,
    f_n: float,
    f_prev: float,
    h: float,
) -> DiffusiveState:
    r, r_tilde = node_parameters(order, rule)
    a, b = trapezoidal_coefficients(order, r, h)
    at, bt = trapezoidal_coefficients(order, r_tilde, h)
    fsum = f_n + f_prev
    return DiffusiveState(
        a * state.phi + b * fsum,
        at * state.phi_tilde + bt * fsum,
        state.t_current + h,
    )


def assemble(state: DiffusiveState, order: FractionalOrder, rule: QuadratureRule) -> float:
    """Quadrature sum ``sum_l w_l e^{x_l} [phi_l/(1-alpha) + phi~_l/alpha]``.

    With ``rule.lambda_star`` set, only the first ``lambda_star`` nodes enter
    the negative half-line part.
    """
    scale = np.exp(rule.log_weights + rule.nodes)
    left = scale * state.phi / (1.0 - order.alpha)
    if rule.lambda_star is not None:
        left = left[: rule.lambda_star]
    right = scale * state.phi_tilde / order.alpha
    return float(left.sum() + right.sum())


class GaussLaguerreIntegrator:
    """Marches the per-node ODEs one grid step at a time.

    Coefficients are cached per step size, so uniform grids pay for them once.
    """

    def __init__(
        self,
        order: FractionalOrder,
        rule: QuadratureRule,
        a: float = 0.0,
        stepper: Stepper = "trapezoidal",
    ) -> None:
        if stepper not in STEPPERS:
            raise DomainError(f"stepper must be one of {STEPPERS}, got {stepper!r}")
        self.order = order
        self.rule = rule
        self.stepper = stepper
        self.state = DiffusiveState.zeros(rule.size, a)
        self._r = np.concatenate(node_parameters(order, rule))
        self._cache_h: float | None = None
        self._coeffs: tuple[np.ndarray, np.ndarray] | None = None

    def _coefficients(self, h: float):
        if h != self._cache_h:
            fn = (
                backward_euler_coefficients
                if self.stepper == "backward_euler"
                else trapezoidal_coefficients
            )
            self._coeffs = fn(self.order, self._r, h)
            self._cache_h = h
        return self._coeffs

    def step(self, t_next: float, f_n: float, f_prev: float) -> float:
        h = t_next - self.state.t_current
        a, b = self._coefficients(h)
        forcing = f_n if self.stepper == "backward_euler" else f_n + f_prev
        n = self.rule.size
        both = np.concatenate([self.state.phi, self.state.phi_tilde])
        both = a * both + b * forcing
        self.state = DiffusiveState(both[:n], both[n:], float(t_next))
        return self.value()

    def value(self) -> float:
        return assemble(self.state, self.order, self.rule)


def gl_integrate(
    order: FractionalOrder,
    f,
    grid: TimeGrid,
    n_nodes: int,
    stepper: Stepper = "trapezoidal",
    lambda_star: int | None = None,
) -> np.ndarray:
    """Approximate :math:`I_a^\\alpha f(t_n)` for ``n = 1, ..., P``."""
    F = SampledFunction.wrap(f).on(grid)
    rule = laguerre_rule(n_nodes, lambda_star)
    integrator = GaussLaguerreIntegrator(order, rule, grid.a, stepper)
    t = grid.points
    out = np.empty(grid.P)
    for n in range(1, grid.P + 1):
        out[n - 1] = integrator.step(t[n], F[n], F[n - 1])
    return out


def write_state(state: DiffusiveState, target: str | Path | TextIO) -> None:
    """Snapshot as ``# t_current=...`` followed by ``l,phi,phi_tilde`` records."""
    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8", newline="") as fp:
            write_state(state, fp)
        return
    target.write(f"# t_current={state.t_current:.17g}\n")
    writer = csv.writer(target, lineterminator="\n")
    writer.writerow(["l", "phi", "phi_tilde"])
    for l, (p, q) in enumerate(zip(state.phi, state.phi_tilde), start=1):
        writer.writerow([l, f"{p:.17g}", f"{q:.17g}"])


def read_state(source: str | Path | TextIO) -> DiffusiveState:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fp:
            return read_state(fp)
    first = source.readline().strip()
    if not first.startswith("# t_current="):
        raise ValueError("state snapshot must start with '# t_current='")
    t_current = float(first.partition("=")[2])
    rows = list(csv.DictReader(source))
    return DiffusiveState(
        np.array([float(r["phi"]) for r in rows]),
        np.array([float(r["phi_tilde"]) for r in rows]),
        t_current,
    )


# }}}
