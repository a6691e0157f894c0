r"""Fractional integrals on a grid by piecewise-constant product integration.

With :math:`\tilde F = F^n` on :math:`J_n = (t_{n-1}, t_n]`,

.. math::

    I_a^\alpha \tilde F(t_n) = \sum_{j=1}^{n} z_{nj} F^j, \qquad
    z_{nj} = \frac{(t_n - t_{j-1})^\alpha - (t_n - t_j)^\alpha}{\Gamma(\alpha + 1)}.

:func:`direct_convolution` evaluates this sum in :math:`O(P^2)` work.
:func:`fast_convolution` keeps the local weight :math:`z_{nn}` exact and
replaces the history part by an exponential sum, whose terms obey a
one-step recursion; work is :math:`O(\Lambda P)` and memory :math:`O(\Lambda)`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, TextIO

import numpy as np
from scipy.special import gamma

from fracint.core import FractionalOrder, SampledFunction, TimeGrid
from fracint.errors import PreconditionError
from fracint.expsum import ExpSumKernel

# relative slack when comparing a step to kernel.delta, absorbs linspace round-off
_DELTA_SLACK = 1.0e-9


class OpCounter:
    """Counts kernel-weight evaluations; used to check complexity claims."""

    def __init__(self) -> None:
        self.count = 0

    def add(self, n: int) -> None:
        self.count += int(n)


def _power_difference(u, du, alpha: float):
    """``u**alpha - (u - du)**alpha`` without cancellation when ``du << u``."""
    with np.errstate(divide="ignore"):
        return u**alpha * -np.expm1(alpha * np.log1p(-du / u))


def local_weight(order: FractionalOrder, dt: float) -> float:
    """Exact weight ``z_nn = dt**alpha / Gamma(alpha + 1)`` of the current interval."""
    return dt**order.alpha / gamma(order.alpha + 1.0)


def direct_convolution(
    order: FractionalOrder,
    grid: TimeGrid,
    f,
    *,
    counter: OpCounter | None = None,
) -> np.ndarray:
    """Exact-kernel product integration, values at ``t_1, ..., t_P``."""
    F = SampledFunction.wrap(f).on(grid)
    t = grid.points
    dt = grid.steps
    g = gamma(order.alpha + 1.0)

    out = np.empty(grid.P)
    for n in range(1, grid.P + 1):
        # u = t_n - t_{j-1}, interval widths dt_j for j = 1..n
        u = t[n] - t[:n]
        z = _power_difference(u, dt[:n], order.alpha) / g
        z[-1] = dt[n - 1] ** order.alpha / g
        out[n - 1] = z @ F[1 : n + 1]
        if counter is not None:
            counter.add(n)
    return out


def _check_steps(kernel: ExpSumKernel, steps: np.ndarray) -> None:
    if kernel.delta is None:
        return
    limit = kernel.delta * (1.0 - _DELTA_SLACK)
    bad = np.flatnonzero(steps < limit)
    if bad.size:
        n = int(bad[0]) + 1
        raise PreconditionError(
            f"step {n} has width {steps[bad[0]]!r} < kernel delta {kernel.delta!r}"
        )


def _history_weight(kernel: ExpSumKernel, order: FractionalOrder, dt: float) -> np.ndarray:
    r"""``c_alpha w_l (1 - exp(-beta_l dt)) / beta_l`` for all terms.

    Terms whose exponent underflowed to zero have zero weight as well.
    """
    beta = kernel.exponents
    with np.errstate(invalid="ignore", divide="ignore"):
        g = -np.expm1(-beta * dt) / beta
    g = np.where(beta > 0, g, dt)
    return order.c_alpha * kernel.weights * g


def expsum_direct_convolution(
    kernel: ExpSumKernel,
    order: FractionalOrder,
    grid: TimeGrid,
    f,
) -> np.ndarray:
    """Same sum as the recursion, evaluated term by term in :math:`O(\\Lambda P^2)`.

    Exists as an independent check of :func:`fast_convolution`.
    """
    F = SampledFunction.wrap(f).on(grid)
    t = grid.points
    dt = grid.steps
    _check_steps(kernel, dt)

    beta = kernel.exponents
    # K_{lj} without the propagation factor, one row per interval j
    K = np.stack([_history_weight(kernel, order, d) for d in dt])

    out = np.empty(grid.P)
    for n in range(1, grid.P + 1):
        z_nn = local_weight(order, dt[n - 1])
        if n == 1:
            out[0] = z_nn * F[1]
            continue
        lag = t[n] - t[1:n]  # t_n - t_j, j = 1..n-1
        decay = np.exp(-np.multiply.outer(lag, beta))
        Knj = K[: n - 1] * decay
        history = (Knj * F[1:n, None]).sum(axis=0)
        out[n - 1] = z_nn * F[n] + history.sum()
    return out


@dataclass
class HistoryState:
    """Exponentially weighted history integrals, one per kernel term.

    ``phi[l]`` holds ``c_alpha w_l \\int_a^{t} exp(-beta_l (t - tau)) F(tau) dtau``
    with ``t`` the end of the last completed interval ``last_index``.
    """

    phi: np.ndarray
    last_index: int = 0

    @classmethod
    def zeros(cls, kernel: ExpSumKernel) -> HistoryState:
        return cls(np.zeros(kernel.n_terms), 0)


def step_history(
    state: HistoryState,
    kernel: ExpSumKernel,
    order: FractionalOrder,
    F_prev: float,
    dt: float,
    *,
    out: HistoryState | None = None,
) -> HistoryState:
    """Absorb one completed interval of width ``dt`` carrying value ``F_prev``.

    Pass ``out=state`` to update in place.
    """
    _check_steps(kernel, np.array([dt]))
    phi = np.exp(-kernel.exponents * dt) * state.phi + _history_weight(kernel, order, dt) * F_prev
    if out is None:
        return HistoryState(phi, state.last_index + 1)
    out.phi[:] = phi
    out.last_index = state.last_index + 1
    return out


class StreamingConvolution:
    """Feed ``(t_n, F^n)`` in time order, get the approximate integral back.

    Only the ``Lambda`` history values and the last time are stored.
    """

    def __init__(
        self,
        kernel: ExpSumKernel,
        order: FractionalOrder,
        a: float,
        *,
        counter: OpCounter | None = None,
    ) -> None:
        self.kernel = kernel
        self.order = order
        self.t_last = float(a)
        self.state = HistoryState.zeros(kernel)
        self.counter = counter

    @property
    def live_state_size(self) -> int:
        return self.state.phi.size

    def push(self, t: float, F: float) -> float:
        dt = float(t) - self.t_last
        if dt <= 0:
            raise PreconditionError(f"times must increase, got {t} after {self.t_last}")
        _check_steps(self.kernel, np.array([dt]))

        # history up to t_{n-1}, propagated to t_n, then closed with the new interval
        phi = self.state.phi
        phi *= np.exp(-self.kernel.exponents * dt)
        value = local_weight(self.order, dt) * F + phi.sum()
        phi += _history_weight(self.kernel, self.order, dt) * F

        self.state.last_index += 1
        self.t_last = float(t)
        if self.counter is not None:
            self.counter.add(phi.size)
        return float(value)

    def run(self, pairs: Iterable[tuple[float, float]]) -> Iterator[float]:
        for t, F in pairs:
            yield self.push(t, F)


def fast_convolution(
    kernel: ExpSumKernel,
    order: FractionalOrder,
    grid: TimeGrid,
    f,
    *,
    counter: OpCounter | None = None,
) -> np.ndarray:
    """Values at ``t_1, ..., t_P`` via the exponential-sum recursion."""
    F = SampledFunction.wrap(f).on(grid)
    _check_steps(kernel, grid.steps)
    stream = StreamingConvolution(kernel, order, grid.a, counter=counter)
    return np.fromiter(stream.run(zip(grid.points[1:], F[1:])), dtype=float, count=grid.P)


def write_results(t: np.ndarray, values: np.ndarray, target: str | Path | TextIO) -> None:
    """Write ``t,value`` records with 17 significant digits."""
    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8", newline="") as fp:
            write_results(t, values, fp)
        return

    writer = csv.writer(target, lineterminator="\n")
    writer.writerow(["t", "value"])
    for ti, vi in zip(t, values):
        writer.writerow([f"{ti:.17g}", f"{vi:.17g}"])
