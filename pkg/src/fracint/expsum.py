r"""Exponential-sum approximation of the diffusive kernel.

The kernel

.. math::

    K(t) = \int_{-\infty}^{\infty} (1 + e^{-r}) \psi(r)^{1-\alpha}
        e^{-t \psi(r)} \,\mathrm{d}r = \Gamma(1 - \alpha) t^{\alpha - 1}

is discretized by the trapezoidal rule with step :math:`h` and truncated to
the terms :math:`l = -M, \dots, N`, giving

.. math::

    K(t) \approx \sum_{l=-M}^{N} w_l e^{-\beta_l t}, \qquad
    \beta_l = \psi(l h), \quad w_l = h (1 + e^{-l h}) \beta_l^{1-\alpha}.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import TextIO

import numpy as np
from scipy.special import gamma

from fracint.core import FractionalOrder, log1p_exp_neg, make_order, psi_exponent
from fracint.errors import DomainError


@dataclass(frozen=True)
class ExpSumKernel:
    """Weights and exponents of a finite exponential sum, with build metadata."""

    weights: np.ndarray
    exponents: np.ndarray
    h: float
    M: int
    N: int
    order: FractionalOrder
    #: smallest time at which the sum is meant to be accurate
    delta: float | None = None
    #: largest such time; horizons above 1 are handled by rescaling
    horizon: float = 1.0
    epsilon: float | None = None

    def __post_init__(self) -> None:
        n = self.M + 1 + self.N
        if self.weights.shape != (n,) or self.exponents.shape != (n,):
            raise DomainError(f"expected {n} terms, got {self.weights.shape}")
        self.weights.setflags(write=False)
        self.exponents.setflags(write=False)

    @property
    def n_terms(self) -> int:
        return self.M + 1 + self.N

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.M, self.N + 1)

    @property
    def time_scale(self) -> float:
        return max(self.horizon, 1.0)

    def __len__(self) -> int:
        return self.n_terms


@dataclass(frozen=True)
class TruncationBudget:
    """Accuracy target and the constants of the two tail bounds.

    The left tail is bounded by ``C1 * exp((alpha - 1) * exp(M h))`` and the
    right tail at ``t = delta`` by
    ``C2 / delta**beta_exp * exp(-theta * delta * exp(N h - 1))``.
    """

    epsilon: float
    delta: float
    horizon: float = 1.0
    C1: float = 1.0
    C2: float = 1.0
    beta_exp: float = 0.0
    theta: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon < 1.0:
            raise DomainError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not 0.0 < self.delta < self.horizon:
            raise DomainError(
                f"need 0 < delta < horizon, got delta={self.delta}, horizon={self.horizon}"
            )
        if not 0.0 < self.theta <= 1.0:
            raise DomainError(f"theta must lie in (0, 1], got {self.theta}")
        if self.C1 <= 0 or self.C2 <= 0:
            raise DomainError("bound constants C1, C2 must be positive")


def trapezoid_term(l, h: float, alpha: float, time_scale: float = 1.0):
    """Return ``(w_l, beta_l)`` for index ``l`` (scalar or array).

    With ``time_scale = T > 1`` the exponents are divided by ``T`` and the
    weights multiplied by ``T**(alpha - 1)``, which is exact because
    ``K(T s) = T**(alpha - 1) K(s)``. The weight formula still holds with the
    rescaled exponent.
    """
    lh = np.asarray(l, dtype=float) * h
    log_beta = psi_exponent(lh) - math.log(time_scale)
    log_w = math.log(h) + log1p_exp_neg(lh) + (1.0 - alpha) * log_beta
    with np.errstate(over="ignore"):
        return np.exp(log_w), np.exp(log_beta)


def build_expsum(
    order: FractionalOrder,
    h: float,
    M: int,
    N: int,
    *,
    delta: float | None = None,
    horizon: float = 1.0,
    epsilon: float | None = None,
) -> ExpSumKernel:
    """Build the truncated trapezoidal sum with terms ``l = -M, ..., N``.

    Terms far in the left tail (``l h`` below about ``-6.5``) have exponents
    that underflow to zero and then carry zero weight; they are kept so the
    term count stays ``M + 1 + N``.
    """
    if not (h > 0 and math.isfinite(h)):
        raise DomainError(f"step h must be positive, got {h}")
    if M < 0 or N < 0:
        raise DomainError(f"need M >= 0 and N >= 0, got M={M}, N={N}")
    if horizon <= 0:
        raise DomainError(f"horizon must be positive, got {horizon}")

    l = np.arange(-M, N + 1)
    w, beta = trapezoid_term(l, h, order.alpha, max(horizon, 1.0))
    return ExpSumKernel(
        weights=w,
        exponents=beta,
        h=float(h),
        M=int(M),
        N=int(N),
        order=order,
        delta=delta,
        horizon=float(horizon),
        epsilon=epsilon,
    )


def eval_expsum(kernel: ExpSumKernel, t):
    """Evaluate the sum at ``t > 0``, adding the fastest-decaying terms first."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("the kernel is singular at t = 0; need t > 0")
    w = kernel.weights[::-1]
    beta = kernel.exponents[::-1]
    terms = w * np.exp(-np.multiply.outer(t, beta))
    out = terms.sum(axis=-1)
    return out[()] if out.ndim == 0 else out


def eval_kernel_reference(order: FractionalOrder, t):
    """Exact kernel value ``Gamma(1 - alpha) * t**(alpha - 1)``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("the kernel is singular at t = 0; need t > 0")
    out = gamma(1.0 - order.alpha) * t ** (order.alpha - 1.0)
    return out[()] if out.ndim == 0 else out


# {{{ parameter selection


def default_step(epsilon: float) -> float:
    """Trapezoidal step ``2 pi / log(e + 1/epsilon)`` clipped to ``[0.1, 1]``."""
    h = 2.0 * math.pi / math.log(math.e + 1.0 / epsilon)
    return min(max(h, 0.1), 1.0)


def left_coverage(order: FractionalOrder, budget: TruncationBudget) -> float:
    """Smallest ``M h`` for which the left-tail bound is at most ``epsilon``."""
    alpha = order.alpha
    floor = math.log(alpha / (1.0 - alpha)) if alpha > 0.5 else 0.0
    log_ratio = math.log(budget.C1 / budget.epsilon)
    if log_ratio <= 0:
        return floor
    return max(floor, math.log(log_ratio / (1.0 - alpha)))


def right_coverage(order: FractionalOrder, budget: TruncationBudget) -> float:
    """Smallest ``N h`` for which the right-tail bound at ``t = delta`` is at most ``epsilon``.

    ``delta`` is taken on the normalized time axis ``t / max(horizon, 1)``.
    """
    delta = budget.delta / max(budget.horizon, 1.0)
    floor = 1.0 + math.log((1.0 - order.alpha) / delta)
    log_ratio = math.log(budget.C2 / budget.epsilon) - budget.beta_exp * math.log(delta)
    if log_ratio <= 0:
        return floor
    return max(floor, 1.0 + math.log(log_ratio / (budget.theta * delta)))


def select_parameters(
    order: FractionalOrder, budget: TruncationBudget
) -> tuple[float, int, int]:
    """Choose ``(h, M, N)`` meeting both tail bounds of the budget."""
    h = default_step(budget.epsilon)
    M = math.ceil(left_coverage(order, budget) / h)
    N = math.ceil(right_coverage(order, budget) / h)
    return h, M, N


def kernel_for_budget(order: FractionalOrder, budget: TruncationBudget) -> ExpSumKernel:
    h, M, N = select_parameters(order, budget)
    return build_expsum(
        order,
        h,
        M,
        N,
        delta=budget.delta,
        horizon=budget.horizon,
        epsilon=budget.epsilon,
    )


def term_count_scale(epsilon: float, delta: float) -> float:
    """The growth law ``log(1/eps) * log(log(1/eps) / delta)`` for the term count."""
    le = math.log(1.0 / epsilon)
    return le * math.log(le / delta)


# }}}


# {{{ certification


@dataclass(frozen=True)
class CertificationReport:
    t: np.ndarray
    approx: np.ndarray
    exact: np.ndarray
    rel_error: np.ndarray

    @property
    def max_rel_error(self) -> float:
        return float(self.rel_error.max())

    @property
    def argmax(self) -> float:
        return float(self.t[int(np.argmax(self.rel_error))])


def certify(
    kernel: ExpSumKernel,
    n_check: int = 200,
    *,
    t_min: float | None = None,
    t_max: float | None = None,
) -> CertificationReport:
    """Relative error of the sum against the exact kernel on a log-spaced grid.

    The grid spans ``[kernel.delta, kernel.horizon]`` unless overridden.
    """
    if n_check < 2:
        raise DomainError(f"n_check must be >= 2, got {n_check}")
    lo = kernel.delta if t_min is None else t_min
    hi = kernel.horizon if t_max is None else t_max
    if lo is None:
        raise DomainError("kernel has no delta; pass t_min explicitly")

    t = np.geomspace(lo, hi, n_check)
    t[0], t[-1] = lo, hi
    approx = np.asarray(eval_expsum(kernel, t))
    exact = np.asarray(eval_kernel_reference(kernel.order, t))
    rel = np.abs(approx - exact) / exact
    return CertificationReport(t=t, approx=approx, exact=exact, rel_error=rel)


# }}}


# {{{ text export


_HEADER_KEYS = ("alpha", "h", "M", "N", "delta", "horizon", "epsilon")


def _fmt(x) -> str:
    return "nan" if x is None else f"{float(x):.17g}"


def write_kernel(kernel: ExpSumKernel, target: str | Path | TextIO) -> None:
    """Write ``# key=value`` header lines followed by ``l,w,beta`` records."""
    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8", newline="") as fp:
            write_kernel(kernel, fp)
        return

    header = {
        "alpha": _fmt(kernel.order.alpha),
        "h": _fmt(kernel.h),
        "M": str(kernel.M),
        "N": str(kernel.N),
        "delta": _fmt(kernel.delta),
        "horizon": _fmt(kernel.horizon),
        "epsilon": _fmt(kernel.epsilon),
    }
    for key in _HEADER_KEYS:
        target.write(f"# {key}={header[key]}\n")
    target.write("l,w,beta\n")
    for l, w, b in zip(kernel.indices, kernel.weights, kernel.exponents):
        target.write(f"{l},{_fmt(w)},{_fmt(b)}\n")


def read_kernel(source: str | Path | TextIO) -> ExpSumKernel:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fp:
            return read_kernel(fp)

    header: dict[str, str] = {}
    rows = []
    for line in source:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            header[key] = value
        elif line == "l,w,beta":
            continue
        else:
            l, w, b = line.split(",")
            rows.append((int(l), float(w), float(b)))

    missing = [k for k in _HEADER_KEYS if k not in header]
    if missing:
        raise ValueError(f"kernel file is missing header fields: {missing}")

    def opt(key):
        value = float(header[key])
        return None if math.isnan(value) else value

    M, N = int(header["M"]), int(header["N"])
    if [r[0] for r in rows] != list(range(-M, N + 1)):
        raise ValueError("kernel file term indices do not match M and N")

    return ExpSumKernel(
        weights=np.array([r[1] for r in rows]),
        exponents=np.array([r[2] for r in rows]),
        h=float(header["h"]),
        M=M,
        N=N,
        order=make_order(float(header["alpha"])),
        delta=opt("delta"),
        horizon=float(header["horizon"]),
        epsilon=opt("epsilon"),
    )


def kernel_to_text(kernel: ExpSumKernel) -> str:
    buf = io.StringIO()
    write_kernel(kernel, buf)
    return buf.getvalue()


# }}}
