r"""Reference values of :math:`I_a^\alpha f(t)` independent of the diffusive schemes.

Monomials :math:`(t - a)^p` have the closed form

.. math::

    I_a^\alpha (\cdot - a)^p (t) = \frac{\Gamma(p + 1)}{\Gamma(p + 1 + \alpha)} (t - a)^{p + \alpha}.

General continuous :math:`f` are handled by substituting :math:`u = (t - \tau)^\alpha`,
which removes the weak singularity:

.. math::

    I_a^\alpha f(t) = \frac{1}{\Gamma(\alpha + 1)}
        \int_0^{(t - a)^\alpha} f(t - u^{1/\alpha}) \,\mathrm{d}u.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import gamma, gammaln

from fracint.core import FractionalOrder
from fracint.errors import AccuracyError, DomainError

#: Gauss-Legendre order used on every panel
PANEL_ORDER = 16
#: ratio between consecutive panels of the geometric grading at the endpoints
GRADING_RATIO = 0.25
MAX_REFINEMENTS = 20


@dataclass(frozen=True)
class MonomialSpec:
    """The function ``f(t) = (t - a)**p``."""

    p: float
    a: float = 0.0

    def __post_init__(self) -> None:
        if not self.p >= 0:
            raise DomainError(f"monomial exponent must be >= 0, got {self.p}")

    def __call__(self, t):
        return (np.asarray(t, dtype=float) - self.a) ** self.p


def rl_monomial(order: FractionalOrder, spec: MonomialSpec, t: float) -> float:
    if t < spec.a:
        raise DomainError(f"need t >= a, got t={t}, a={spec.a}")
    if t == spec.a:
        return 0.0
    p, alpha = spec.p, order.alpha
    log_coeff = gammaln(p + 1.0) - gammaln(p + 1.0 + alpha)
    return math.exp(log_coeff) * (t - spec.a) ** (p + alpha)


@lru_cache(maxsize=None)
def _unit_panel_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _breakpoints(level: int) -> np.ndarray:
    """Uniform ``2**level`` panels on [0, 1], end panels graded geometrically."""
    m = 2**level
    n_grade = 18 + 2 * level
    inner = np.linspace(0.0, 1.0, m + 1)
    width = 1.0 / m
    graded = width * GRADING_RATIO ** np.arange(n_grade, 0, -1)
    return np.unique(np.concatenate([[0.0], graded, inner, 1.0 - graded[::-1], [1.0]]))


def _evaluate(f: Callable, x: np.ndarray) -> np.ndarray:
    try:
        y = np.asarray(f(x), dtype=float)
    except (TypeError, ValueError):
        y = None
    if y is None or y.shape != x.shape:
        y = np.array([float(f(xi)) for xi in x.ravel()]).reshape(x.shape)
    return y


def _panel_sum(g: Callable, level: int) -> float:
    """Composite Gauss-Legendre integral of ``g`` over [0, 1]."""
    bp = _breakpoints(level)
    x0, w0 = _unit_panel_rule(PANEL_ORDER)
    lo, width = bp[:-1, None], np.diff(bp)[:, None]
    x = lo + width * x0
    return float(np.sum(width * w0 * _evaluate(g, x)))


def rl_numeric(
    order: FractionalOrder,
    f: Callable,
    a: float,
    t: float,
    tol: float = 1.0e-12,
) -> float:
    """Fractional integral of a continuous ``f`` by regularized panel quadrature.

    The panel count is doubled until two successive estimates differ by less
    than ``tol``; after :data:`MAX_REFINEMENTS` doublings an
    :class:`AccuracyError` carrying the last two estimates is raised.
    """
    if not t > a:
        raise DomainError(f"need t > a, got t={t}, a={a}")
    alpha = order.alpha
    U = (t - a) ** alpha

    def g(v):
        # clamp guards against t - u**(1/alpha) landing a rounding error below a
        tau = np.maximum(t - (U * v) ** (1.0 / alpha), a)
        return _evaluate(f, tau)

    scale = U / gamma(alpha + 1.0)
    current = scale * _panel_sum(g, 0)
    for level in range(1, MAX_REFINEMENTS + 1):
        previous, current = current, scale * _panel_sum(g, level)
        if abs(current - previous) < tol:
            return current
    raise AccuracyError("rl_numeric did not converge", previous, current)
