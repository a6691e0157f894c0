r"""Shared domain types and the transformation :math:`\psi(r) = \exp(r - e^{-r})`.

The transformation maps :math:`\mathbb{R}` onto :math:`(0, \infty)` and is the
change of variables behind both the exponential-sum kernel and the
Gauss-Laguerre diffusive scheme.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from fracint.errors import DomainError, PreconditionError


@dataclass(frozen=True)
class FractionalOrder:
    """Order :math:`0 < \\alpha < 1` of the fractional integral."""

    alpha: float
    c_alpha: float = field(init=False)

    def __post_init__(self) -> None:
        alpha = float(self.alpha)
        if not math.isfinite(alpha):
            raise DomainError(f"alpha must be finite, got {self.alpha!r}")
        if not 0.0 < alpha < 1.0:
            raise DomainError(f"alpha must lie in the open interval (0, 1), got {alpha!r}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "c_alpha", math.sin(math.pi * alpha) / math.pi)

    @property
    def complement(self) -> float:
        """``1 - alpha``."""
        return 1.0 - self.alpha


def make_order(alpha: float) -> FractionalOrder:
    return FractionalOrder(alpha)


# {{{ transformation


def psi_exponent(r):
    """Return ``r - exp(-r)``; ``-inf`` once ``exp(-r)`` overflows."""
    r = np.asarray(r, dtype=float)
    with np.errstate(over="ignore"):
        out = r - np.exp(-r)
    return out[()] if out.ndim == 0 else out


def psi(r):
    r"""Evaluate :math:`\psi(r) = \exp(r - e^{-r})`.

    The exponent is formed first so that very negative ``r`` gives an exact
    ``0.0`` instead of an overflow; very positive ``r`` (beyond ~709)
    saturates to ``inf``.
    """
    with np.errstate(over="ignore"):
        out = np.exp(psi_exponent(r))
    return out[()] if np.ndim(out) == 0 else out


def log1p_exp_neg(r):
    """Return ``log(1 + exp(-r))`` without overflow."""
    return np.logaddexp(0.0, -np.asarray(r, dtype=float))


def psi_prime(r):
    r"""Derivative :math:`\psi'(r) = (1 + e^{-r}) \psi(r)`, evaluated in log space."""
    with np.errstate(over="ignore"):
        out = np.exp(log1p_exp_neg(r) + psi_exponent(r))
    return out[()] if np.ndim(out) == 0 else out


# }}}


# {{{ grids and sampled functions


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing grid :math:`a = t_0 < t_1 < \\dots < t_P`."""

    points: np.ndarray

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise DomainError("a time grid needs at least two points (P >= 1)")
        if not np.all(np.isfinite(pts)):
            raise DomainError("time grid points must be finite")
        if not np.all(np.diff(pts) > 0):
            raise DomainError("time grid points must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, a: float, b: float, steps: int) -> TimeGrid:
        if steps < 1:
            raise DomainError(f"steps must be >= 1, got {steps}")
        if not a < b:
            raise DomainError(f"need a < b, got a={a}, b={b}")
        return cls(np.linspace(a, b, steps + 1))

    @property
    def a(self) -> float:
        return float(self.points[0])

    @property
    def b(self) -> float:
        return float(self.points[-1])

    @property
    def P(self) -> int:
        return self.points.size - 1

    @property
    def steps(self) -> np.ndarray:
        """Spacings :math:`\\Delta t_n = t_n - t_{n-1}` for ``n = 1..P``."""
        return np.diff(self.points)

    def __len__(self) -> int:
        return self.points.size


class SampledFunction:
    """A real function given either as a callable or as samples on a grid.

    Sample-backed functions are bound to their grid; asking for values on a
    different grid is a contract violation.
    """

    def __init__(
        self,
        func: Callable[[float], float] | None = None,
        *,
        samples: Sequence[float] | np.ndarray | None = None,
        grid: TimeGrid | None = None,
    ) -> None:
        if (func is None) == (samples is None):
            raise ValueError("give exactly one of 'func' or 'samples'")
        self.func = func
        self.grid = grid
        self.samples = None
        if samples is not None:
            values = np.array(samples, dtype=float)
            if grid is not None and values.shape != (len(grid),):
                raise PreconditionError(
                    f"expected {len(grid)} samples for the grid, got {values.shape}"
                )
            values.setflags(write=False)
            self.samples = values

    @classmethod
    def wrap(cls, f) -> SampledFunction:
        """Coerce a callable, an array or a :class:`SampledFunction`."""
        if isinstance(f, SampledFunction):
            return f
        if callable(f):
            return cls(f)
        return cls(samples=f)

    def on(self, grid: TimeGrid) -> np.ndarray:
        """Values :math:`F^n = f(t_n)` at every grid point."""
        if self.samples is not None:
            if self.samples.shape != (len(grid),):
                raise PreconditionError(
                    f"samples have shape {self.samples.shape}, "
                    f"grid has {len(grid)} points"
                )
            if self.grid is not None and not np.array_equal(self.grid.points, grid.points):
                raise PreconditionError("samples are bound to a different grid")
            return self.samples
        return np.array([float(self.func(t)) for t in grid.points])

    def __call__(self, t: float) -> float:
        if self.func is None:
            raise TypeError("sample-backed function cannot be evaluated off-grid")
        return float(self.func(t))


# }}}
