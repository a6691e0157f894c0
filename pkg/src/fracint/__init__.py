"""Riemann-Liouville fractional integrals of order 0 < alpha < 1 via diffusive representations."""

from fracint.core import FractionalOrder, SampledFunction, TimeGrid, make_order, psi, psi_prime
from fracint.errors import AccuracyError, DomainError, PreconditionError
from fracint.expsum import (
    ExpSumKernel,
    TruncationBudget,
    build_expsum,
    certify,
    eval_expsum,
    eval_kernel_reference,
    kernel_for_budget,
    select_parameters,
)
from fracint.fastconv import (
    StreamingConvolution,
    direct_convolution,
    expsum_direct_convolution,
    fast_convolution,
)
from fracint.glquad import QuadratureRule, gl_integrate, laguerre_rule
from fracint.oracle import MonomialSpec, rl_monomial, rl_numeric

__all__ = [
    "AccuracyError",
    "DomainError",
    "ExpSumKernel",
    "FractionalOrder",
    "MonomialSpec",
    "PreconditionError",
    "QuadratureRule",
    "SampledFunction",
    "StreamingConvolution",
    "TimeGrid",
    "TruncationBudget",
    "build_expsum",
    "certify",
    "direct_convolution",
    "eval_expsum",
    "eval_kernel_reference",
    "expsum_direct_convolution",
    "fast_convolution",
    "gl_integrate",
    "kernel_for_budget",
    "laguerre_rule",
    "make_order",
    "psi",
    "psi_prime",
    "rl_monomial",
    "rl_numeric",
    "select_parameters",
]
