"""Chern-character cocycles of truncated Fredholm modules.

For ``F = sign(D)`` and commutators ``c_i = [F, a_i]``:

* even degree ``n``: ``psi(a_0..a_n) = (1/2) (n/2)! Tr_s(F c_0 ... c_n)``;
* odd degree ``n``: ``psi(a_0..a_n) = lambda_n Tr(F c_0 ... c_n)``, with
  ``lambda_n`` taken from the calibration table.

``phi_from_tau`` converts to the (b, B) normalization used by the pairing.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial, gamma, pi, sqrt
from typing import Sequence

import numpy as np

from .config import DEFAULT, Tolerances
from .exceptions import ParityError
from .linalg import (
    GradedOperator,
    as_dense,
    commutator,
    dagger,
    identity_like,
    matmul,
    max_abs,
    sign_operator,
    supertrace,
    trace,
)

__all__ = [
    "MAX_DEGREE",
    "ChernCocycle",
    "tau_even",
    "tau_odd",
    "evaluate",
    "phi_from_tau",
    "check_cyclicity",
    "check_hochschild",
    "even_normalization",
    "odd_normalization_closed_form",
    "odd_normalization_gamma",
]

MAX_DEGREE = 5


def even_normalization(n: int) -> Fraction:
    if n % 2:
        raise ValueError("even normalization needs an even degree")
    return Fraction(factorial(n // 2), 2)


def odd_normalization_closed_form(n: int) -> Fraction:
    """Candidate ``(-1)^k (2k+1)! / (k! 4^(k+1))`` for ``n = 2k+1``."""
    if n % 2 == 0:
        raise ValueError("odd normalization needs an odd degree")
    k = n // 2
    return Fraction((-1) ** k * factorial(n), factorial(k) * 4 ** (k + 1))


def odd_normalization_gamma(n: int) -> float:
    """The same constant written as ``(-1)^k Gamma(n/2 + 1) / (2 sqrt(pi))``."""
    k = n // 2
    return (-1) ** k * gamma(n / 2 + 1) / (2 * sqrt(pi))


@dataclass(frozen=True, eq=False)
class ChernCocycle:
    """Degree, the involution ``F`` and the normalization constant."""

    degree: int
    F: GradedOperator
    normalization: float
    parity: str

    def __post_init__(self):
        if self.parity not in ("even", "odd"):
            raise ValueError(f"unknown cocycle parity {self.parity!r}")
        if self.degree < 0 or self.degree > MAX_DEGREE:
            raise ValueError(f"degree {self.degree} outside 0..{MAX_DEGREE}")
        if (self.degree % 2 == 0) != (self.parity == "even"):
            raise ValueError(f"degree {self.degree} does not match parity {self.parity!r}")
        if self.parity == "even":
            if not self.F.graded or self.F.parity != "odd":
                raise ParityError("an even cocycle needs F odd with respect to a grading")
        elif self.F.graded:
            raise ParityError("an odd cocycle is ungraded")

    @classmethod
    def for_triple(cls, triple, degree: int, normalization: float | None = None,
                   F: GradedOperator | None = None, tol: Tolerances = DEFAULT,
                   check: bool = True) -> "ChernCocycle":
        F = sign_operator(triple.dirac, tol=tol) if F is None else F
        if check:
            _check_involution(F, tol)
        if normalization is None:
            if triple.parity == "even":
                normalization = float(even_normalization(degree))
            else:
                from .calibration import load_table

                normalization = load_table().odd_normalization(degree)
        return cls(degree, F, float(normalization), triple.parity)

    @property
    def grading(self):
        return self.F.space


def _check_involution(F: GradedOperator, tol: Tolerances):
    m = F.matrix
    defect = max(max_abs(m - dagger(m)), max_abs(matmul(m, m) - identity_like(m)))
    if defect > 1e-9:
        raise ValueError(f"F is not a self-adjoint involution (defect {defect:.3e})")


def _raw(cocycle: ChernCocycle, args: Sequence[GradedOperator]) -> complex:
    n = cocycle.degree
    if len(args) != n + 1:
        raise ValueError(f"degree {n} cocycle takes {n + 1} arguments, got {len(args)}")
    F = cocycle.F
    if cocycle.parity == "even":
        for a in args:
            if not a.graded or a.parity != "even":
                raise ParityError("even cocycles take even arguments")
    m = F.matrix
    prod = m
    for a in args:
        prod = matmul(prod, commutator(m, a.matrix))
    if cocycle.parity == "even":
        return supertrace(_graded(prod, F.space))
    return trace(prod)


def _graded(matrix, space):
    # the product is odd (F times an even number of odd commutators); wrap
    # without re-checking its block structure
    op = object.__new__(GradedOperator)
    object.__setattr__(op, "matrix", as_dense(matrix))
    object.__setattr__(op, "parity", "odd")
    object.__setattr__(op, "space", space)
    return op


def tau_even(cocycle: ChernCocycle, args: Sequence[GradedOperator]) -> complex:
    if cocycle.parity != "even":
        raise ValueError("tau_even needs an even-degree cocycle")
    return cocycle.normalization * _raw(cocycle, args)


def tau_odd(cocycle: ChernCocycle, args: Sequence[GradedOperator]) -> complex:
    if cocycle.parity != "odd":
        raise ValueError("tau_odd needs an odd-degree cocycle")
    return cocycle.normalization * _raw(cocycle, args)


def evaluate(cocycle: ChernCocycle, args: Sequence[GradedOperator]) -> complex:
    return cocycle.normalization * _raw(cocycle, args)


def phi_from_tau(n: int, tau_value: complex) -> complex:
    """``(-1)^floor(n/2) tau / n!``."""
    if n < 0:
        raise ValueError("degree must be non-negative")
    return (-1) ** (n // 2) * tau_value / factorial(n)


def check_cyclicity(cocycle: ChernCocycle, args: Sequence[GradedOperator]) -> float:
    """``|psi(a_0..a_n) - (-1)^n psi(a_n, a_0..a_{n-1})|``."""
    n = cocycle.degree
    args = list(args)
    shifted = [args[-1]] + args[:-1]
    return float(abs(evaluate(cocycle, args) - (-1) ** n * evaluate(cocycle, shifted)))


def check_hochschild(cocycle: ChernCocycle, args: Sequence[GradedOperator],
                     products: Sequence[GradedOperator] | None = None) -> float:
    """Magnitude of the Hochschild coboundary ``(b psi)(a_0..a_{n+1})``.

    ``products[j]`` stands for the truncated product ``a_j a_{j+1}`` for
    ``j = 0..n`` and ``products[n+1]`` for ``a_{n+1} a_0``. By default the
    matrix products of the arguments are used, for which the identity is
    exact up to rounding; passing compressions of the product symbols
    measures the truncation leakage instead.
    """
    n = cocycle.degree
    args = list(args)
    if len(args) != n + 2:
        raise ValueError(f"Hochschild check for degree {n} takes {n + 2} arguments")
    if products is None:
        products = [args[j] @ args[j + 1] for j in range(n + 1)] + [args[n + 1] @ args[0]]
    if len(products) != n + 2:
        raise ValueError("one product per adjacent pair is required")
    total = 0j
    for j in range(n + 1):
        total += (-1) ** j * evaluate(cocycle, args[:j] + [products[j]] + args[j + 2:])
    total += (-1) ** (n + 1) * evaluate(cocycle, [products[n + 1]] + args[1:n + 1])
    return float(abs(total))
