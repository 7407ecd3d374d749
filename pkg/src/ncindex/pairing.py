"""Integer pairings of K-theory classes with Chern characters.

The odd pairing of a loop ``g`` with an odd triple sums, per odd degree
``n = 2k+1``, the component ``(-1)^k k! phi_n(g^-1, g, ..., g^-1, g)``.
Each single-degree value is already the full pairing; the report keeps
them all (``single_degree``) and exposes the periodic representative
whose components telescope (``per_degree``): the lowest admissible
degree carries its value and each higher degree carries the change it
introduces, so ``total`` is the value at ``max_degree`` and the
higher-degree entries measure degree stability directly.

The even pairing of an idempotent ``e`` with an even triple is treated the
same way with the components ``(2k)!/k! phi_2k(e, ..., e)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .calibration import CalibrationTable, load_table
from .cocycles import MAX_DEGREE, even_normalization, phi_from_tau
from .config import DEFAULT, Tolerances
from .exceptions import ParityError, UnreliableResultWarning
from .ktheory import (
    FamilyLoop,
    Idempotent,
    UnitaryLoop,
    ch0_coefficients,
    ch1_coefficients,
    loop_as_element,
    projector_as_element,
)
from .linalg import BlockBanded, GradedOperator, commutator, matmul, sign_operator, trace_product
from .triples import SpectralTriple, check_circle_cutoff, matrix_amplify, product_with_circle

__all__ = ["PairingReport", "odd_pairing", "even_pairing", "anomaly_integral", "lowest_degree"]


@dataclass(frozen=True)
class PairingReport:
    kind: str
    per_degree: dict[int, complex]
    single_degree: dict[int, complex]
    total: complex
    nearest_integer: int
    defect: float
    quality: float
    cutoffs: dict
    status: str = "ok"
    notes: tuple[str, ...] = field(default=())

    @classmethod
    def build(cls, kind, single, quality, cutoffs, tol: Tolerances, notes=()):
        degrees = sorted(single)
        per = {degrees[0]: single[degrees[0]]}
        for lo, hi in zip(degrees, degrees[1:]):
            per[hi] = single[hi] - single[lo]
        total = complex(sum(per.values()))
        nearest = int(np.rint(total.real))
        defect = float(abs(total - nearest))
        status = "ok"
        notes = tuple(notes)
        if defect > tol.unreliable_defect:
            status = "unreliable"
            msg = f"{kind} pairing total {total:.6g} is {defect:.3g} away from an integer"
            notes = notes + (msg,)
            warnings.warn(msg, UnreliableResultWarning, stacklevel=3)
        return cls(kind, per, dict(single), total, nearest, defect, float(quality), dict(cutoffs),
                   status, notes)

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(sorted(self.per_degree))

    @property
    def reliable(self) -> bool:
        return self.status == "ok"

    def extra_contribution(self, degree: int) -> float:
        """Magnitude of the component a degree adds on top of the lower ones."""
        return float(abs(self.per_degree[degree])) if degree != self.degrees[0] else 0.0


def lowest_degree(triple: SpectralTriple, parity: str) -> int:
    start = 1 if parity == "odd" else 0
    for n in range(start, MAX_DEGREE + 1, 2):
        if triple.degree_admissible(n):
            return n
    raise ValueError(f"no admissible {parity} degree up to {MAX_DEGREE} for this triple")


def _degree_range(triple, parity, max_degree):
    lo = lowest_degree(triple, parity)
    hi = lo if max_degree is None else int(max_degree)
    if (hi % 2 == 1) != (parity == "odd"):
        raise ValueError(f"max_degree {hi} has the wrong parity for an {parity} pairing")
    if hi > MAX_DEGREE:
        raise ValueError(f"max_degree {hi} exceeds the supported cap {MAX_DEGREE}")
    if hi < lo:
        raise ValueError(f"max_degree {hi} is below the summability threshold (lowest admissible: {lo})")
    return list(range(lo, hi + 1, 2))


def _row_weights(m) -> np.ndarray:
    if isinstance(m, BlockBanded):
        w = np.zeros((m.nb, m.d))
        for o, a in m.bands.items():
            lo, hi = max(0, -o), min(m.nb, m.nb - o)
            w[lo + o:hi + o] += np.sum(np.abs(a[lo:hi]) ** 2, axis=2)
        return w.ravel()
    return np.sum(np.abs(np.asarray(m)) ** 2, axis=1)


def leakage(triple: SpectralTriple, *commutators) -> float:
    """Largest fraction of a commutator's weight sitting on the outermost shell."""
    edge = triple.boundary_mask()
    worst = 0.0
    for c in commutators:
        w = _row_weights(c)
        total = w.sum()
        if total > 0:
            worst = max(worst, float(w[edge].sum() / total))
    return worst


def odd_pairing(triple: SpectralTriple, loop: UnitaryLoop | FamilyLoop, max_degree: int | None = None,
                calibration: CalibrationTable | None = None, F: GradedOperator | None = None,
                tol: Tolerances = DEFAULT) -> PairingReport:
    """Pairing of ``[g]`` with the Chern character of an odd triple.

    ``max_degree`` defaults to the lowest degree allowed by summability.
    Raises :class:`~ncindex.exceptions.CutoffError` when the circle cutoff
    is too small for the loop's band at ``max_degree``.
    """
    if triple.parity != "odd":
        raise ParityError("odd_pairing needs an odd triple")
    degrees = _degree_range(triple, "odd", max_degree)
    check_circle_cutoff(triple, loop.band, degrees[-1])
    table = load_table() if calibration is None else calibration
    g = loop_as_element(loop, triple, tol)
    gi = loop_as_element(loop.inverse(), triple, tol)
    F = sign_operator(triple.dirac, tol=tol) if F is None else F
    f = F.matrix
    A = commutator(f, gi.matrix)
    B = commutator(f, g.matrix)
    single = {}
    M = matmul(f, A)
    for n in range(1, degrees[-1] + 1, 2):
        if n in degrees:
            raw = trace_product(M, B)
            k = n // 2
            psi = table.odd_normalization(n) * raw
            single[n] = complex(float(ch1_coefficients(k)) * phi_from_tau(n, psi))
        if n + 2 <= degrees[-1]:
            M = matmul(matmul(M, B), A)
    return PairingReport.build("odd", single, leakage(triple, A, B), triple.cutoffs, tol)


def even_pairing(triple: SpectralTriple, e: Idempotent | GradedOperator, max_degree: int | None = None,
                 calibration: CalibrationTable | None = None, F: GradedOperator | None = None,
                 tol: Tolerances = DEFAULT) -> PairingReport:
    """Index pairing of ``[e]`` with the Chern character of an even triple."""
    if triple.parity != "even":
        raise ParityError("even_pairing needs an even triple")
    degrees = _degree_range(triple, "even", max_degree)
    table = load_table() if calibration is None else calibration
    E = projector_as_element(e, triple, tol) if isinstance(e, Idempotent) else e
    if not E.graded or E.parity != "even":
        raise ParityError("the idempotent must act as an even operator")
    F = sign_operator(triple.dirac, tol=tol) if F is None else F
    f = np.asarray(F.matrix)
    C = commutator(f, np.asarray(E.matrix))
    gamma = F.space.gamma_diagonal
    single = {}
    M = f  # F C^n
    for n in range(0, degrees[-1] + 1, 2):
        if n in degrees:
            raw = complex(np.einsum("i,ij,ji->", gamma, M, C))
            k = n // 2
            tau = float(even_normalization(n)) * raw
            weight = factorial(n) * float(ch0_coefficients(k))
            single[n] = complex(table.even_sign(n) * weight * phi_from_tau(n, tau))
        if n + 2 <= degrees[-1]:
            M = M @ C @ C
    cutoffs = dict(triple.cutoffs)
    return PairingReport.build("even", single, leakage(triple, C), cutoffs, tol)


def anomaly_integral(base_even_triple: SpectralTriple, loop: UnitaryLoop | FamilyLoop, circle_cutoff: int,
                     max_degree: int | None = None, calibration: CalibrationTable | None = None,
                     tol: Tolerances = DEFAULT) -> PairingReport:
    """Odd pairing of ``loop`` with ``product_with_circle(base, circle_cutoff)``.

    A base with trivial amplification is amplified to the loop size first.
    """
    if base_even_triple.parity != "even":
        raise ParityError("the base triple must be even")
    base = base_even_triple
    if loop.size != base.amplification:
        if base.amplification != 1:
            raise ValueError("loop size does not match the base amplification")
        base = matrix_amplify(base, loop.size)
    product = product_with_circle(base, circle_cutoff)
    return odd_pairing(product, loop, max_degree, calibration, tol=tol)
