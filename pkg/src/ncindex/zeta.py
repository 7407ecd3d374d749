"""Zeta functions ``Tr(b |D|^-z)`` of truncated triples and residue estimates.

A truncated spectrum is finite, so every partial sum is entire. Poles
are recovered by adding a power-law tail for the discarded eigenvalues
and fitting a Laurent model along a ladder of points approaching the
pole. The tail model ``W(lam) ~ C lam^d`` for the weighted eigenvalue
staircase is fitted from the eigenvalues that are complete (every mode
with ``|lambda| <= Lambda`` is present), and contributes
``C d Lambda^(d - s) / (s - d)`` to the sum at exponent ``s``.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import DEFAULT, Tolerances
from .exceptions import ResidueFitError
from .linalg import BlockBanded, GradedOperator, as_dense, commutator, hermitian_eigen, matmul

__all__ = [
    "SpectralData",
    "TailModel",
    "ZetaProfile",
    "ResidueFit",
    "DEFAULT_LADDER",
    "spectral_data",
    "zeta_trace",
    "zeta_profile",
    "weyl_fit",
    "residue_estimate",
    "iterated_commutator",
    "cm_residue_term",
    "experimental_local_pairing",
    "profile_to_csv",
]

DEFAULT_LADDER = tuple(0.02 * 2.0 ** -j for j in range(6))


@dataclass(frozen=True)
class TailModel:
    coefficient: float
    exponent: float
    cutoff: float

    def value(self, s):
        if self.coefficient == 0 or not np.isfinite(self.cutoff):
            return 0.0 * s
        C, d, L = self.coefficient, self.exponent, self.cutoff
        return C * d * L ** (d - s) / (s - d)


@dataclass(frozen=True)
class SpectralData:
    """Nonzero ``|lambda|`` with the diagonal weights ``<v|b|v>``."""

    magnitudes: np.ndarray
    weights: np.ndarray
    zero_modes: int
    cutoff: float

    def partial_sum(self, s) -> complex:
        return complex(np.sum(self.weights * self.magnitudes ** (-complex(s))))


def _eigen(triple, tol):
    m = triple.dirac.matrix
    if isinstance(m, BlockBanded):
        if not m.is_block_diagonal:
            m = m.to_dense()
        else:
            blocks = m.diagonal_blocks()
            if m.d == 1:
                w = blocks[:, 0, 0].real
                return [(w[i:i + 1], np.ones((1, 1))) for i in range(w.size)], True
            return [hermitian_eigen(b, tol) for b in blocks], True
    return [hermitian_eigen(np.asarray(m), tol)], False


def _diagonal_weights(eig, blocked, b, d):
    if b is None:
        return np.concatenate([np.ones(w.size) for w, _ in eig])
    if blocked:
        if isinstance(b.matrix, BlockBanded):
            diag = b.matrix.diagonal_blocks()
        else:
            dense = as_dense(b.matrix)
            nb = dense.shape[0] // d
            diag = np.stack([dense[i * d:(i + 1) * d, i * d:(i + 1) * d] for i in range(nb)])
        if d == 1:
            return diag[:, 0, 0]
        return np.concatenate([np.einsum("ji,jk,ki->i", v.conj(), diag[i], v) for i, (_, v) in enumerate(eig)])
    _, v = eig[0]
    return np.einsum("ji,jk,ki->i", v.conj(), as_dense(b.matrix), v)


def complete_cutoff(triple) -> float:
    """Largest ``Lambda`` below which the truncated spectrum is complete."""
    if triple.finite_spectrum or not triple.cutoffs:
        return float("inf")
    return float(min(triple.cutoffs.values()))


def spectral_data(triple, b: GradedOperator | None = None, cutoff: float | None = None,
                  tol: Tolerances = DEFAULT) -> SpectralData:
    """Eigenvalue magnitudes of ``D`` up to ``cutoff`` and the weights of ``b``.

    ``cutoff`` defaults to the complete-spectrum bound. Zero modes are
    dropped and counted.
    """
    eig, blocked = _eigen(triple, tol)
    d = triple.dirac.matrix.d if blocked else None
    lam = np.concatenate([w for w, _ in eig])
    weights = _diagonal_weights(eig, blocked, b, d)
    L = complete_cutoff(triple) if cutoff is None else float(cutoff)
    scale = max(1.0, float(np.max(np.abs(lam)))) if lam.size else 1.0
    zero = np.abs(lam) < tol.kernel_rel * scale
    keep = ~zero & (np.abs(lam) <= L + 1e-9)
    return SpectralData(np.abs(lam[keep]), np.asarray(weights[keep], dtype=complex), int(zero.sum()), L)


def weyl_fit(data: SpectralData, lower_fraction: float = 0.25) -> TailModel:
    """Fit ``W(lam) = C lam^d`` to the weighted staircase on ``[f L, L]``."""
    L = data.cutoff
    if not np.isfinite(L) or data.magnitudes.size == 0:
        return TailModel(0.0, 0.0, L)
    order = np.argsort(data.magnitudes)
    lam = data.magnitudes[order]
    W = np.cumsum(np.real(data.weights[order]))
    levels = np.unique(lam)
    # staircase value at each distinct level, that level included
    idx = np.searchsorted(lam, levels, side="right") - 1
    Wl = W[idx]
    sign = 1.0 if Wl[-1] >= 0 else -1.0
    sel = (levels >= lower_fraction * L) & (sign * Wl > 0)
    if sel.sum() < 3:
        return TailModel(0.0, 0.0, L)
    slope, intercept = np.polyfit(np.log(levels[sel]), np.log(sign * Wl[sel]), 1)
    return TailModel(sign * float(np.exp(intercept)), float(slope), L)


@dataclass(frozen=True)
class ZetaProfile:
    sample_points: tuple[complex, ...]
    partial_sums: tuple[complex, ...]
    cutoff: float
    tail_model: TailModel
    zero_modes: int

    @property
    def corrected(self) -> tuple[complex, ...]:
        return tuple(v + self.tail_model.value(z) for z, v in zip(self.sample_points, self.partial_sums))


def zeta_trace(triple, b: GradedOperator | None, z: complex, kernel_policy: str = "drop_zero_modes",
               full_output: bool = False, tol: Tolerances = DEFAULT):
    """``sum_{lambda != 0} <v|b|v> |lambda|^-z`` over the truncated spectrum.

    ``b = None`` stands for the identity. With ``full_output`` a
    ``(value, zero_mode_count)`` pair is returned.
    """
    if kernel_policy != "drop_zero_modes":
        raise ValueError(f"unknown kernel policy {kernel_policy!r}")
    if np.real(z) <= 0:
        raise ValueError("zeta_trace needs Re(z) > 0")
    data = spectral_data(triple, b, cutoff=np.inf, tol=tol)
    value = data.partial_sum(z)
    return (value, data.zero_modes) if full_output else value


def zeta_profile(triple, b: GradedOperator | None, points: Sequence[complex],
                 tol: Tolerances = DEFAULT) -> ZetaProfile:
    data = spectral_data(triple, b, tol=tol)
    tail = weyl_fit(data)
    abscissa = tail.exponent
    if any(np.real(z) <= abscissa - 1e-9 and tail.coefficient for z in points):
        warnings.warn("sample points lie left of the estimated abscissa of convergence", stacklevel=2)
    sums = tuple(data.partial_sum(z) for z in points)
    return ZetaProfile(tuple(complex(z) for z in points), sums, data.cutoff, tail, data.zero_modes)


@dataclass(frozen=True)
class ResidueFit:
    residue: float
    coefficients: tuple[float, ...]
    residual: float
    diagnostics: dict = field(default_factory=dict, compare=False)


def _laurent_fit(deltas, values, pole_order, regular_terms=3, rel_tol=1e-6):
    deltas = np.asarray(deltas, dtype=float)
    values = np.asarray(values, dtype=complex)
    powers = list(range(-pole_order, regular_terms))
    A = np.stack([deltas ** p for p in powers], axis=1)
    if A.shape[0] < A.shape[1]:
        raise ResidueFitError("ladder is too short for the Laurent model",
                              {"points": A.shape[0], "terms": A.shape[1]})
    norms = np.linalg.norm(A, axis=0)
    scaled, *_ = np.linalg.lstsq((A / norms).astype(complex), values, rcond=None)
    coef = scaled / norms
    resid = float(np.max(np.abs(A @ coef - values))) if values.size else 0.0
    scale = max(1.0, float(np.max(np.abs(values))))
    if not np.all(np.isfinite(coef)) or resid > rel_tol * scale:
        raise ResidueFitError(f"Laurent fit did not converge (residual {resid:.3e})",
                              {"residual": resid, "coefficients": coef.tolist()})
    return coef, resid


def residue_estimate(profile: ZetaProfile, pole_location: float, snap: float = 0.05) -> ResidueFit:
    """Residue at ``s0`` from a fit of ``r/(s - s0) + c0 + c1 (s-s0) + c2 (s-s0)^2``.

    The profile must be sampled at ``s0 + delta_j`` for a ladder of
    ``delta_j > 0`` (see :data:`DEFAULT_LADDER`). A fitted tail exponent
    within ``snap`` (relative) of ``s0`` is pinned to ``s0``.
    """
    deltas = np.array([np.real(z) - pole_location for z in profile.sample_points])
    if np.any(deltas <= 0):
        raise ValueError("profile points must lie to the right of the pole")
    tail = profile.tail_model
    s0 = float(pole_location)
    if tail.coefficient and abs(tail.exponent - s0) < snap * max(1.0, s0):
        # the staircase exponent is only known to a few digits; a tail pole a
        # hair away from s0 would swamp the fit, so pin it to s0 and keep the
        # fitted count at the cutoff
        L = tail.cutoff
        tail = TailModel(tail.coefficient * L ** (tail.exponent - s0), s0, L)
    corrected = [v + tail.value(z) for z, v in zip(profile.sample_points, profile.partial_sums)]
    coef, resid = _laurent_fit(deltas, corrected, 1)
    return ResidueFit(float(np.real(coef[0])), tuple(float(np.real(c)) for c in coef), resid,
                      {"tail": tail, "zero_modes": profile.zero_modes})


def iterated_commutator(P, D_squared, k: int):
    """``P^(k)``: ``k`` nested commutators with ``D^2``."""
    out = P
    for _ in range(int(k)):
        out = commutator(D_squared, out)
    return out


def cm_residue_term(triple, args: Sequence[GradedOperator], k: Sequence[int], q: int = 0,
                    ladder: Sequence[float] = DEFAULT_LADDER, tol: Tolerances = DEFAULT) -> float:
    """``Res_{z=0} z^q Tr(a_0 [D,a_1]^(k_1) ... [D,a_n]^(k_n) |D|^-(2|k| + n + 2z))``.

    Only the inner half of the complete spectrum enters the sum, since
    compressed products are inexact near the cutoff; the remainder is
    covered by the fitted tail.
    """
    args = list(args)
    n = len(args) - 1
    k = [int(x) for x in k]
    if len(k) != n:
        raise ValueError(f"need one multi-index entry per commutator ({n}), got {len(k)}")
    if n < 1:
        raise ValueError("at least two arguments are required")
    D = triple.dirac.matrix
    D2 = matmul(D, D)
    X = args[0].matrix
    for a, kj in zip(args[1:], k):
        X = matmul(X, iterated_commutator(commutator(D, a.matrix), D2, kj))
    s0 = 2 * sum(k) + n
    L = complete_cutoff(triple)
    inner = L * tol.interior_fraction if np.isfinite(L) else L
    data = spectral_data(triple, GradedOperator(X) if not triple.graded else
                         _wrap_graded(X, triple.space), cutoff=inner, tol=tol)
    tail = weyl_fit(data)
    zs = np.asarray(ladder, dtype=float)
    values = np.array([data.partial_sum(s0 + 2 * z) + tail.value(s0 + 2 * z) for z in zs])
    if not np.any(np.abs(values) > 0):
        return 0.0
    coef, _ = _laurent_fit(zs, values, q + 1)
    return float(np.real(coef[0]))


def _wrap_graded(matrix, space):
    op = object.__new__(GradedOperator)
    object.__setattr__(op, "matrix", as_dense(matrix))
    object.__setattr__(op, "parity", "odd")
    object.__setattr__(op, "space", space)
    return op


def experimental_local_pairing(triple, loop, calibration=None, tol: Tolerances = DEFAULT) -> float:
    """Experimental degree-one local formula for the odd pairing.

    Uses the single residue term ``Res Tr(g^-1 [D, g] |D|^(-1-2z))``
    scaled by the calibrated constant. Only the degree-one term is
    assembled; the higher terms of the local formula are not.
    """
    from .calibration import load_table
    from .ktheory import loop_as_element

    table = load_table() if calibration is None else calibration
    g = loop_as_element(loop, triple, tol)
    gi = loop_as_element(loop.inverse(), triple, tol)
    return cm_residue_term(triple, [gi, g], [0], 0, tol=tol) / table.cm_constant


def profile_to_csv(profile: ZetaProfile) -> str:
    out = io.StringIO()
    out.write("z_re,z_im,re,im,cutoff,corrected_re,corrected_im\n")
    for z, v, c in zip(profile.sample_points, profile.partial_sums, profile.corrected):
        out.write(f"{z.real:.12e},{z.imag:.12e},{v.real:.12e},{v.imag:.12e},"
                  f"{profile.cutoff:.12e},{c.real:.12e},{c.imag:.12e}\n")
    return out.getvalue()
