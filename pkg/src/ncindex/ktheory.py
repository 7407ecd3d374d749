"""K-theory representatives: unitary loops, loop families and idempotent fields.

Also holds the rational Chern-character component coefficients and the
embeddings of these classes into truncated triples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Callable, Mapping, Sequence

import numpy as np

from .config import DEFAULT, Tolerances
from .exceptions import CutoffError, NotIdempotentError, NotUnitaryError
from .fourier import circle_grid, coefficients_1d, coefficients_2d, evaluate_1d
from .linalg import BlockBanded, GradedOperator
from .triples import (
    SpectralTriple,
    compress_symbol,
    compress_torus_symbol,
)

__all__ = [
    "UnitaryLoop",
    "FamilyLoop",
    "Idempotent",
    "default_grid",
    "loop_from_winding",
    "loop_from_function",
    "bott_clutching_loop",
    "qwz_projector",
    "constant_projector",
    "miscenko_idempotent",
    "ch1_coefficients",
    "ch0_coefficients",
    "loop_as_element",
    "projector_as_element",
]


def default_grid(band: int) -> int:
    return 4 * int(band) + 16


def _unitary_defect(samples: np.ndarray) -> float:
    n = samples.shape[-1]
    gg = np.einsum("...ji,...jk->...ik", samples.conj(), samples)
    return float(np.max(np.abs(gg - np.eye(n)))) if samples.size else 0.0


# ---------------------------------------------------------------------------
# loops S^1 -> U(N)
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class UnitaryLoop:
    """A loop in ``U(N)`` held both as grid samples and Fourier coefficients.

    ``samples[j]`` is ``g(2 pi j / J)``; ``fourier[k]`` is the coefficient of
    ``exp(i k theta)``. ``tail`` records the largest Fourier coefficient
    discarded when the loop was built from samples.
    """

    samples: np.ndarray
    fourier: Mapping[int, np.ndarray]
    tail: float = 0.0
    tol: Tolerances = field(default=DEFAULT, repr=False)

    def __post_init__(self):
        s = self.samples
        if s.ndim != 3 or s.shape[1] != s.shape[2]:
            raise ValueError("samples must have shape (J, N, N)")
        defect = _unitary_defect(s)
        if defect > self.tol.unitary:
            raise NotUnitaryError(defect, self.tol.unitary)
        rebuilt = evaluate_1d(self.fourier, circle_grid(self.grid_size))
        mismatch = float(np.max(np.abs(rebuilt - s)))
        if mismatch > max(self.tol.unitary, 10 * self.tail * max(1, len(self.fourier))):
            raise ValueError(f"grid and Fourier data disagree by {mismatch:.3e}")

    @classmethod
    def from_fourier(cls, coefficients: Mapping[int, object], grid: int | None = None,
                     tol: Tolerances = DEFAULT) -> "UnitaryLoop":
        coeffs = {int(k): np.atleast_2d(np.asarray(c, dtype=complex)) for k, c in coefficients.items()}
        coeffs = {k: c for k, c in sorted(coeffs.items()) if np.any(c != 0)} or \
            {0: np.zeros_like(next(iter(coeffs.values())))}
        band = max(abs(k) for k in coeffs)
        J = default_grid(band) if grid is None else int(grid)
        if J <= 2 * band:
            raise ValueError(f"grid of {J} points cannot resolve band {band}")
        return cls(evaluate_1d(coeffs, circle_grid(J)), coeffs, 0.0, tol)

    @property
    def size(self) -> int:
        return self.samples.shape[1]

    @property
    def grid_size(self) -> int:
        return self.samples.shape[0]

    @property
    def grid(self) -> np.ndarray:
        return circle_grid(self.grid_size)

    @property
    def band(self) -> int:
        return max((abs(k) for k in self.fourier), default=0)

    def evaluate(self, theta) -> np.ndarray:
        theta = np.atleast_1d(theta)
        return evaluate_1d(self.fourier, theta)

    def inverse(self) -> "UnitaryLoop":
        """Pointwise inverse ``g(theta)^* ``, built coefficientwise."""
        coeffs = {-k: c.conj().T for k, c in self.fourier.items()}
        samples = np.conj(np.swapaxes(self.samples, 1, 2))
        return UnitaryLoop(samples, dict(sorted(coeffs.items())), self.tail, self.tol)

    def direct_sum(self, other: "UnitaryLoop") -> "UnitaryLoop":
        J = max(self.grid_size, other.grid_size)
        a, b = self._resample(J), other._resample(J)
        n1, n2 = a.size, b.size
        keys = sorted(set(a.fourier) | set(b.fourier))
        coeffs = {}
        for k in keys:
            c = np.zeros((n1 + n2, n1 + n2), dtype=complex)
            if k in a.fourier:
                c[:n1, :n1] = a.fourier[k]
            if k in b.fourier:
                c[n1:, n1:] = b.fourier[k]
            coeffs[k] = c
        samples = np.zeros((J, n1 + n2, n1 + n2), dtype=complex)
        samples[:, :n1, :n1] = a.samples
        samples[:, n1:, n1:] = b.samples
        return UnitaryLoop(samples, coeffs, max(a.tail, b.tail), self.tol)

    def _resample(self, J: int) -> "UnitaryLoop":
        if J == self.grid_size:
            return self
        return UnitaryLoop(evaluate_1d(self.fourier, circle_grid(J)), self.fourier, self.tail, self.tol)

    def conjugate(self, u) -> "UnitaryLoop":
        """``u g u*`` for a constant unitary ``u``."""
        u = np.asarray(u, dtype=complex)
        coeffs = {k: u @ c @ u.conj().T for k, c in self.fourier.items()}
        return UnitaryLoop(u @ self.samples @ u.conj().T, coeffs, self.tail, self.tol)


def loop_from_winding(windings: Sequence[int], constant_factor=None, grid: int | None = None,
                      tol: Tolerances = DEFAULT) -> UnitaryLoop:
    """``g(theta) = diag(e^{i k_1 theta}, ..., e^{i k_N theta}) u``."""
    ks = [int(k) for k in windings]
    if not ks:
        raise ValueError("at least one winding is required")
    n = len(ks)
    u = np.eye(n, dtype=complex) if constant_factor is None else np.asarray(constant_factor, dtype=complex)
    if u.shape != (n, n):
        raise ValueError("constant factor has the wrong size")
    defect = _unitary_defect(u[None])
    if defect > tol.unitary:
        raise NotUnitaryError(defect, tol.unitary)
    coeffs = {}
    for k in sorted(set(ks)):
        mask = np.array([kk == k for kk in ks], dtype=float)
        coeffs[k] = mask[:, None] * u
    return UnitaryLoop.from_fourier(coeffs, grid, tol)


def loop_from_function(func: Callable[[float], np.ndarray], grid: int,
                       tol: Tolerances = DEFAULT) -> UnitaryLoop:
    """Sample a smooth loop and keep its Fourier coefficients above the tail threshold."""
    J = int(grid)
    samples = np.stack([np.atleast_2d(np.asarray(func(t), dtype=complex)) for t in circle_grid(J)])
    all_coeffs = coefficients_1d(samples, tail=0.0)
    coeffs = {k: c for k, c in all_coeffs.items() if np.max(np.abs(c)) >= tol.fourier_tail}
    dropped = [np.max(np.abs(c)) for k, c in all_coeffs.items() if k not in coeffs]
    tail = float(max(dropped, default=0.0))
    highest = max(abs(k) for k in coeffs)
    if highest >= J // 2 - 1:
        raise ValueError(f"grid of {J} points does not resolve the loop (mode {highest} still significant)")
    return UnitaryLoop(samples, coeffs, tail, tol)


# ---------------------------------------------------------------------------
# fields over T^2
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Idempotent:
    """An idempotent-valued field sampled on a uniform grid of ``X``.

    ``matrix_field`` has shape ``(*base_grid, n, n)``; ``X`` is a point
    (empty grid), ``S^1`` (one axis) or ``T^2`` (two axes).
    """

    matrix_field: np.ndarray
    self_adjoint: bool = True
    tol: Tolerances = field(default=DEFAULT, repr=False)

    def __post_init__(self):
        e = self.matrix_field
        if e.ndim < 2 or e.shape[-1] != e.shape[-2]:
            raise ValueError("matrix field must end in a square matrix axis")
        sq = np.einsum("...ij,...jk->...ik", e, e)
        defect = float(np.max(np.abs(sq - e))) if e.size else 0.0
        if defect > self.tol.idempotent:
            raise NotIdempotentError(defect, self.tol.idempotent)
        if self.self_adjoint:
            asym = float(np.max(np.abs(e - np.conj(np.swapaxes(e, -1, -2))))) if e.size else 0.0
            if asym > self.tol.idempotent:
                raise NotIdempotentError(asym, self.tol.idempotent, "e - e*")

    @property
    def base_grid(self) -> tuple[int, ...]:
        return self.matrix_field.shape[:-2]

    @property
    def algebra_size(self) -> int:
        return self.matrix_field.shape[-1]

    def rank(self) -> int:
        tr = np.real(np.trace(self.matrix_field, axis1=-2, axis2=-1))
        return int(round(float(np.mean(tr))))

    def torus_coefficients(self, tol: Tolerances | None = None) -> tuple[np.ndarray, float]:
        """Centered Fourier coefficients over ``T^2`` and the discarded tail."""
        if len(self.base_grid) != 2:
            raise ValueError("torus coefficients need a field over T^2")
        t = (tol or self.tol).fourier_tail
        return coefficients_2d(self.matrix_field, tail=t)


def constant_projector(q, grid: tuple[int, int] = (16, 16), tol: Tolerances = DEFAULT) -> Idempotent:
    q = np.asarray(q, dtype=complex)
    return Idempotent(np.broadcast_to(q, tuple(grid) + q.shape).copy(), True, tol)


def qwz_projector(grid: int | tuple[int, int] = 96, m: float = 1.0,
                  tol: Tolerances = DEFAULT) -> Idempotent:
    """Lower band ``(1 - n.sigma)/2`` of the two-band model with
    ``n ~ (sin t1, sin t2, m - cos t1 - cos t2)``."""
    J1, J2 = (grid, grid) if np.isscalar(grid) else grid
    t1 = circle_grid(int(J1))[:, None]
    t2 = circle_grid(int(J2))[None, :]
    nx = np.sin(t1) + 0 * t2
    ny = np.sin(t2) + 0 * t1
    nz = m - np.cos(t1) - np.cos(t2)
    norm = np.sqrt(nx ** 2 + ny ** 2 + nz ** 2)
    if norm.min() < tol.gap_closure:
        raise ValueError(f"gap closes on the grid: min |n| = {norm.min():.3e}")
    nx, ny, nz = nx / norm, ny / norm, nz / norm
    e = np.empty(norm.shape + (2, 2), dtype=complex)
    e[..., 0, 0] = 0.5 * (1 - nz)
    e[..., 1, 1] = 0.5 * (1 + nz)
    e[..., 0, 1] = -0.5 * (nx - 1j * ny)
    e[..., 1, 0] = -0.5 * (nx + 1j * ny)
    return Idempotent(e, True, tol)


def miscenko_idempotent(partition: Sequence[np.ndarray], transitions: Mapping[tuple[int, int], np.ndarray],
                        tol: Tolerances = DEFAULT) -> Idempotent:
    """Block idempotent with ``(i, j)`` block ``rho_i rho_j g_ij``.

    ``partition[i]`` holds samples of ``rho_i`` on the base grid and
    ``transitions[(i, j)]`` samples of ``g_ij`` (shape ``(*grid, m, m)``);
    missing ``(i, i)`` entries default to the identity and missing
    ``(j, i)`` entries to the pointwise inverse of ``g_ij``. Transitions
    are only read where both ``rho_i`` and ``rho_j`` are nonzero.
    """
    rho = np.stack([np.asarray(r, dtype=float) for r in partition])
    r = rho.shape[0]
    defect = float(np.max(np.abs(np.sum(rho ** 2, axis=0) - 1)))
    if defect > tol.partition:
        raise ValueError(f"partition of unity defect {defect:.3e} exceeds {tol.partition:.1e}")
    grid = rho.shape[1:]
    sample = next(iter(transitions.values()), None)
    m = 1 if sample is None else np.asarray(sample).shape[-1]
    eye = np.broadcast_to(np.eye(m, dtype=complex), grid + (m, m))

    g = {}
    for (i, j), gij in transitions.items():
        g[(i, j)] = np.broadcast_to(np.asarray(gij, dtype=complex), grid + (m, m))
    for i in range(r):
        if (i, i) in g:
            resid = float(np.max(np.abs(g[(i, i)] - eye)))
            if resid > tol.cocycle:
                raise ValueError(f"g_{i}{i} differs from 1 by {resid:.3e}")
        g[(i, i)] = eye
    for i in range(r):
        for j in range(r):
            if (i, j) not in g and (j, i) in g:
                g[(i, j)] = np.linalg.inv(g[(j, i)])
    for i in range(r):
        for j in range(r):
            if (i, j) not in g:
                overlap = (rho[i] * rho[j]) != 0
                if overlap.any():
                    raise ValueError(f"missing transition g_{i}{j} on a nonempty overlap")
                g[(i, j)] = np.zeros(grid + (m, m), dtype=complex)

    worst = 0.0
    for i in range(r):
        for j in range(r):
            for k in range(r):
                where = (rho[i] * rho[j] * rho[k]) != 0
                if not where.any():
                    continue
                lhs = np.einsum("...ab,...bc->...ac", g[(i, j)], g[(j, k)])[where]
                worst = max(worst, float(np.max(np.abs(lhs - g[(i, k)][where]))))
    if worst > tol.cocycle:
        raise ValueError(f"cocycle condition g_ij g_jk = g_ik violated by {worst:.3e}")

    e = np.zeros(grid + (r * m, r * m), dtype=complex)
    for i in range(r):
        for j in range(r):
            e[..., i * m:(i + 1) * m, j * m:(j + 1) * m] = (rho[i] * rho[j])[..., None, None] * g[(i, j)]
    unitary = all(
        float(np.max(np.abs(np.einsum("...ji,...jk->...ik", np.conj(g[k]), g[k]) - eye))) <= tol.unitary
        for k in g if np.any(g[k])
    )
    return Idempotent(e, unitary, tol)


# ---------------------------------------------------------------------------
# loops over T^2 x S^1
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FamilyLoop:
    """A loop ``S^1 -> U(N)`` depending on a point of ``T^2``.

    ``circle_fourier[k]`` is the ``T^2`` field (shape ``(J1, J2, N, N)``)
    multiplying ``exp(i k theta)``.
    """

    circle_fourier: Mapping[int, np.ndarray]
    tol: Tolerances = field(default=DEFAULT, repr=False)

    def __post_init__(self):
        J = default_grid(self.band)
        defect = _unitary_defect(self.samples(J).reshape((-1, self.size, self.size)))
        if defect > self.tol.unitary:
            raise NotUnitaryError(defect, self.tol.unitary)

    @property
    def size(self) -> int:
        return next(iter(self.circle_fourier.values())).shape[-1]

    @property
    def base_grid(self) -> tuple[int, int]:
        return next(iter(self.circle_fourier.values())).shape[:2]

    @property
    def band(self) -> int:
        return max(abs(k) for k in self.circle_fourier)

    def samples(self, J: int) -> np.ndarray:
        """Values on ``base grid x circle grid``; shape ``(J1, J2, J, N, N)``."""
        th = circle_grid(J)
        out = 0
        for k, c in self.circle_fourier.items():
            out = out + np.exp(1j * k * th)[None, None, :, None, None] * c[:, :, None]
        return out

    def inverse(self) -> "FamilyLoop":
        return FamilyLoop({-k: np.conj(np.swapaxes(c, -1, -2)) for k, c in self.circle_fourier.items()},
                          self.tol)


def bott_clutching_loop(projector: Idempotent) -> FamilyLoop:
    """``g = e^{i theta} q + (1 - q)`` over the projector's base."""
    if not projector.self_adjoint:
        raise NotIdempotentError(float("nan"), projector.tol.idempotent, "e - e* (self-adjoint projector required)")
    q = projector.matrix_field
    if len(projector.base_grid) != 2:
        raise ValueError("the clutching construction is implemented for projectors over T^2")
    eye = np.eye(q.shape[-1])
    return FamilyLoop({0: eye - q, 1: q.copy()}, projector.tol)


# ---------------------------------------------------------------------------
# Chern character coefficients
# ---------------------------------------------------------------------------


def ch1_coefficients(k: int) -> Fraction:
    """Coefficient ``(-1)^k k!`` of the degree ``2k+1`` component of ``ch_1``."""
    if k < 0:
        raise ValueError("k must be non-negative")
    return Fraction((-1) ** k * factorial(k))


def ch0_coefficients(k: int) -> Fraction:
    """Coefficient ``1/k!`` of the ``2k`` component of ``ch_0``."""
    if k < 0:
        raise ValueError("k must be non-negative")
    return Fraction(1, factorial(k))


# ---------------------------------------------------------------------------
# embedding into triples
# ---------------------------------------------------------------------------


def loop_as_element(loop: UnitaryLoop | FamilyLoop, triple: SpectralTriple,
                    tol: Tolerances = DEFAULT) -> GradedOperator:
    """Compression of ``g`` onto a triple with a circle direction.

    For ``circle`` triples the loop size must equal the amplification. For
    ``product`` triples a plain loop acts as ``g (x) 1_base``-constant
    (its internal factor as the base amplification) and a
    :class:`FamilyLoop` acts through the compression of each coefficient
    field on the ``T^2`` base.
    """
    if "circle" not in triple.cutoffs:
        raise ValueError(f"triple of kind {triple.kind!r} has no circle direction")
    N = triple.cutoffs["circle"]
    if loop.band > N:
        raise CutoffError(f"loop band {loop.band} exceeds the circle cutoff {N}",
                          {"band": loop.band, "cutoff": N})
    if loop.size != triple.amplification:
        raise ValueError(f"loop size {loop.size} does not match the triple amplification {triple.amplification}")
    d = triple.dim // (2 * N + 1)
    if isinstance(loop, UnitaryLoop):
        rep = d // loop.size
        coeffs = {k: np.kron(np.eye(rep), c) for k, c in loop.fourier.items()}
        return compress_symbol(coeffs, N)
    base = triple.base
    if triple.kind != "product" or base is None or base.kind != "torus2":
        raise ValueError("family loops need a product of the torus triple with the circle")
    K = base.cutoffs["torus"]
    coeffs = {}
    for k, fieldk in loop.circle_fourier.items():
        c2, _ = coefficients_2d(fieldk, tail=tol.fourier_tail)
        T = compress_torus_symbol(c2, K)
        coeffs[k] = np.kron(np.eye(2), T)
    return GradedOperator(BlockBanded.toeplitz(2 * N + 1, coeffs))


def projector_as_element(projector: Idempotent, triple: SpectralTriple,
                         tol: Tolerances = DEFAULT) -> GradedOperator:
    """Compression of an idempotent field onto an even triple.

    Point-base idempotents become constants ``1 (x) e``; fields over
    ``T^2`` are compressed on ``torus2`` triples and act diagonally in the
    spinor factor.
    """
    if triple.parity != "even":
        raise ValueError("idempotents pair with even triples")
    if projector.algebra_size != triple.amplification:
        raise ValueError(f"idempotent size {projector.algebra_size} does not match the triple "
                         f"amplification {triple.amplification}")
    if projector.base_grid == ():
        return triple.constant_element(projector.matrix_field)
    if triple.kind != "torus2" or len(projector.base_grid) != 2:
        raise ValueError("function-valued idempotents are supported over T^2 on the torus triple")
    c2, _ = projector.torus_coefficients(tol)
    T = compress_torus_symbol(c2, triple.cutoffs["torus"])
    m = np.kron(np.eye(2), T)
    m = 0.5 * (m + m.conj().T) if projector.self_adjoint else m
    return GradedOperator(m, "even", triple.space)
