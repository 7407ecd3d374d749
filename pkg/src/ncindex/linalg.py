"""Dense complex linear algebra on Z2-graded finite-dimensional spaces.

Two matrix backings are used throughout the package:

* plain ``numpy.ndarray`` (dense, square, complex);
* :class:`BlockBanded`, a block-Toeplitz-friendly layout for operators on
  ``C^{nb} (x) C^{d}`` that are banded in the first (circle-mode) factor.
  Truncated circle triples and products with the circle live here, which
  keeps the torus-times-circle scenarios within desk-scale memory.

The free functions :func:`matmul`, :func:`dagger`, :func:`trace` and
:func:`as_dense` accept either backing and promote mixed arguments to
dense.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, NamedTuple

import numpy as np

from .config import DEFAULT, Tolerances
from .exceptions import GradingError, KernelError, NotHermitianError, ParityError

__all__ = [
    "GradedSpace",
    "GradedOperator",
    "BlockBanded",
    "KernelCount",
    "matmul",
    "dagger",
    "trace",
    "trace_product",
    "commutator",
    "as_dense",
    "identity_like",
    "max_abs",
    "frobenius",
    "supertrace",
    "hermitian_eigen",
    "sign_operator",
    "svd_kernel_dim",
    "operator_norm",
]

log = logging.getLogger(__name__)

PARITIES = ("even", "odd", "ungraded")


# ---------------------------------------------------------------------------
# graded spaces and operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GradedSpace:
    """``H = H+ (+) H-`` with the canonical grading ``diag(+1.., -1..)``."""

    dim_plus: int
    dim_minus: int

    def __post_init__(self):
        if self.dim_plus < 0 or self.dim_minus < 0 or self.dim_plus + self.dim_minus <= 0:
            raise GradingError(f"invalid graded dimensions ({self.dim_plus}, {self.dim_minus})")

    @property
    def dim(self) -> int:
        return self.dim_plus + self.dim_minus

    @property
    def gamma_diagonal(self) -> np.ndarray:
        return np.concatenate([np.ones(self.dim_plus), -np.ones(self.dim_minus)])

    @property
    def gamma(self) -> np.ndarray:
        return np.diag(self.gamma_diagonal).astype(complex)

    def tensor(self, n: int) -> "GradedSpace":
        """The space ``H (x) C^n`` (internal factor innermost)."""
        return GradedSpace(self.dim_plus * n, self.dim_minus * n)


def _parity_of(matrix: np.ndarray, space: GradedSpace, atol: float) -> str | None:
    p = space.dim_plus
    scale = max(1.0, float(np.max(np.abs(matrix)))) if matrix.size else 1.0
    diag_part = max(_max(matrix[:p, :p]), _max(matrix[p:, p:]))
    off_part = max(_max(matrix[:p, p:]), _max(matrix[p:, :p]))
    if off_part <= atol * scale:
        return "even"
    if diag_part <= atol * scale:
        return "odd"
    return None


def _max(block):
    return float(np.max(np.abs(block))) if block.size else 0.0


class GradedOperator:
    """A square complex matrix with a parity tag.

    ``parity`` is ``"even"`` (commutes with the grading), ``"odd"``
    (anticommutes) or ``"ungraded"``. For graded operators the block
    structure is checked when the operator is built.
    """

    __slots__ = ("matrix", "parity", "space")

    def __init__(self, matrix, parity: str | None = None, space: GradedSpace | None = None,
                 atol: float = 1e-12):
        if not isinstance(matrix, BlockBanded):
            matrix = np.asarray(matrix, dtype=complex)
            if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
                raise ValueError(f"operator must be square, got shape {matrix.shape}")
            if not np.all(np.isfinite(matrix)):
                raise ValueError("operator has non-finite entries")
        if space is None:
            if parity not in (None, "ungraded"):
                raise ParityError(f"parity {parity!r} requires a graded space")
            parity = "ungraded"
        else:
            if matrix.shape[0] != space.dim:
                raise ValueError(f"matrix dimension {matrix.shape[0]} does not match space {space}")
            if isinstance(matrix, BlockBanded):
                raise ParityError("block-banded operators are only supported on ungraded spaces")
            found = _parity_of(matrix, space, atol)
            if parity is None:
                if found is None:
                    raise ParityError("matrix is neither even nor odd with respect to the grading")
                parity = found
            elif parity == "ungraded":
                raise ParityError("operator on a graded space must be 'even' or 'odd'")
            elif found != parity and _max(matrix) > 0:
                raise ParityError(f"matrix does not have parity {parity!r} (found {found!r})")
        if parity not in PARITIES:
            raise ParityError(f"unknown parity {parity!r}")
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "parity", parity)
        object.__setattr__(self, "space", space)

    def __setattr__(self, name, value):
        raise AttributeError("GradedOperator is immutable")

    def __repr__(self):
        return f"GradedOperator(dim={self.dim}, parity={self.parity!r})"

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def graded(self) -> bool:
        return self.space is not None

    @property
    def dense(self) -> np.ndarray:
        return as_dense(self.matrix)

    @property
    def H(self) -> "GradedOperator":
        return GradedOperator(dagger(self.matrix), self.parity, self.space)

    def __matmul__(self, other):
        if not isinstance(other, GradedOperator):
            return NotImplemented
        _check_same_space(self, other)
        if self.parity == "ungraded":
            parity = "ungraded"
        else:
            parity = "even" if self.parity == other.parity else "odd"
        return GradedOperator(matmul(self.matrix, other.matrix), parity, self.space)

    def __add__(self, other):
        if not isinstance(other, GradedOperator):
            return NotImplemented
        _check_same_space(self, other)
        if self.parity != other.parity:
            raise ParityError("cannot add operators of different parity")
        return GradedOperator(_add(self.matrix, other.matrix), self.parity, self.space)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __rmul__(self, scalar):
        return GradedOperator(scalar * self.matrix, self.parity, self.space)

    __mul__ = __rmul__

    def __neg__(self):
        return (-1.0) * self

    @classmethod
    def identity(cls, dim_or_space):
        if isinstance(dim_or_space, GradedSpace):
            return cls(np.eye(dim_or_space.dim, dtype=complex), "even", dim_or_space)
        return cls(np.eye(int(dim_or_space), dtype=complex))


def _check_same_space(a, b):
    if a.dim != b.dim or a.space != b.space:
        raise ParityError("operators act on different spaces")


# ---------------------------------------------------------------------------
# block-banded operators
# ---------------------------------------------------------------------------


class BlockBanded:
    """Operator on ``C^{nb} (x) C^{d}`` stored by block offset.

    ``bands[o][i]`` is the ``d x d`` block in block-row ``i + o`` and
    block-column ``i``; entries whose row falls outside ``0..nb-1`` are
    kept at zero. Instances are treated as immutable.
    """

    __array_priority__ = 1000

    def __init__(self, nb: int, d: int, bands: Mapping[int, np.ndarray]):
        self.nb = int(nb)
        self.d = int(d)
        clean = {}
        for o, arr in bands.items():
            o = int(o)
            if abs(o) >= self.nb:
                continue
            arr = np.asarray(arr, dtype=complex)
            if arr.shape != (self.nb, self.d, self.d):
                raise ValueError(f"band {o} has shape {arr.shape}, expected {(self.nb, self.d, self.d)}")
            clean[o] = arr
        self.bands = dict(sorted(clean.items()))

    # construction -----------------------------------------------------
    @classmethod
    def zeros(cls, nb, d):
        return cls(nb, d, {})

    @classmethod
    def identity(cls, nb, d):
        return cls(nb, d, {0: np.broadcast_to(np.eye(d, dtype=complex), (nb, d, d)).copy()})

    @classmethod
    def block_diagonal(cls, blocks):
        blocks = np.asarray(blocks, dtype=complex)
        return cls(blocks.shape[0], blocks.shape[1], {0: blocks})

    @classmethod
    def toeplitz(cls, nb: int, coefficients: Mapping[int, np.ndarray]):
        """Block-Toeplitz operator with constant block ``coefficients[o]`` on band ``o``."""
        bands = {}
        d = None
        for o, c in coefficients.items():
            c = np.atleast_2d(np.asarray(c, dtype=complex))
            d = c.shape[0]
            if abs(o) >= nb:
                continue
            arr = np.zeros((nb, d, d), dtype=complex)
            lo, hi = max(0, -o), min(nb, nb - o)
            arr[lo:hi] = c
            bands[int(o)] = arr
        if d is None:
            raise ValueError("at least one coefficient is required")
        return cls(nb, d, bands)

    @classmethod
    def from_dense(cls, matrix: np.ndarray, d: int, tol: float = 0.0):
        matrix = np.asarray(matrix, dtype=complex)
        n = matrix.shape[0]
        if n % d:
            raise ValueError("dimension is not a multiple of the block size")
        nb = n // d
        blocks = matrix.reshape(nb, d, nb, d).transpose(0, 2, 1, 3)  # [row, col]
        bands = {}
        for o in range(-nb + 1, nb):
            lo, hi = max(0, -o), min(nb, nb - o)
            cols = np.arange(lo, hi)
            sub = blocks[cols + o, cols]
            if sub.size and np.max(np.abs(sub)) > tol:
                arr = np.zeros((nb, d, d), dtype=complex)
                arr[lo:hi] = sub
                bands[o] = arr
        return cls(nb, d, bands)

    # basic properties -------------------------------------------------
    @property
    def shape(self):
        n = self.nb * self.d
        return (n, n)

    @property
    def offsets(self):
        return tuple(self.bands)

    @property
    def is_block_diagonal(self) -> bool:
        return all(o == 0 for o in self.bands)

    def band_limit(self) -> int:
        return max((abs(o) for o in self.bands), default=0)

    def diagonal_blocks(self) -> np.ndarray:
        return self.bands.get(0, np.zeros((self.nb, self.d, self.d), dtype=complex))

    def __repr__(self):
        return f"BlockBanded(nb={self.nb}, d={self.d}, offsets={list(self.bands)})"

    def to_dense(self) -> np.ndarray:
        nb, d = self.nb, self.d
        out = np.zeros((nb, nb, d, d), dtype=complex)
        for o, arr in self.bands.items():
            lo, hi = max(0, -o), min(nb, nb - o)
            cols = np.arange(lo, hi)
            out[cols + o, cols] = arr[lo:hi]
        return out.transpose(0, 2, 1, 3).reshape(nb * d, nb * d)

    # arithmetic -------------------------------------------------------
    def _check(self, other):
        if not isinstance(other, BlockBanded) or other.nb != self.nb or other.d != self.d:
            raise ValueError("incompatible block-banded operators")

    def __add__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        self._check(other)
        bands = {o: a.copy() for o, a in self.bands.items()}
        for o, b in other.bands.items():
            bands[o] = bands[o] + b if o in bands else b.copy()
        return BlockBanded(self.nb, self.d, bands)

    def __sub__(self, other):
        if isinstance(other, np.ndarray):
            return NotImplemented
        return self + (-1.0) * other

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return BlockBanded(self.nb, self.d, {o: scalar * a for o, a in self.bands.items()})

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / scalar)

    def __neg__(self):
        return (-1.0) * self

    def __matmul__(self, other):
        if not isinstance(other, BlockBanded):
            return NotImplemented
        self._check(other)
        nb = self.nb
        out: dict[int, np.ndarray] = {}
        for oa, a in self.bands.items():
            for ob, b in other.bands.items():
                o = oa + ob
                if abs(o) >= nb:
                    continue
                lo = max(0, -ob, -o)
                hi = min(nb, nb - ob, nb - o)
                if hi <= lo:
                    continue
                prod = np.matmul(a[lo + ob:hi + ob], b[lo:hi])
                if o not in out:
                    out[o] = np.zeros((nb, self.d, self.d), dtype=complex)
                out[o][lo:hi] += prod
        return BlockBanded(nb, self.d, out)

    @property
    def H(self) -> "BlockBanded":
        nb = self.nb
        out = {}
        for o, a in self.bands.items():
            arr = np.zeros_like(a)
            lo, hi = max(0, -o), min(nb, nb - o)
            arr[lo + o:hi + o] = np.conj(np.swapaxes(a[lo:hi], 1, 2))
            out[-o] = arr
        return BlockBanded(nb, self.d, out)

    def trace(self) -> complex:
        if 0 not in self.bands:
            return 0j
        return complex(np.trace(self.bands[0], axis1=1, axis2=2).sum())

    def max_abs(self) -> float:
        return max((float(np.max(np.abs(a))) for a in self.bands.values()), default=0.0)

    def frobenius(self) -> float:
        return float(np.sqrt(sum(np.sum(np.abs(a) ** 2) for a in self.bands.values())))

    def block_row_weights(self) -> np.ndarray:
        """Squared Frobenius norm carried by each block row."""
        nb = self.nb
        w = np.zeros(nb)
        for o, a in self.bands.items():
            lo, hi = max(0, -o), min(nb, nb - o)
            w[lo + o:hi + o] += np.sum(np.abs(a[lo:hi]) ** 2, axis=(1, 2))
        return w

    def map_blocks(self, func) -> "BlockBanded":
        """Apply ``func`` to every block of a block-diagonal operator."""
        if not self.is_block_diagonal:
            raise ValueError("map_blocks requires a block-diagonal operator")
        return BlockBanded.block_diagonal(np.stack([func(b) for b in self.diagonal_blocks()]))


# ---------------------------------------------------------------------------
# backing-agnostic helpers
# ---------------------------------------------------------------------------


def as_dense(m) -> np.ndarray:
    if isinstance(m, GradedOperator):
        m = m.matrix
    if isinstance(m, BlockBanded):
        return m.to_dense()
    return np.asarray(m, dtype=complex)


def _promote(a, b):
    if isinstance(a, BlockBanded) and isinstance(b, BlockBanded):
        return a, b
    return as_dense(a), as_dense(b)


def matmul(a, b):
    a, b = _promote(a, b)
    return a @ b


def _add(a, b):
    a, b = _promote(a, b)
    return a + b


def dagger(m):
    if isinstance(m, BlockBanded):
        return m.H
    return np.conj(np.asarray(m)).T


def trace(m) -> complex:
    if isinstance(m, BlockBanded):
        return m.trace()
    return complex(np.trace(m))


def trace_product(a, b) -> complex:
    """``Tr(a @ b)`` without forming the full product."""
    if isinstance(a, BlockBanded) and isinstance(b, BlockBanded):
        nb = a.nb
        total = 0j
        for ob, bb in b.bands.items():
            aa = a.bands.get(-ob)
            if aa is None:
                continue
            lo, hi = max(0, -ob), min(nb, nb - ob)
            total += complex(np.einsum("nij,nji->", aa[lo + ob:hi + ob], bb[lo:hi]))
        return total
    a, b = _promote(a, b)
    return complex(np.einsum("ij,ji->", a, b))


def commutator(a, b):
    a, b = _promote(a, b)
    return a @ b - b @ a


def identity_like(m):
    if isinstance(m, BlockBanded):
        return BlockBanded.identity(m.nb, m.d)
    return np.eye(m.shape[0], dtype=complex)


def max_abs(m) -> float:
    if isinstance(m, BlockBanded):
        return m.max_abs()
    m = np.asarray(m)
    return float(np.max(np.abs(m))) if m.size else 0.0


def frobenius(m) -> float:
    if isinstance(m, BlockBanded):
        return m.frobenius()
    return float(np.linalg.norm(m))


def operator_norm(m) -> float:
    if isinstance(m, BlockBanded) and m.is_block_diagonal:
        return float(max(np.linalg.norm(b, 2) for b in m.diagonal_blocks()))
    return float(np.linalg.norm(as_dense(m), 2))


# ---------------------------------------------------------------------------
# spectral operations
# ---------------------------------------------------------------------------


def supertrace(op: GradedOperator) -> complex:
    """``Tr(gamma M)`` for an operator on a graded space."""
    if not isinstance(op, GradedOperator) or not op.graded:
        raise GradingError("supertrace requires grading")
    d = np.diagonal(op.matrix)
    p = op.space.dim_plus
    return complex(d[:p].sum() - d[p:].sum())


def _hermitian_defect(m) -> float:
    return max_abs(m - dagger(m)) if isinstance(m, BlockBanded) else float(np.max(np.abs(m - m.conj().T)))


def hermitian_eigen(m, tol: Tolerances = DEFAULT):
    """Ascending eigenvalues and a unitary eigenvector matrix of a Hermitian matrix.

    Raises :class:`NotHermitianError` carrying the measured asymmetry when
    ``max |M - M*|`` exceeds ``tol.hermitian``.
    """
    if isinstance(m, GradedOperator):
        m = m.matrix
    m = as_dense(m)
    asym = _hermitian_defect(m) if m.size else 0.0
    if asym > tol.hermitian:
        raise NotHermitianError(asym, tol.hermitian)
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return w, v


def _kernel_threshold(eigs, threshold, tol):
    if threshold is not None:
        return threshold
    scale = float(np.max(np.abs(eigs))) if len(eigs) else 0.0
    return tol.kernel_rel * max(scale, 1.0)


def sign_operator(D, zero_convention: str = "plus_one", threshold: float | None = None,
                  tol: Tolerances = DEFAULT) -> GradedOperator:
    """``F = D / |D|`` through the eigendecomposition of ``D``.

    Eigenvalues with ``|lambda| < threshold`` (default
    ``tol.kernel_rel * ||D||``) form the kernel. Under ``"plus_one"`` the
    kernel is sent to ``+1``; for an odd operator on a graded space this
    would break ``gamma F = -F gamma``, so there the kernel is closed by an
    odd involution exchanging ``ker D+`` and ``ker D-`` instead (this needs
    ``dim ker D+ == dim ker D-``). ``"error"`` rejects any kernel.
    """
    if zero_convention not in ("plus_one", "error"):
        raise ValueError(f"unknown zero convention {zero_convention!r}")
    if not isinstance(D, GradedOperator):
        D = GradedOperator(D)
    m = D.matrix

    if isinstance(m, BlockBanded):
        if not m.is_block_diagonal:
            if m.shape[0] > tol.dense_limit:
                raise ValueError("sign of a non block-diagonal operator this large is not supported")
            m = m.to_dense()
        else:
            blocks = m.diagonal_blocks()
            eig = [hermitian_eigen(b, tol) for b in blocks]
            every = np.concatenate([w for w, _ in eig])
            thr = _kernel_threshold(every, threshold, tol)
            near = every[np.abs(every) < thr]
            if near.size and zero_convention == "error":
                raise KernelError(f"operator has {near.size} near-zero eigenvalues", near)
            fb = []
            for w, v in eig:
                s = np.where(w > -thr, 1.0, -1.0)
                f = (v * s) @ v.conj().T
                fb.append(0.5 * (f + f.conj().T))
            return GradedOperator(BlockBanded.block_diagonal(np.stack(fb)))

    w, v = hermitian_eigen(m, tol)
    thr = _kernel_threshold(w, threshold, tol)
    ker = np.abs(w) < thr
    if ker.any() and zero_convention == "error":
        raise KernelError(f"operator has {int(ker.sum())} near-zero eigenvalues: {w[ker]}", w[ker])
    s = np.sign(w)
    s[ker] = 1.0
    vr = v[:, ~ker]
    F = (vr * s[~ker]) @ vr.conj().T
    if ker.any():
        vk = v[:, ker]
        if D.graded and D.parity == "odd":
            F = F + _odd_kernel_involution(vk, D.space)
        else:
            F = F + vk @ vk.conj().T
    F = 0.5 * (F + F.conj().T)
    return GradedOperator(F, D.parity, D.space)


def _odd_kernel_involution(vk: np.ndarray, space: GradedSpace) -> np.ndarray:
    p = space.dim_plus
    plus = _orthonormal_columns(vk[:p])
    minus = _orthonormal_columns(vk[p:])
    if plus.shape[1] != minus.shape[1]:
        raise KernelError(
            f"cannot close a graded kernel with dim ker+ = {plus.shape[1]} != dim ker- = {minus.shape[1]}"
        )
    n = space.dim
    kp = np.zeros((n, plus.shape[1]), dtype=complex)
    km = np.zeros((n, minus.shape[1]), dtype=complex)
    kp[:p] = plus
    km[p:] = minus
    return km @ kp.conj().T + kp @ km.conj().T


def _orthonormal_columns(a: np.ndarray, rel: float = 1e-8) -> np.ndarray:
    if a.size == 0:
        return a[:, :0]
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    return u[:, s > rel * max(1.0, s.max() if s.size else 0.0)]


class KernelCount(NamedTuple):
    dim: int
    gap_ratio: float
    singular_values: np.ndarray


def svd_kernel_dim(m, threshold: float) -> KernelCount:
    """Dimension of the kernel of ``m`` viewed as a map on its columns.

    Singular values below ``threshold`` are discarded. ``gap_ratio`` is
    (largest discarded) / (smallest kept); it is 0 when nothing is
    discarded and ``inf`` when nothing is kept but something was discarded.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    m = as_dense(m)
    if m.size == 0:
        return KernelCount(m.shape[1] if m.ndim == 2 else 0, 0.0, np.zeros(0))
    s = np.linalg.svd(m, compute_uv=False)
    kept = s[s >= threshold]
    dropped = s[s < threshold]
    rank = kept.size
    if dropped.size == 0:
        ratio = 0.0
    elif kept.size == 0:
        ratio = float("inf") if dropped.max() > 0 else 0.0
    else:
        ratio = float(dropped.max() / kept.min())
    return KernelCount(m.shape[1] - rank, ratio, s)
