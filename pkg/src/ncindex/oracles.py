"""Brute-force integer references.

Each oracle works from raw samples or matrices with plain numpy and the
``linalg`` helpers only; none of them touches the cocycle or pairing code,
so they can be used to check it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT, Tolerances
from .exceptions import KernelError, NumericalQualityError
from .linalg import GradedOperator, as_dense, hermitian_eigen, svd_kernel_dim

__all__ = ["OracleResult", "winding_quadrature", "toeplitz_index", "kernel_index", "berry_chern"]


@dataclass(frozen=True)
class OracleResult:
    value: int
    raw: float
    method: str
    defect: float
    diagnostics: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_raw(cls, raw: complex, method: str, **diagnostics) -> "OracleResult":
        value = int(np.rint(np.real(raw)))
        defect = float(abs(raw - value))
        if defect >= 0.5:
            raise NumericalQualityError(f"{method}: raw value {raw} is not near an integer",
                                        {"raw": raw, **diagnostics})
        return cls(value, float(np.real(raw)), method, defect, diagnostics)


def winding_quadrature(loop) -> OracleResult:
    """``(1/2 pi i) \\oint tr(g^-1 g')`` by the trapezoid rule on the loop's grid.

    The derivative is spectral, computed from the samples themselves.
    """
    s = np.asarray(loop.samples, dtype=complex)
    J = s.shape[0]
    if J < 4 * loop.band:
        raise ValueError(f"grid of {J} points is too coarse for band {loop.band}")
    k = np.fft.fftfreq(J, 1.0 / J)
    if J % 2 == 0:
        k[J // 2] = 0.0
    ds = np.fft.ifft(1j * k[:, None, None] * np.fft.fft(s, axis=0), axis=0)
    integrand = np.trace(np.linalg.solve(s, ds), axis1=1, axis2=2)
    raw = integrand.sum() * (2 * np.pi / J) / (2j * np.pi)
    return OracleResult.from_raw(complex(raw), "winding_quadrature", grid=J)


def _sample_coefficients(samples: np.ndarray, tail: float) -> dict[int, np.ndarray]:
    J = samples.shape[0]
    c = np.fft.fft(samples, axis=0) / J
    freqs = np.fft.fftfreq(J, 1.0 / J).astype(int)
    return {int(f): c[i] for i, f in enumerate(freqs) if np.max(np.abs(c[i])) >= tail}


def _half_toeplitz(coeffs, rows: int, cols: int, n: int) -> np.ndarray:
    T = np.zeros((rows, n, cols, n), dtype=complex)
    for j, c in coeffs.items():
        for col in range(cols):
            row = col + j
            if 0 <= row < rows:
                T[row, :, col, :] = c
    return T.reshape(rows * n, cols * n)


def toeplitz_index(loop, cutoff: int, tol: Tolerances = DEFAULT) -> OracleResult:
    """``dim ker T_g - dim ker T_{g^-1}`` for Hardy-space Toeplitz operators.

    ``T_g`` is compressed from modes ``0..N-b`` to ``0..N`` so the image of
    every retained column is captured exactly; a kernel vector of the
    rectangular compression is then a genuine kernel vector.
    """
    s = np.asarray(loop.samples, dtype=complex)
    coeffs = _sample_coefficients(s, tol.fourier_tail)
    band = max(abs(j) for j in coeffs)
    N = int(cutoff)
    if N < 2 * band + 4:
        raise ValueError(f"cutoff {N} is below 2*band + 4 = {2 * band + 4}")
    n = s.shape[1]
    inverse = {-j: c.conj().T for j, c in coeffs.items()}
    dims, ratios = [], []
    for cf in (coeffs, inverse):
        T = _half_toeplitz(cf, N + 1, N - band + 1, n)
        thr = 1e-8 * max(1.0, np.linalg.norm(T, 2))
        kc = svd_kernel_dim(T, thr)
        dims.append(kc.dim)
        ratios.append(kc.gap_ratio)
    if max(ratios) > tol.gap_ratio:
        raise KernelError(f"Toeplitz kernel count unstable, gap ratios {ratios}")
    return OracleResult.from_raw(dims[0] - dims[1], "toeplitz_index", cutoff=N,
                                 kernel=dims[0], cokernel=dims[1], gap_ratio=max(ratios))


def kernel_index(triple, e: GradedOperator, tol: Tolerances = DEFAULT) -> OracleResult:
    """Index of ``e D+ e : e H+ -> e H-`` on an even truncated triple.

    On a finite truncation ``e H+`` and ``e H-`` have equal dimension, so
    the bare count is zero: every genuine zero mode has a partner stuck at
    the truncation edge. Each near-zero singular pair is therefore weighted
    by how much of its right and left vectors lies in the interior window,
    which separates the physical modes from the edge partners.
    """
    if not e.graded or e.parity != "even":
        raise ValueError("kernel_index needs an even operator on the triple's graded space")
    D = as_dense(triple.dirac.matrix)
    p = triple.space.dim_plus
    E = as_dense(e.matrix)
    Eh = 0.5 * (E + E.conj().T)
    wp, vp = hermitian_eigen(Eh[:p, :p], tol)
    wm, vm = hermitian_eigen(Eh[p:, p:], tol)
    Vp = vp[:, wp > 0.5]
    Vm = vm[:, wm > 0.5]
    if Vp.shape[1] == 0 and Vm.shape[1] == 0:
        return OracleResult.from_raw(0.0, "kernel_index", rank=0)
    A = Vm.conj().T @ D[p:, :p] @ Vp
    thr = tol.kernel_rel * max(1.0, float(np.max(np.abs(D))))
    U, sv, Wh = np.linalg.svd(A)
    kc = svd_kernel_dim(A, thr)
    if kc.gap_ratio > tol.gap_ratio:
        raise KernelError(f"kernel count unreliable: gap ratio {kc.gap_ratio:.3e}", sv[sv < thr])
    inside = triple.interior_mask(tol=tol)
    in_plus, in_minus = inside[:p], inside[p:]
    raw = 0.0
    # right null vectors: the last columns of W beyond the rank
    rank = int(np.sum(sv >= thr))
    right = Vp @ Wh.conj().T[:, rank:]
    left = Vm @ U[:, rank:]
    raw += float(np.sum(np.abs(right[in_plus]) ** 2))
    raw -= float(np.sum(np.abs(left[in_minus]) ** 2))
    return OracleResult.from_raw(raw, "kernel_index", kernel_plus=right.shape[1],
                                 kernel_minus=left.shape[1], gap_ratio=kc.gap_ratio,
                                 smallest_kept=float(sv[rank - 1]) if rank else 0.0)


def berry_chern(projector, min_overlap: float = 1e-10) -> OracleResult:
    """Chern number of a projector field over ``T^2`` from plaquette phases.

    Uses the counterclockwise plaquette ``(i,j) -> (i+1,j) -> (i+1,j+1) ->
    (i,j+1)`` and determinants of frame overlaps, so any fixed rank works.
    """
    e = np.asarray(projector.matrix_field, dtype=complex)
    if e.ndim != 4:
        raise ValueError("berry_chern needs a projector field over T^2")
    J1, J2, n, _ = e.shape
    if min(J1, J2) < 16:
        raise ValueError("grid must be at least 16 x 16")
    tr = np.real(np.trace(e, axis1=2, axis2=3))
    r = int(np.rint(tr.mean()))
    if r == 0:
        return OracleResult.from_raw(0.0, "berry_chern", rank=0)
    w, v = np.linalg.eigh(0.5 * (e + np.conj(np.swapaxes(e, -1, -2))))
    frames = v[..., -r:]

    def link(a, b):
        return np.linalg.det(np.einsum("...ji,...jk->...ik", np.conj(a), b))

    f00 = frames
    f10 = np.roll(frames, -1, axis=0)
    f11 = np.roll(f10, -1, axis=1)
    f01 = np.roll(frames, -1, axis=1)
    loops = [link(f00, f10), link(f10, f11), link(f11, f01), link(f01, f00)]
    smallest = float(min(np.min(np.abs(x)) for x in loops))
    if smallest < min_overlap:
        raise NumericalQualityError(f"plaquette overlap vanishes ({smallest:.3e}); gap closes on the grid",
                                    {"min_overlap": smallest})
    phase = np.angle(loops[0] * loops[1] * loops[2] * loops[3])
    raw = phase.sum() / (2 * np.pi)
    return OracleResult.from_raw(raw, "berry_chern", rank=r, grid=(J1, J2), min_overlap=smallest)
