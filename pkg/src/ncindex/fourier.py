"""Fourier coefficients of sampled matrix-valued symbols on S^1 and T^2."""

from __future__ import annotations

import numpy as np

__all__ = ["coefficients_1d", "coefficients_2d", "evaluate_1d", "circle_grid"]


def circle_grid(J: int) -> np.ndarray:
    return 2 * np.pi * np.arange(J) / J


def coefficients_1d(samples: np.ndarray, tail: float = 1e-12) -> dict[int, np.ndarray]:
    """Coefficients ``c_j`` with ``f(theta) = sum_j c_j exp(i j theta)``.

    ``samples`` has shape ``(J, n, n)`` on the uniform grid. Coefficients
    whose largest entry is below ``tail`` are dropped.
    """
    samples = np.asarray(samples, dtype=complex)
    J = samples.shape[0]
    c = np.fft.fft(samples, axis=0) / J
    freqs = np.fft.fftfreq(J, 1.0 / J).astype(int)
    out = {}
    for j, f in enumerate(freqs):
        if np.max(np.abs(c[j])) >= tail:
            out[int(f)] = c[j]
    return dict(sorted(out.items()))


def evaluate_1d(coefficients: dict[int, np.ndarray], thetas: np.ndarray) -> np.ndarray:
    thetas = np.asarray(thetas, dtype=float)
    first = next(iter(coefficients.values()))
    out = np.zeros((thetas.size,) + np.shape(first), dtype=complex)
    for j, c in coefficients.items():
        out += np.exp(1j * j * thetas)[:, None, None] * c
    return out


def coefficients_2d(samples: np.ndarray, max_degree: int | None = None,
                    tail: float = 1e-12) -> tuple[np.ndarray, float]:
    """Centered coefficient array of a T^2 symbol.

    ``samples`` has shape ``(J1, J2, n, n)``. Returns ``(coeffs, dropped)``
    where ``coeffs[L + k1, L + k2]`` is the coefficient of
    ``exp(i (k1 t1 + k2 t2))`` and ``dropped`` is the largest coefficient
    magnitude that was cut off. ``L`` is the smallest degree beyond which
    every coefficient is below ``tail``, capped by ``max_degree`` and by the
    grid's Nyquist limit.
    """
    samples = np.asarray(samples, dtype=complex)
    J1, J2 = samples.shape[:2]
    c = np.fft.fft2(samples, axes=(0, 1)) / (J1 * J2)
    c = np.fft.fftshift(c, axes=(0, 1))
    k1 = np.arange(J1) - J1 // 2
    k2 = np.arange(J2) - J2 // 2
    mag = np.max(np.abs(c), axis=(2, 3))
    radius = np.maximum(np.abs(k1)[:, None], np.abs(k2)[None, :])
    significant = radius[mag >= tail]
    L = int(significant.max()) if significant.size else 0
    nyquist = min(J1, J2) // 2 - 1
    L = min(L, nyquist)
    if max_degree is not None:
        L = min(L, int(max_degree))
    keep1 = np.abs(k1) <= L
    keep2 = np.abs(k2) <= L
    dropped_mask = ~(keep1[:, None] & keep2[None, :])
    dropped = float(mag[dropped_mask].max()) if dropped_mask.any() else 0.0
    out = c[keep1][:, keep2]
    return out, dropped
