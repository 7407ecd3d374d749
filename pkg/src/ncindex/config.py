"""Numerical tolerances shared by every module.

All comparisons in the library read their thresholds from a
:class:`Tolerances` instance; ``DEFAULT`` is used unless a caller passes
its own.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

__all__ = ["Tolerances", "DEFAULT"]


@dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-10          # max |M - M*| entry accepted as Hermitian
    reconstruction: float = 1e-9      # relative Frobenius error of U L U*
    unitary: float = 1e-9             # max |g*g - 1| entry
    idempotent: float = 1e-9          # max |e^2 - e| entry
    partition: float = 1e-10          # |sum rho_i^2 - 1|
    cocycle: float = 1e-10            # transition cocycle residual
    kernel_rel: float = 1e-8          # kernel threshold relative to ||D||
    fourier_tail: float = 1e-12       # Fourier coefficients below this are dropped
    gap_ratio: float = 0.1            # max (largest discarded / smallest kept) singular value
    unreliable_defect: float = 0.1    # pairing defect above which a report is flagged
    gap_closure: float = 1e-6         # min |n| for two-band projectors
    flow_spacing_floor: float = 0.02  # level-spacing floor, as a fraction of the window
    flow_zero_shift: float = 1e-3     # relative u-shift when an eigenvalue sits on zero
    flow_max_evaluations: int = 4096
    interior_fraction: float = 0.5    # modes with |n| <= fraction * cutoff count as interior
    dense_limit: int = 6000           # largest dimension converted to a dense matrix

    def replace(self, **changes) -> "Tolerances":
        return replace(self, **changes)


DEFAULT = Tolerances()
