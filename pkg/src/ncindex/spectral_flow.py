"""Net eigenvalue zero-crossings along the path ``(1-u) D + u g^-1 D g``."""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .config import DEFAULT, Tolerances
from .exceptions import RefinementError
from .linalg import GradedOperator, as_dense

__all__ = ["Crossing", "FlowTrace", "flow", "trace_to_csv"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Crossing:
    u_left: float
    u_right: float
    direction: int
    interior_weight: float
    counted: bool


@dataclass
class FlowTrace:
    """Sampled path parameters, the tracked eigenvalues, and crossing events.

    ``spectra[i]`` holds the eigenvalues with ``|lambda| < window`` at
    ``grid[i]``. Crossings of branches living on the truncation boundary
    are kept for inspection but not counted in ``net``.
    """

    window: float
    grid: list[float] = field(default_factory=list)
    spectra: list[np.ndarray] = field(default_factory=list)
    crossings: list[Crossing] = field(default_factory=list)
    shifts: list[tuple[float, float]] = field(default_factory=list)
    evaluations: int = 0

    @property
    def net(self) -> int:
        return sum(c.direction for c in self.crossings if c.counted)

    @property
    def min_abs_eigenvalue(self) -> float:
        vals = [np.min(np.abs(s)) for s in self.spectra if s.size]
        return float(min(vals)) if vals else float("inf")


class _Path:
    def __init__(self, D0, D1, interior, window, tol):
        self.D0, self.D1 = D0, D1
        self.interior = interior
        self.window = window
        self.extended = 1.5 * window
        self.tol = tol
        self.zero = tol.kernel_rel * max(1.0, float(np.max(np.abs(D0))))
        self.evaluations = 0

    def eig(self, u):
        self.evaluations += 1
        if self.evaluations > self.tol.flow_max_evaluations:
            raise _Budget()
        M = (1 - u) * self.D0 + u * self.D1
        return np.linalg.eigh(M)


class _Budget(Exception):
    pass


def _state(path, u, w, v):
    keep = np.abs(w) < path.extended
    return {"u": u, "all": w, "vals": w[keep], "vecs": v[:, keep]}


def _spacing(all_vals, vals, floor):
    distinct = np.unique(np.round(all_vals, 9))
    out = np.empty(vals.size)
    for i, x in enumerate(vals):
        d = np.abs(distinct - x)
        d = d[d > 1e-9]
        out[i] = max(d.min() if d.size else np.inf, floor)
    return out


def _match(a, b, leave_cost):
    """Minimal-displacement pairing that may leave levels unmatched.

    Leaving a level unmatched costs ``leave_cost``, so levels drifting
    across the edge of the tracked set do not force a global shift.
    """
    na, nb = a["vals"].size, b["vals"].size
    if na == 0 or nb == 0:
        return []
    big = 1e18
    C = np.full((na + nb, nb + na), big)
    C[:na, :nb] = np.abs(a["vals"][:, None] - b["vals"][None, :])
    C[:na, nb:][np.diag_indices(na)] = leave_cost
    C[na:, :nb][np.diag_indices(nb)] = leave_cost
    C[na:, nb:] = 0.0
    rows, cols = linear_sum_assignment(C)
    return [(i, j) for i, j in zip(rows, cols) if i < na and j < nb]


def _resolved(path, a, b, pairs):
    spacing = _spacing(a["all"], a["vals"], path.tol.flow_spacing_floor * path.window)
    for i, j in pairs:
        la, lb = a["vals"][i], b["vals"][j]
        if min(abs(la), abs(lb)) >= path.window:
            continue
        if abs(lb - la) >= 0.25 * spacing[i]:
            return False
    core = lambda s: int(np.sum(np.abs(s["vals"]) < path.window))
    matched_core = sum(1 for i, j in pairs if min(abs(a["vals"][i]), abs(b["vals"][j])) < path.window)
    return matched_core >= min(core(a), core(b))


def flow(triple, g: GradedOperator, window: float = 1.5, initial_steps: int = 16,
         g_inv: GradedOperator | None = None, min_interior_weight: float = 0.5,
         tol: Tolerances = DEFAULT) -> FlowTrace:
    """Spectral flow of ``D_u = (1 - u) D + u g^-1 D g`` for ``u`` in ``[0, 1]``.

    ``g^-1`` defaults to ``g*``, which for a compressed loop is the
    compression of the pointwise inverse. Intervals are bisected until every
    tracked eigenvalue moves by less than a quarter of its local level
    spacing. A crossing is counted only if its eigenvector carries at least
    ``min_interior_weight`` of its mass in the triple's interior window;
    branches created by the truncation edge are recorded but ignored.
    """
    if triple.dim > tol.dense_limit:
        raise ValueError(f"dimension {triple.dim} is above the dense limit {tol.dense_limit}")
    D0 = as_dense(triple.dirac.matrix)
    G = as_dense(g.matrix)
    Gi = G.conj().T if g_inv is None else as_dense(g_inv.matrix)
    D1 = Gi @ D0 @ G
    D1 = 0.5 * (D1 + D1.conj().T)
    path = _Path(D0, D1, triple.interior_mask(tol=tol), float(window), tol)
    trace = FlowTrace(window=float(window))

    def evaluate(u, step):
        w, v = path.eig(u)
        if 0 < u < 1 and np.any(np.abs(w) < path.zero):
            shifted = min(u + tol.flow_zero_shift * step, 1.0)
            log.info("eigenvalue at zero for u=%.6g, shifting to %.6g", u, shifted)
            trace.shifts.append((u, shifted))
            u = shifted
            w, v = path.eig(u)
        return _state(path, u, w, v)

    try:
        grid = np.linspace(0.0, 1.0, int(initial_steps) + 1)
        states = [evaluate(u, grid[1]) for u in grid]
        done = [states[0]]
        pending = states[1:][::-1]
        while pending:
            a = done[-1]
            b = pending[-1]
            pairs = _match(a, b, 0.5 * (path.extended - path.window))
            step = b["u"] - a["u"]
            if not _resolved(path, a, b, pairs) and step > 1e-10:
                pending.append(evaluate(a["u"] + 0.5 * step, 0.5 * step))
                continue
            pending.pop()
            _record(trace, path, a, b, pairs, min_interior_weight)
            done.append(b)
    except _Budget:
        trace.evaluations = path.evaluations
        raise RefinementError(
            f"refinement budget of {tol.flow_max_evaluations} evaluations exhausted", trace) from None

    trace.grid = [s["u"] for s in done]
    trace.spectra = [s["vals"][np.abs(s["vals"]) < path.window] for s in done]
    trace.evaluations = path.evaluations
    return trace


def _record(trace, path, a, b, pairs, min_weight):
    z = path.zero
    for i, j in pairs:
        la, lb = a["vals"][i], b["vals"][j]
        sa, sb = la > -z, lb > -z
        if sa == sb:
            continue
        # endpoint kernels can mix interior and edge modes, so read the
        # eigenvector on the side of the interval that is not an endpoint
        if b["u"] >= 1.0:
            use_a = True
        elif a["u"] <= 0.0:
            use_a = False
        else:
            use_a = abs(la) < abs(lb)
        vec = a["vecs"][:, i] if use_a else b["vecs"][:, j]
        weight = float(np.sum(np.abs(vec[path.interior]) ** 2))
        trace.crossings.append(Crossing(float(a["u"]), float(b["u"]), 1 if sb else -1,
                                        weight, weight >= min_weight))


def trace_to_csv(trace: FlowTrace) -> str:
    """Rows ``u, lambda_1..lambda_w`` followed by a crossing-event table."""
    width = max((s.size for s in trace.spectra), default=0)
    out = io.StringIO()
    out.write(",".join(["u"] + [f"lambda_{i + 1}" for i in range(width)]) + "\n")
    if width == 0:
        return out.getvalue()
    for u, s in zip(trace.grid, trace.spectra):
        cells = [_fmt(u)] + [_fmt(x) for x in np.sort(s)] + [""] * (width - s.size)
        out.write(",".join(cells) + "\n")
    out.write("\n")
    out.write("u_left,u_right,direction,interior_weight,counted\n")
    for c in trace.crossings:
        out.write(f"{_fmt(c.u_left)},{_fmt(c.u_right)},{c.direction:d},{_fmt(c.interior_weight)},"
                  f"{int(c.counted)}\n")
    return out.getvalue()


def _fmt(x: float) -> str:
    return f"{x:.12e}"
