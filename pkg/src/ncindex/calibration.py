"""The frozen calibration table.

The table fixes the odd cocycle normalizations, the per-degree signs of
the even pairing and the orientation conventions relating the pairing to
each oracle. It is produced by :func:`compute_table` from oracle runs on
small model triples and shipped as ``data/calibration.json`` together
with a SHA-256 checksum of its canonical JSON content.

``NCINDEX_CALIBRATION`` overrides the location of the table.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from functools import lru_cache
from math import factorial
from pathlib import Path

import numpy as np

from . import __version__
from .config import DEFAULT, Tolerances
from .exceptions import CalibrationError, ChecksumError

__all__ = [
    "CalibrationTable",
    "compute_table",
    "load_table",
    "write_table",
    "table_bytes",
    "default_path",
    "ENV_VAR",
]

ENV_VAR = "NCINDEX_CALIBRATION"
ODD_DEGREES = (1, 3, 5)
EVEN_DEGREES = (0, 2, 4)
_AGREEMENT = 1e-6


@dataclass(frozen=True)
class CalibrationTable:
    content: dict
    checksum: str

    def odd_normalization(self, n: int) -> float:
        try:
            return float(self.content["odd_normalization"][str(n)]["measured"])
        except KeyError:
            raise CalibrationError(f"no odd normalization calibrated for degree {n}") from None

    def even_sign(self, n: int) -> int:
        try:
            return int(self.content["even_sign"][str(n)])
        except KeyError:
            raise CalibrationError(f"no even sign calibrated for degree {n}") from None

    def sign(self, name: str) -> int:
        return int(self.content["signs"][name])

    @property
    def cm_constant(self) -> float:
        return float(self.content["cm_residue_constant"])

    @property
    def short_checksum(self) -> str:
        return self.checksum[:16]


def _canonical(content: dict) -> bytes:
    return json.dumps(content, sort_keys=True, separators=(",", ":")).encode()


def _checksum(content: dict) -> str:
    return hashlib.sha256(_canonical(content)).hexdigest()


def default_path() -> Path:
    env = os.environ.get(ENV_VAR)
    if env:
        return Path(env)
    return Path(__file__).with_name("data") / "calibration.json"


def table_bytes(table: CalibrationTable) -> bytes:
    doc = {"checksum": table.checksum, "content": table.content}
    return (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode()


def write_table(table: CalibrationTable, path: str | os.PathLike | None = None) -> Path:
    path = default_path() if path is None else Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(table_bytes(table))
    return path


def load_table(path: str | os.PathLike | None = None) -> CalibrationTable:
    """Read and verify a table; raises :class:`ChecksumError` on tampering."""
    path = default_path() if path is None else Path(path)
    try:
        st = path.stat()
    except OSError as exc:
        raise ChecksumError(f"calibration table {path} is unreadable: {exc}") from exc
    return _load(str(path.resolve()), st.st_mtime_ns, st.st_size)


@lru_cache(maxsize=8)
def _load(path: str, mtime: int, size: int) -> CalibrationTable:
    try:
        doc = json.loads(Path(path).read_text())
        content, stored = doc["content"], doc["checksum"]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ChecksumError(f"calibration table {path} is unreadable: {exc}") from exc
    actual = _checksum(content)
    if actual != stored:
        raise ChecksumError(f"calibration table {path} fails its checksum "
                            f"(stored {stored[:16]}, computed {actual[:16]})")
    return CalibrationTable(content, stored)


def _provisional(odd: dict, even: dict) -> CalibrationTable:
    content = {
        "odd_normalization": {str(n): {"measured": v} for n, v in odd.items()},
        "even_sign": {str(n): s for n, s in even.items()},
        "cm_residue_constant": 1.0,
    }
    return CalibrationTable(content, "")


def _integer(x: complex, what: str) -> int:
    n = int(np.rint(np.real(x)))
    if abs(x - n) > 0.05:
        raise CalibrationError(f"{what}: {x} is not near an integer")
    return n


def _ratio(a: int, b: int, what: str) -> int:
    if a == 0 or b == 0 or abs(a) != abs(b):
        raise CalibrationError(f"{what}: values {a} and {b} are not related by a sign")
    return 1 if a == b else -1


def compute_table(tol: Tolerances = DEFAULT) -> CalibrationTable:
    """Recompute every calibrated constant from the oracles.

    Raises :class:`CalibrationError` when the oracles disagree with each
    other or with the calibrated pairing on a check scenario.
    """
    from .cocycles import odd_normalization_closed_form
    from .ktheory import ch1_coefficients, loop_from_winding, loop_as_element, qwz_projector
    from .linalg import commutator, matmul, sign_operator, trace_product
    from .oracles import berry_chern, kernel_index, toeplitz_index, winding_quadrature
    from .pairing import even_pairing, odd_pairing
    from .spectral_flow import flow
    from .triples import circle_triple, torus2_dirac, two_point_triple
    from .ktheory import projector_as_element
    from .zeta import cm_residue_term

    # odd normalizations: the winding-one loop on the circle pairs to its
    # quadrature winding at every degree on its own
    circle = circle_triple(16)
    g1 = loop_from_winding([1])
    target = winding_quadrature(g1).value
    F = sign_operator(circle.dirac, tol=tol).matrix
    G = loop_as_element(g1, circle, tol).matrix
    Gi = loop_as_element(g1.inverse(), circle, tol).matrix
    A, B = commutator(F, Gi), commutator(F, G)
    odd, odd_doc = {}, {}
    M = matmul(F, A)
    for n in ODD_DEGREES:
        raw = trace_product(M, B)
        M = matmul(matmul(M, B), A)
        k = n // 2
        # ch1(k) * (-1)^k * lam * raw / n! = target
        lam = target * factorial(n) / (float(ch1_coefficients(k)) * (-1) ** k * np.real(raw))
        closed = float(odd_normalization_closed_form(n))
        if abs(lam - closed) > _AGREEMENT * abs(closed):
            raise CalibrationError(f"degree {n}: measured normalization {lam!r} differs from the "
                                   f"closed form {closed!r}")
        odd[n] = float(f"{lam:.12e}")
        odd_doc[str(n)] = {"closed_form": f"{closed:.12e}", "measured": f"{lam:.12e}"}

    # even signs: degree 0 on the gapped two-point triple, higher degrees on
    # the torus, both against the kernel-count index
    unit = _provisional(odd, {n: 1 for n in EVEN_DEGREES})
    even = {}
    two = two_point_triple(1.0)
    p = two.generator("p")
    unsigned = _integer(even_pairing(two, p, 0, calibration=unit, tol=tol).total, "degree-0 pairing")
    even[0] = _ratio(kernel_index(two, p, tol).value, unsigned, "degree-0 sign")
    torus = torus2_dirac(6, amplification=2)
    qwz = qwz_projector(48, 1.0)
    E = projector_as_element(qwz, torus, tol)
    index = kernel_index(torus, E, tol).value
    berry = berry_chern(qwz).value
    report = even_pairing(torus, E, max(EVEN_DEGREES), calibration=unit, tol=tol)
    for n in EVEN_DEGREES[1:]:
        unsigned = _integer(report.single_degree[n], f"degree-{n} pairing")
        even[n] = _ratio(index, unsigned, f"degree-{n} sign")

    # orientation signs
    table = _provisional(odd, even)
    samples = {}
    for k in (-2, 1, 3):
        loop = loop_from_winding([k])
        c = circle_triple(32)
        samples[k] = (
            winding_quadrature(loop).value,
            toeplitz_index(loop, 32, tol).value,
            odd_pairing(c, loop, calibration=table, tol=tol).nearest_integer,
        )
    signs = {}
    for name, col in (("pairing_vs_quadrature", 2), ("toeplitz_vs_quadrature", 1)):
        found = {_ratio(v[col], v[0], name) for v in samples.values()}
        if len(found) != 1:
            raise CalibrationError(f"{name} is not a single sign across windings")
        signs[name] = found.pop()
    small = circle_triple(12)
    net = flow(small, loop_as_element(g1, small, tol), tol=tol).net
    signs["flow_vs_pairing"] = _ratio(net, samples[1][2], "flow_vs_pairing")
    signs["berry_vs_kernel_index"] = _ratio(berry, index, "berry_vs_kernel_index")
    signs["even_pairing_vs_kernel_index"] = 1

    # the degree-one residue of the local formula per unit winding
    big = circle_triple(2000)
    res = cm_residue_term(big, [loop_as_element(g1.inverse(), big, tol), loop_as_element(g1, big, tol)],
                          [0], 0, tol=tol)
    cm = res / samples[1][2]
    if abs(cm - round(cm)) > 1e-6:
        raise CalibrationError(f"residue constant {cm!r} is not an integer multiple")

    content = {
        "version": __version__,
        "odd_normalization": odd_doc,
        "even_sign": {str(n): s for n, s in even.items()},
        "signs": signs,
        "cm_residue_constant": int(round(cm)),
    }
    return CalibrationTable(content, _checksum(content))
