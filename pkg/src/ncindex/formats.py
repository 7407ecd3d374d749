"""Text serializations: the matrix dump and the result CSV rows.

Matrix dump::

    #ncdump v1
    matrix <name> <rows> <cols>
    re,im re,im ...        (one line per row, values as %.17g)

Result rows share one schema for pairing reports and oracle results,
see ``RESULT_COLUMNS``.
"""

from __future__ import annotations

import io
from typing import Iterable, Iterator, TextIO

import numpy as np

from .linalg import as_dense

__all__ = [
    "DUMP_HEADER",
    "RESULT_COLUMNS",
    "write_matrices",
    "read_matrices",
    "dump_triple",
    "dump_loop",
    "dump_idempotent",
    "report_rows",
    "oracle_row",
    "format_rows",
    "fmt",
]

DUMP_HEADER = "#ncdump v1"
RESULT_COLUMNS = ("scenario", "case", "source", "degree", "re", "im", "integer", "aligned",
                  "defect", "quality")


def fmt(x: float) -> str:
    return f"{float(x):.12e}"


def _g17(x: float) -> str:
    s = f"{float(x):.17g}"
    return "0" if s == "-0" else s


def write_matrices(stream: TextIO, matrices: Iterable[tuple[str, object]]) -> None:
    stream.write(DUMP_HEADER + "\n")
    for name, m in matrices:
        if any(c.isspace() for c in name) or not name:
            raise ValueError(f"matrix name {name!r} must be a non-empty token")
        a = np.atleast_2d(as_dense(m)).astype(complex)
        if a.ndim != 2:
            raise ValueError("only 2-d arrays can be dumped")
        stream.write(f"matrix {name} {a.shape[0]} {a.shape[1]}\n")
        for row in a:
            stream.write(" ".join(f"{_g17(z.real)},{_g17(z.imag)}" for z in row) + "\n")


def read_matrices(stream: TextIO) -> dict[str, np.ndarray]:
    lines = iter(stream.read().splitlines())
    if next(lines, None) != DUMP_HEADER:
        raise ValueError("not a matrix dump (missing header)")
    out: dict[str, np.ndarray] = {}
    for line in lines:
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4 or parts[0] != "matrix":
            raise ValueError(f"expected a matrix section, got {line!r}")
        name, rows, cols = parts[1], int(parts[2]), int(parts[3])
        a = np.empty((rows, cols), dtype=complex)
        for i in range(rows):
            cells = next(lines).split()
            if len(cells) != cols:
                raise ValueError(f"matrix {name}: row {i} has {len(cells)} entries, expected {cols}")
            for j, cell in enumerate(cells):
                re, im = cell.split(",")
                a[i, j] = complex(float(re), float(im))
        out[name] = a
    return out


def _to_string(matrices) -> str:
    buf = io.StringIO()
    write_matrices(buf, matrices)
    return buf.getvalue()


def dump_triple(triple, generators: Iterable[str] | None = None) -> str:
    """Dirac operator, grading diagonal (if any) and the named generators."""
    items = [("dirac", triple.dirac.matrix)]
    if triple.graded:
        items.append(("gamma", np.diag(triple.space.gamma_diagonal)))
    names = list(triple.algebra_gens) if generators is None else list(generators)
    items += [(f"gen:{n}", triple.generator(n).matrix) for n in names]
    return _to_string(items)


def dump_loop(loop) -> str:
    """One matrix per grid point, named ``g[j]``."""
    return _to_string((f"g[{j}]", s) for j, s in enumerate(np.asarray(loop.samples)))


def dump_idempotent(e) -> str:
    field = np.asarray(e.matrix_field)
    n = field.shape[-1]
    grid = field.shape[:-2]
    flat = field.reshape(-1, n, n)
    names = (f"e[{','.join(map(str, np.unravel_index(i, grid)))}]" if grid else "e"
             for i in range(flat.shape[0]))
    return _to_string(zip(names, flat))


def report_rows(scenario: str, case: str, report, aligned: int | None = None) -> Iterator[tuple]:
    """One ``pairing`` row for the total, one ``pairing_degree`` row per component."""
    aligned = report.nearest_integer if aligned is None else aligned
    yield (scenario, case, f"{report.kind}_pairing", str(max(report.degrees)), fmt(report.total.real),
           fmt(report.total.imag), str(report.nearest_integer), str(aligned), fmt(report.defect),
           fmt(report.quality))
    for n in report.degrees:
        c = report.per_degree[n]
        yield (scenario, case, f"{report.kind}_pairing_degree", str(n), fmt(c.real), fmt(c.imag),
               "", "", "", "")


def oracle_row(scenario: str, case: str, source: str, value: int, raw: float, defect: float,
               aligned: int) -> tuple:
    return (scenario, case, source, "", fmt(raw), fmt(0.0), str(value), str(aligned), fmt(defect), "")


def format_rows(rows: Iterable[tuple], header_lines: Iterable[str] = (),
                columns: Iterable[str] = RESULT_COLUMNS) -> str:
    out = io.StringIO()
    for h in header_lines:
        out.write(f"# {h}\n")
    out.write(",".join(columns) + "\n")
    for r in rows:
        out.write(",".join(r) + "\n")
    return out.getvalue()
