"""Batch scenario runner.

``ncindex run <config> [<config> ...]`` runs INI scenarios (a path or the
name of a bundled scenario) and writes CSV artifacts to ``--out``;
``ncindex calibrate`` regenerates the calibration table. The config
grammar and CSV layouts are documented in ``docs/formats.md``.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import scipy.linalg

from . import __version__
from .calibration import CalibrationTable, compute_table, load_table, table_bytes, write_table
from .config import DEFAULT
from .exceptions import CalibrationError, ChecksumError, ConfigError, NumericalQualityError
from .formats import format_rows, oracle_row, report_rows
from .ktheory import bott_clutching_loop, loop_as_element, loop_from_winding, projector_as_element, qwz_projector
from .linalg import GradedOperator
from .oracles import berry_chern, kernel_index, toeplitz_index, winding_quadrature
from .pairing import anomaly_integral, even_pairing, odd_pairing
from .spectral_flow import flow, trace_to_csv
from .triples import (
    circle_triple,
    conjugate_dirac,
    perturb,
    point_triple,
    random_gauge_potential,
    torus2_dirac,
    two_point_triple,
)
from .zeta import profile_to_csv, residue_estimate, zeta_profile, DEFAULT_LADDER

__all__ = ["main", "ScenarioConfig", "RunSummary", "load_config", "run_scenario", "BUNDLED"]

log = logging.getLogger("ncindex")

EXIT_OK, EXIT_CONFIG, EXIT_QUALITY, EXIT_CALIBRATION, EXIT_CHECKSUM = 0, 2, 3, 4, 5
KINDS = ("anomaly", "spectral-flow", "even-index", "zeta", "consistency", "calibrate")
TRIPLES = ("circle", "torus2", "two-point", "point")
BUNDLED = ("circle-winding-sweep", "matrix-loops", "degree-stability", "even-index", "suspension",
           "zeta-sanity", "zeta-finite", "gauge-invariance", "tiny-cutoff")


@dataclass(frozen=True)
class ScenarioConfig:
    scenario_id: str
    kind: str
    triple: dict
    klass: dict
    degrees: tuple[int, ...]
    tolerance: float
    checks: dict
    output: dict
    source: str

    @property
    def csv_name(self) -> str:
        return self.output.get("csv", f"{self.scenario_id}.csv")


@dataclass
class CaseResult:
    case: str
    integers: dict[str, int]
    defect: float
    agree: bool


@dataclass
class RunSummary:
    scenario_id: str
    cases: list[CaseResult] = field(default_factory=list)
    wall_time: float = 0.0
    artifacts: list[str] = field(default_factory=list)

    @property
    def agreement(self) -> bool:
        return all(c.agree for c in self.cases)

    @property
    def max_defect(self) -> float:
        return max((c.defect for c in self.cases), default=0.0)


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------


def _ints(text: str, what: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"{what}: expected integers, got {text!r}") from None


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"{what}: expected numbers, got {text!r}") from None


def resolve_config(name: str) -> tuple[str, str]:
    """Text and label of a config path or bundled scenario name."""
    path = Path(name)
    if path.is_file():
        return path.read_text(), str(path)
    if name in BUNDLED:
        res = resources.files("ncindex") / "scenarios" / f"{name}.ini"
        return res.read_text(), f"bundled:{name}"
    raise ConfigError(f"no config file or bundled scenario named {name!r}")


def load_config(text: str, source: str = "<string>") -> ScenarioConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    if not cp.has_section("scenario"):
        raise ConfigError(f"{source}: missing [scenario] section")
    sc = cp["scenario"]
    sid = sc.get("id")
    kind = sc.get("kind")
    if not sid or any(ch.isspace() or ch in "/\\," for ch in sid):
        raise ConfigError(f"{source}: scenario id must be a plain token, got {sid!r}")
    if kind not in KINDS:
        raise ConfigError(f"{source}: kind must be one of {', '.join(KINDS)}, got {kind!r}")
    triple = dict(cp["triple"]) if cp.has_section("triple") else {}
    if kind != "calibrate":
        name = triple.get("name")
        if name not in TRIPLES:
            raise ConfigError(f"{source}: [triple] name must be one of {', '.join(TRIPLES)}, got {name!r}")
    degrees = ()
    if cp.has_section("degrees") and "max_degree" in cp["degrees"]:
        degrees = tuple(_ints(cp["degrees"]["max_degree"], "max_degree"))
    try:
        tolerance = float(sc.get("tolerance", "1e-3"))
    except ValueError:
        raise ConfigError(f"{source}: tolerance must be a number") from None
    cfg = ScenarioConfig(sid, kind, triple, dict(cp["class"]) if cp.has_section("class") else {},
                         degrees, tolerance, dict(cp["checks"]) if cp.has_section("checks") else {},
                         dict(cp["output"]) if cp.has_section("output") else {}, source)
    _validate(cfg)
    return cfg


def _validate(cfg: ScenarioConfig) -> None:
    t, c = cfg.triple, cfg.klass
    for key in ("cutoff", "amplification", "circle_cutoff"):
        if key in t:
            _ints(t[key], key)
    if cfg.kind in ("consistency", "spectral-flow"):
        if t["name"] != "circle":
            raise ConfigError(f"{cfg.source}: {cfg.kind} scenarios run on the circle triple")
        if "loops" not in c:
            raise ConfigError(f"{cfg.source}: [class] loops is required")
        amp = int(t.get("amplification", "1"))
        for loop in _loops(c["loops"]):
            if len(loop) != amp:
                raise ConfigError(f"{cfg.source}: loop {loop} does not match amplification {amp}")
    if cfg.kind == "even-index" and t["name"] != "torus2":
        raise ConfigError(f"{cfg.source}: even-index scenarios run on torus2")
    if cfg.kind == "anomaly" and "circle_cutoff" not in t:
        raise ConfigError(f"{cfg.source}: anomaly scenarios need [triple] circle_cutoff")
    if cfg.kind == "zeta":
        for key in ("pole", "expected"):
            if key not in c:
                raise ConfigError(f"{cfg.source}: zeta scenarios need [class] {key}")
            _floats(c[key], key)


def _loops(text: str) -> list[list[int]]:
    return [_ints(part, "loop") for part in text.split("|") if part.strip()]


def _flag(d: dict, key: str, default: bool = False) -> bool:
    v = d.get(key)
    if v is None:
        return default
    v = v.strip().lower()
    if v in ("yes", "true", "on", "1"):
        return True
    if v in ("no", "false", "off", "0"):
        return False
    raise ConfigError(f"{key}: expected yes/no, got {v!r}")


def _build_triple(t: dict):
    name = t["name"]
    if name == "circle":
        return circle_triple(int(t.get("cutoff", "32")), int(t.get("amplification", "1")))
    if name == "torus2":
        return torus2_dirac(int(t.get("cutoff", "8")), amplification=int(t.get("amplification", "1")))
    if name == "two-point":
        return two_point_triple(float(t.get("mass", "1.0")))
    return point_triple()


# ---------------------------------------------------------------------------
# scenario kinds
# ---------------------------------------------------------------------------


def _loop_label(w) -> str:
    return "w" + "_".join(str(x) for x in w)


def _odd_case(cfg, triple, w, table, rows, extra, seed_rng):
    label = _loop_label(w)
    loop = loop_from_winding(w)
    degrees = cfg.degrees or (None,)
    reports = [odd_pairing(triple, loop, d, calibration=table) for d in degrees]
    for r in reports:
        rows.extend(report_rows(cfg.scenario_id, label, r))
    main = reports[0]
    ints = {f"pairing@{max(r.degrees)}": r.nearest_integer for r in reports}
    p_q = table.sign("pairing_vs_quadrature")
    quad = winding_quadrature(loop)
    ints["quadrature"] = p_q * quad.value
    rows.append(oracle_row(cfg.scenario_id, label, "quadrature", quad.value, quad.raw, quad.defect,
                           ints["quadrature"]))
    if _flag(cfg.checks, "toeplitz", True):
        toe = toeplitz_index(loop, int(cfg.triple.get("cutoff", "32")))
        ints["toeplitz"] = p_q * table.sign("toeplitz_vs_quadrature") * toe.value
        rows.append(oracle_row(cfg.scenario_id, label, "toeplitz", toe.value, toe.raw, toe.defect,
                               ints["toeplitz"]))
    g = loop_as_element(loop, triple)
    if _flag(cfg.checks, "flow", False) or cfg.kind == "spectral-flow":
        tr = flow(triple, g)
        ints["flow"] = table.sign("flow_vs_pairing") * tr.net
        rows.append(oracle_row(cfg.scenario_id, label, "flow", tr.net, float(tr.net), 0.0, ints["flow"]))
        if cfg.kind == "spectral-flow":
            extra[f"{cfg.scenario_id}-flow-{label}.csv"] = trace_to_csv(tr)
    stable = True
    limit = float(cfg.checks.get("extra_tolerance", "1e-3"))
    for r in reports[1:]:
        for n in r.degrees[1:]:
            stable &= r.extra_contribution(n) < limit
    n_pert = int(cfg.checks.get("perturbations", "0"))
    n_conj = int(cfg.checks.get("conjugations", "0"))
    if n_pert or n_conj:
        norm = float(cfg.checks.get("perturbation_norm", "0.4"))
        for i in range(n_pert):
            A = random_gauge_potential(triple, norm, seed_rng)
            r = odd_pairing(perturb(triple, A), loop, degrees[0], calibration=table)
            ints[f"perturbed#{i}"] = r.nearest_integer
            rows.extend(report_rows(cfg.scenario_id, f"{label}-perturbed{i}", r))
        for i in range(n_conj):
            H = random_gauge_potential(triple, 1.0, seed_rng).matrix.matrix
            u = GradedOperator(scipy.linalg.expm(1j * np.asarray(H)))
            r = odd_pairing(conjugate_dirac(triple, u), loop, degrees[0], calibration=table)
            ints[f"conjugated#{i}"] = r.nearest_integer
            rows.extend(report_rows(cfg.scenario_id, f"{label}-conjugated{i}", r))
    defect = max(r.defect for r in reports)
    agree = len(set(ints.values())) == 1 and stable and all(r.reliable for r in reports)
    return CaseResult(label, ints, defect, agree)


def _run_odd(cfg, table, rng):
    triple = _build_triple(cfg.triple)
    rows, extra, cases = [], {}, []
    for w in _loops(cfg.klass["loops"]):
        cases.append(_odd_case(cfg, triple, w, table, rows, extra, rng))
    return rows, extra, cases


def _run_even(cfg, table, rng):
    K = int(cfg.triple.get("cutoff", "8"))
    triple = torus2_dirac(K, amplification=2)
    grid = int(cfg.klass.get("grid", "48"))
    rows, cases = [], []
    e_b = table.sign("even_pairing_vs_kernel_index") * table.sign("berry_vs_kernel_index")
    for m in _floats(cfg.klass.get("masses", "1"), "masses"):
        label = f"m{m:g}"
        q = qwz_projector(grid, m)
        E = projector_as_element(q, triple)
        reports = [even_pairing(triple, E, d, calibration=table) for d in (cfg.degrees or (None,))]
        for r in reports:
            rows.extend(report_rows(cfg.scenario_id, label, r))
        ints = {f"pairing@{max(r.degrees)}": r.nearest_integer for r in reports}
        ki = kernel_index(triple, E)
        ints["kernel_index"] = table.sign("even_pairing_vs_kernel_index") * ki.value
        rows.append(oracle_row(cfg.scenario_id, label, "kernel_index", ki.value, ki.raw, ki.defect,
                               ints["kernel_index"]))
        be = berry_chern(q)
        ints["berry"] = e_b * be.value
        rows.append(oracle_row(cfg.scenario_id, label, "berry", be.value, be.raw, be.defect, ints["berry"]))
        defect = max(r.defect for r in reports)
        agree = len(set(ints.values())) == 1 and all(r.reliable for r in reports)
        cases.append(CaseResult(label, ints, defect, agree))
    return rows, {}, cases


def _run_anomaly(cfg, table, rng):
    M = int(cfg.triple["circle_cutoff"])
    degree = cfg.degrees[0] if cfg.degrees else None
    rows, cases = [], []
    if cfg.triple["name"] == "torus2":
        K = int(cfg.triple.get("cutoff", "6"))
        base = torus2_dirac(K, amplification=2)
        grid = int(cfg.klass.get("grid", "48"))
        for m in _floats(cfg.klass.get("masses", "1"), "masses"):
            label = f"bott-m{m:g}"
            q = qwz_projector(grid, m)
            r = anomaly_integral(base, bott_clutching_loop(q), M, degree, calibration=table)
            rows.extend(report_rows(cfg.scenario_id, label, r))
            E = projector_as_element(q, base)
            ev = even_pairing(base, E, calibration=table)
            rows.extend(report_rows(cfg.scenario_id, label, ev))
            ints = {"anomaly": r.nearest_integer, "even_pairing": ev.nearest_integer}
            if _flag(cfg.checks, "kernel_index", True):
                ki = kernel_index(base, E)
                ints["kernel_index"] = table.sign("even_pairing_vs_kernel_index") * ki.value
                rows.append(oracle_row(cfg.scenario_id, label, "kernel_index", ki.value, ki.raw, ki.defect,
                                       ints["kernel_index"]))
            cases.append(CaseResult(label, ints, max(r.defect, ev.defect),
                                    len(set(ints.values())) == 1 and r.reliable and ev.reliable))
        return rows, {}, cases
    base = _build_triple(cfg.triple)
    index = kernel_index(base, base.identity())
    p_q = table.sign("pairing_vs_quadrature")
    for w in _loops(cfg.klass.get("loops", "1")):
        label = _loop_label(w)
        loop = loop_from_winding(w)
        r = anomaly_integral(base, loop, M, degree, calibration=table)
        rows.extend(report_rows(cfg.scenario_id, label, r))
        quad = winding_quadrature(loop)
        expected = p_q * quad.value * index.value
        rows.append(oracle_row(cfg.scenario_id, label, "quadrature", quad.value, quad.raw, quad.defect, expected))
        ints = {"anomaly": r.nearest_integer, "quadrature*index": expected}
        cases.append(CaseResult(label, ints, r.defect, r.nearest_integer == expected and r.reliable))
    return rows, {}, cases


def _run_zeta(cfg, table, rng):
    triple = _build_triple(cfg.triple)
    s0 = float(cfg.klass["pole"])
    expected = float(cfg.klass["expected"])
    rel = float(cfg.klass.get("relative_tolerance", "0.02"))
    absolute = float(cfg.klass.get("absolute_tolerance", "1e-6"))
    ladder = np.asarray(DEFAULT_LADDER)
    prof = zeta_profile(triple, None, list(s0 + ladder))
    fit = residue_estimate(prof, s0)
    err = abs(fit.residue - expected)
    ok = err <= max(absolute, rel * abs(expected))
    label = f"s{s0:g}"
    rows = [(cfg.scenario_id, label, "residue", "", f"{fit.residue:.12e}", f"{0.0:.12e}", "", "",
             f"{err:.12e}", f"{fit.residual:.12e}")]
    extra = {f"{cfg.scenario_id}-profile.csv": profile_to_csv(prof)}
    return rows, extra, [CaseResult(label, {"residue": int(np.rint(fit.residue))}, 0.0, ok)]


def _run_calibrate(cfg, table, rng):
    fresh = compute_table()
    same = table_bytes(fresh) == table_bytes(table)
    rows = [(cfg.scenario_id, "table", "calibration", "", "", "", "", "", "", "")]
    return rows, {}, [CaseResult("table", {"reproduced": int(same)}, 0.0, same)]


_RUNNERS = {"consistency": _run_odd, "spectral-flow": _run_odd, "even-index": _run_even,
            "anomaly": _run_anomaly, "zeta": _run_zeta, "calibrate": _run_calibrate}


def run_scenario(cfg: ScenarioConfig, table: CalibrationTable, out_dir: Path, seed: int | None = None,
                 tolerance: float | None = None) -> RunSummary:
    t0 = time.perf_counter()
    sd = int(cfg.checks.get("seed", "0")) if seed is None else seed
    rng = np.random.default_rng(sd)
    rows, extra, cases = _RUNNERS[cfg.kind](cfg, table, rng)
    tol = cfg.tolerance if tolerance is None else tolerance
    for c in cases:
        c.agree = c.agree and c.defect <= tol
    header = [f"ncindex {__version__}", f"calibration {table.checksum}", f"scenario {cfg.scenario_id}"]
    summary = RunSummary(cfg.scenario_id)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {cfg.csv_name: format_rows(rows, header)}
    for name, text in extra.items():
        files[name] = "".join(f"# {h}\n" for h in header) + text
    for name, text in files.items():
        path = out_dir / name
        path.write_text(text)
        summary.artifacts.append(str(path))
    summary.cases = cases
    summary.wall_time = time.perf_counter() - t0
    return summary


def _print_summary(s: RunSummary, stream) -> None:
    status = "agree" if s.agreement else "DISAGREE"
    stream.write(f"== {s.scenario_id}: {status}, max defect {s.max_defect:.3e}, {s.wall_time:.2f} s\n")
    for c in s.cases:
        cells = "  ".join(f"{k}={v}" for k, v in c.integers.items())
        stream.write(f"   {c.case:<14} {'ok ' if c.agree else 'BAD'}  defect={c.defect:.3e}  {cells}\n")


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ncindex", description="Index pairings on truncated spectral triples.")
    p.add_argument("--version", action="version", version=f"ncindex {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run scenario configs or bundled scenarios")
    r.add_argument("configs", nargs="+", metavar="config")
    r.add_argument("--out", type=Path, default=Path("ncindex-out"), help="artifact directory")
    r.add_argument("--tolerance", type=float, default=None, help="override every scenario's defect tolerance")
    r.add_argument("--threads", type=int, default=1, help="scenarios run concurrently")
    r.add_argument("--seed", type=int, default=None, help="seed for randomized property checks")
    r.add_argument("--calibration", type=Path, default=None, help="calibration table to use")
    c = sub.add_parser("calibrate", help="recompute and write the calibration table")
    c.add_argument("--out", type=Path, default=None,
                   help="directory for calibration.json (default: the active table location)")
    sub.add_parser("list", help="list bundled scenarios")
    return p


def _cmd_run(args, stdout, stderr) -> int:
    try:
        configs = [load_config(*resolve_config(name)) for name in args.configs]
    except ConfigError as exc:
        stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    if args.threads < 1:
        stderr.write("config error: --threads must be positive\n")
        return EXIT_CONFIG
    try:
        table = load_table(args.calibration)
    except ChecksumError as exc:
        stderr.write(f"calibration table rejected: {exc}\n")
        return EXIT_CHECKSUM
    except OSError as exc:
        stderr.write(f"calibration table missing: {exc}\n")
        return EXIT_CHECKSUM

    def one(cfg):
        try:
            return run_scenario(cfg, table, args.out, args.seed, args.tolerance), None
        except NumericalQualityError as exc:
            return None, (EXIT_QUALITY, f"{cfg.scenario_id}: numerical quality failure: {exc}",
                          getattr(exc, "diagnostics", {}))
        except CalibrationError as exc:
            return None, (EXIT_CALIBRATION, f"{cfg.scenario_id}: calibration failure: {exc}", {})
        except ConfigError as exc:
            return None, (EXIT_CONFIG, f"{cfg.scenario_id}: config error: {exc}", {})
        except ValueError as exc:
            return None, (EXIT_CONFIG, f"{cfg.scenario_id}: invalid scenario: {exc}", {})

    with ThreadPoolExecutor(max_workers=args.threads) as pool:
        results = list(pool.map(one, configs))
    code = EXIT_OK
    for summary, err in results:
        if err is not None:
            ecode, msg, diag = err
            stderr.write(msg + "\n")
            for k, v in diag.items():
                stderr.write(f"   {k}: {v}\n")
            code = max(code, ecode)
            continue
        _print_summary(summary, stdout)
        if not summary.agreement:
            code = max(code, EXIT_QUALITY)
    return code


def _cmd_calibrate(args, stdout, stderr) -> int:
    try:
        table = compute_table(DEFAULT)
    except (CalibrationError, NumericalQualityError) as exc:
        stderr.write(f"calibration failed: {exc}\n")
        return EXIT_CALIBRATION
    path = write_table(table, None if args.out is None else args.out / "calibration.json")
    stdout.write(f"wrote {path}\nchecksum {table.checksum}\n")
    return EXIT_OK


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "list":
        stdout.write("\n".join(BUNDLED) + "\n")
        return EXIT_OK
    if args.command == "calibrate":
        return _cmd_calibrate(args, stdout, stderr)
    return _cmd_run(args, stdout, stderr)


if __name__ == "__main__":
    sys.exit(main())
