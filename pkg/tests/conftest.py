import warnings

import numpy as np
import pytest

from ncindex.ktheory import loop_as_element, loop_from_winding, projector_as_element, qwz_projector
from ncindex.triples import circle_triple, torus2_dirac


@pytest.fixture(scope="session")
def circle32():
    return circle_triple(32)


@pytest.fixture(scope="session")
def circle16():
    return circle_triple(16)


@pytest.fixture(scope="session")
def torus8():
    return torus2_dirac(8, amplification=2)


@pytest.fixture(scope="session")
def qwz_elements(torus8):
    out = {}
    for m in (1.0, 3.0, -1.0):
        q = qwz_projector(48, m)
        out[m] = (q, projector_as_element(q, torus8))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_hermitian(rng, n, scale=1.0):
    x = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * (x + x.conj().T) / 2


def embedded(loop, triple):
    return loop_as_element(loop, triple), loop_as_element(loop.inverse(), triple)


def winding(*ks):
    return loop_from_winding(list(ks))


def no_warnings():
    return warnings.catch_warnings()


# acceptance criteria report: one line per criterion at the end of the run
ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2} {status}: {title} ({detail})")
