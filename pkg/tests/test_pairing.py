import warnings

import numpy as np
import pytest

from ncindex.calibration import load_table
from ncindex.exceptions import CutoffError, ParityError, UnreliableResultWarning
from ncindex.ktheory import Idempotent, bott_clutching_loop, loop_from_winding, qwz_projector
from ncindex.linalg import GradedOperator
from ncindex.oracles import kernel_index, toeplitz_index, winding_quadrature
from ncindex.pairing import PairingReport, anomaly_integral, even_pairing, lowest_degree, odd_pairing
from ncindex.config import DEFAULT
from ncindex.triples import circle_triple, point_triple, torus2_dirac, two_point_triple


@pytest.mark.parametrize("k", range(-3, 4))
def test_circle_winding(circle32, k):
    g = loop_from_winding([k])
    r = odd_pairing(circle32, g)
    table = load_table()
    assert r.nearest_integer == k and r.defect < 1e-6
    assert r.nearest_integer == table.sign("pairing_vs_quadrature") * winding_quadrature(g).value
    toe = toeplitz_index(g, 32).value
    assert r.nearest_integer == table.sign("pairing_vs_quadrature") * table.sign("toeplitz_vs_quadrature") * toe


def test_constant_loop_pairs_to_zero():
    c = circle_triple(16, 2)
    u = np.array([[np.cos(0.4), -np.sin(0.4)], [np.sin(0.4), np.cos(0.4)]])
    r = odd_pairing(c, loop_from_winding([0, 0], constant_factor=u))
    assert r.nearest_integer == 0 and r.defect < 1e-12


def test_additivity():
    c = circle_triple(32, 2)
    r = odd_pairing(c, loop_from_winding([2, -3]))
    assert r.nearest_integer == -1 and r.defect < 1e-5


def test_degree_stability(circle32):
    r = odd_pairing(circle32, loop_from_winding([1]), max_degree=3)
    assert r.degrees == (1, 3)
    assert r.single_degree[1] == pytest.approx(r.single_degree[3])
    assert r.extra_contribution(3) < 1e-3
    assert r.total == pytest.approx(r.single_degree[3])
    r5 = odd_pairing(circle32, loop_from_winding([-2]), max_degree=5)
    assert r5.nearest_integer == -2 and r5.extra_contribution(5) < 1e-3


def test_report_self_consistent():
    single = {1: 0.9 + 0j, 3: 1.02 + 0j}
    r = PairingReport.build("odd", single, 0.0, {}, DEFAULT)
    assert r.per_degree[3] == pytest.approx(0.12)
    assert r.defect == pytest.approx(abs(r.total - r.nearest_integer))


def test_unreliable_flag_warns():
    with pytest.warns(UnreliableResultWarning):
        r = PairingReport.build("odd", {1: 0.5 + 0j}, 0.0, {}, DEFAULT)
    assert r.status == "unreliable" and not r.reliable


def test_degree_arguments(circle32):
    g = loop_from_winding([1])
    with pytest.raises(ValueError):
        odd_pairing(circle32, g, max_degree=2)
    with pytest.raises(ValueError):
        odd_pairing(circle32, g, max_degree=7)
    with pytest.raises(CutoffError):
        odd_pairing(circle_triple(8), loop_from_winding([3]))
    with pytest.raises(ParityError):
        odd_pairing(torus2_dirac(2), g)
    assert lowest_degree(torus2_dirac(2), "even") == 2
    assert lowest_degree(two_point_triple(1.0), "even") == 0


def test_even_trivial_cases():
    t = two_point_triple(1.0)
    assert even_pairing(t, t.identity()).nearest_integer == 0
    zero = GradedOperator(np.zeros((2, 2)), "even", t.space)
    assert even_pairing(t, zero).nearest_integer == 0
    p = t.generator("p")
    assert even_pairing(t, p).nearest_integer == kernel_index(t, p).value == 1


def test_even_qwz(torus8, qwz_elements):
    for m, (q, E) in qwz_elements.items():
        r = even_pairing(torus8, E)
        assert r.nearest_integer == kernel_index(torus8, E).value
        assert r.defect < 0.05


def test_even_degree_four(torus8, qwz_elements):
    r = even_pairing(torus8, qwz_elements[1.0][1], max_degree=4)
    assert r.nearest_integer == -1 and r.extra_contribution(4) < 0.05


def test_even_rejects_odd_element(torus8):
    with pytest.raises(ParityError):
        even_pairing(torus8, torus8.dirac)
    with pytest.raises(ParityError):
        even_pairing(circle_triple(4), Idempotent(np.eye(1)))


def test_anomaly_finite_bases():
    assert anomaly_integral(point_triple(), loop_from_winding([1]), 16).nearest_integer == 1
    assert anomaly_integral(two_point_triple(1.0), loop_from_winding([1]), 16).nearest_integer == 0
    with pytest.raises(ParityError):
        anomaly_integral(circle_triple(4), loop_from_winding([1]), 8)


@pytest.mark.slow
def test_suspension_matches_even_pairing():
    base = torus2_dirac(6, amplification=2)
    q = qwz_projector(48, 1.0)
    from ncindex.ktheory import projector_as_element

    ev = even_pairing(base, projector_as_element(q, base))
    r = anomaly_integral(torus2_dirac(6), bott_clutching_loop(q), 8)
    assert r.nearest_integer == ev.nearest_integer == -1
    assert r.defect < 0.05
