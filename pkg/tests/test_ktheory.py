from fractions import Fraction

import numpy as np
import pytest

from ncindex.exceptions import NotIdempotentError, NotUnitaryError
from ncindex.ktheory import (
    FamilyLoop,
    Idempotent,
    UnitaryLoop,
    bott_clutching_loop,
    ch0_coefficients,
    ch1_coefficients,
    constant_projector,
    loop_as_element,
    loop_from_function,
    loop_from_winding,
    miscenko_idempotent,
    projector_as_element,
    qwz_projector,
)
from ncindex.linalg import as_dense
from ncindex.triples import circle_triple, product_with_circle, torus2_dirac, point_triple


def test_ch1_coefficients_values():
    assert [ch1_coefficients(k) for k in range(3)] == [1, -1, 2]


def test_ch0_coefficients_values():
    assert [ch0_coefficients(k) for k in (0, 2, 3)] == [1, Fraction(1, 2), Fraction(1, 6)]


def test_loop_from_winding_samples_and_fourier():
    g = loop_from_winding([2, -1])
    th = g.grid
    assert np.allclose(g.samples[:, 0, 0], np.exp(2j * th))
    assert np.allclose(g.samples[:, 1, 1], np.exp(-1j * th))
    assert g.band == 2 and g.size == 2
    assert np.allclose(g.evaluate(0.3), np.diag([np.exp(0.6j), np.exp(-0.3j)]))


def test_inverse_is_pointwise():
    u = np.array([[0, 1], [1, 0]], dtype=complex)
    g = loop_from_winding([1, 3], constant_factor=u)
    gi = g.inverse()
    prod = np.einsum("jab,jbc->jac", g.samples, gi.samples[: g.grid_size] if gi.grid_size == g.grid_size
                     else gi._resample(g.grid_size).samples)
    assert np.allclose(prod, np.eye(2))


def test_non_unitary_rejected():
    with pytest.raises(NotUnitaryError):
        UnitaryLoop.from_fourier({0: np.array([[2.0]])})
    with pytest.raises(NotUnitaryError):
        loop_from_winding([1], constant_factor=[[2.0]])


def test_direct_sum_and_conjugate():
    g = loop_from_winding([1]).direct_sum(loop_from_winding([-2]))
    assert g.size == 2 and g.band == 2
    u = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    h = g.conjugate(u)
    assert np.allclose(h.samples[5], u @ g.samples[5] @ u.conj().T)


def test_loop_from_function_smooth():
    def f(t):
        a = np.exp(1j * t)
        return np.array([[np.cos(0.3 * np.sin(t)) * a]]) / abs(np.cos(0.3 * np.sin(t)))
    g = loop_from_function(f, 128)
    assert g.tail < 1e-12


def test_idempotent_checks():
    e = constant_projector(np.diag([1.0, 0.0]))
    assert e.rank() == 1 and e.base_grid == (16, 16)
    with pytest.raises(NotIdempotentError):
        Idempotent(np.array([[0.5, 0], [0, 1.0]]))


def test_qwz_projector_rank_and_gap():
    q = qwz_projector(24, 1.0)
    assert q.rank() == 1
    with pytest.raises(ValueError):
        qwz_projector(24, 2.0)  # gap closes at (0, 0)


def test_miscenko_trivial_cover():
    J = 32
    t = np.linspace(0, 2 * np.pi, J, endpoint=False)
    r0 = np.cos(t / 2) ** 2
    rho = [np.sqrt(r0), np.sqrt(1 - r0)]
    g01 = np.broadcast_to(np.eye(1), (J, 1, 1))
    e = miscenko_idempotent(rho, {(0, 1): g01})
    assert e.rank() == 1
    with pytest.raises(ValueError):
        miscenko_idempotent([rho[0], rho[0]], {(0, 1): g01})


def test_miscenko_cocycle_violation():
    J = 8
    ones = np.ones(J) / np.sqrt(3)
    g = np.broadcast_to(np.eye(1), (J, 1, 1))
    bad = {(0, 1): g, (1, 2): g, (0, 2): -g}
    with pytest.raises(ValueError, match="cocycle"):
        miscenko_idempotent([ones, ones, ones], bad)


def test_loop_as_element_circle():
    c = circle_triple(6)
    g = as_dense(loop_as_element(loop_from_winding([1]), c).matrix)
    u = as_dense(c.generator("u").matrix)
    assert np.allclose(g, u)


def test_bott_loop_unitary_and_inverse():
    q = qwz_projector(16, 1.0)
    L = bott_clutching_loop(q)
    s = L.samples(8)
    prod = np.einsum("...ab,...bc->...ac", s, L.inverse().samples(8))
    assert np.allclose(prod, np.eye(2))
    with pytest.raises(NotUnitaryError):
        FamilyLoop({0: 2 * np.ones((4, 4, 1, 1))})


def test_projector_embedding():
    T = torus2_dirac(3, amplification=2)
    E = projector_as_element(qwz_projector(24, 1.0), T)
    assert E.parity == "even"
    m = as_dense(E.matrix)
    assert np.allclose(m, m.conj().T)
    p = point_triple()
    assert np.allclose(as_dense(projector_as_element(Idempotent(np.eye(1)), p).matrix), 1)


def test_family_loop_on_product():
    T = torus2_dirac(2, amplification=2)
    P = product_with_circle(T, 3)
    g = loop_as_element(bott_clutching_loop(qwz_projector(16, 1.0)), P)
    assert g.dim == P.dim
