import numpy as np
import pytest

from ncindex.exceptions import CutoffError, GradingError, NotUnitaryError, ParityError
from ncindex.linalg import GradedOperator, as_dense
from ncindex.triples import (
    GaugePotential,
    chiral_block_form,
    check_circle_cutoff,
    circle_triple,
    compress_symbol,
    conjugate_dirac,
    gauge_transform,
    matrix_amplify,
    perturb,
    point_triple,
    product_with_circle,
    random_gauge_potential,
    required_circle_cutoff,
    torus2_dirac,
    two_point_triple,
)


def test_circle_triple_spectrum_and_generators():
    c = circle_triple(4)
    assert c.dim == 9 and c.parity == "odd"
    assert np.allclose(np.diag(as_dense(c.dirac.matrix)).real, np.arange(-4, 5))
    u = as_dense(c.generator("u").matrix)
    us = as_dense(c.generator("u*").matrix)
    # compressed shift: unitary away from the top mode only
    assert np.allclose((us @ u)[:-1, :-1], np.eye(8))
    bounds = c.generator_bounds()
    assert bounds["u"][1] == pytest.approx(1.0)


def test_interior_and_boundary_masks():
    c = circle_triple(8)
    assert c.interior_mask().sum() == 9
    assert c.boundary_mask().sum() == 2


def test_compress_symbol_rejects_wide_band():
    with pytest.raises(CutoffError):
        compress_symbol({5: 1.0}, 3)
    op = compress_symbol({5: 1.0}, 3, strict=False)
    assert np.count_nonzero(as_dense(op)) == 2


def test_cutoff_rule():
    c = circle_triple(12)
    assert required_circle_cutoff(2, 1) == 10
    check_circle_cutoff(c, 2, 1)
    with pytest.raises(CutoffError):
        check_circle_cutoff(c, 2, 3)
    assert required_circle_cutoff(1, 3, "product") == 6


def test_matrix_amplify_and_constant_element():
    c = matrix_amplify(circle_triple(3), 2)
    assert c.amplification == 2 and c.dim == 14
    u = np.array([[0, 1], [1, 0]])
    k = as_dense(c.constant_element(u).matrix)
    assert np.allclose(k @ k, np.eye(14))


def test_torus_dirac_is_graded_and_chiral():
    t = torus2_dirac(3)
    assert t.parity == "even"
    D = as_dense(t.dirac.matrix)
    gamma = t.space.gamma
    assert np.allclose(gamma @ D, -D @ gamma)
    ev = np.sort(np.abs(np.linalg.eigvalsh(D)))
    assert ev[0] == pytest.approx(0.0) and ev[2] == pytest.approx(1.0)
    assert t.degree_admissible(2) and not t.degree_admissible(0)


def test_product_with_two_point_spectrum():
    base = two_point_triple(1.5)
    prod = product_with_circle(base, 3)
    assert prod.parity == "odd"
    ev = np.sort(np.linalg.eigvalsh(as_dense(prod.dirac.matrix)))
    n = np.arange(-3, 4)
    want = np.sort(np.concatenate([np.sqrt(n ** 2 + 1.5 ** 2), -np.sqrt(n ** 2 + 1.5 ** 2)]))
    assert np.allclose(ev, want)
    (top, minus), (plus, bottom) = chiral_block_form(prod)
    assert np.allclose(minus, plus.conj().T)
    assert np.allclose(np.diag(top).real, np.arange(-3, 4))
    assert np.allclose(bottom, -top)


def test_finite_triples():
    p = point_triple()
    assert p.dim == 1 and p.finite_spectrum and p.degree_admissible(0)
    t = two_point_triple(2.0)
    assert np.allclose(np.linalg.eigvalsh(as_dense(t.dirac.matrix)), [-2, 2])


def test_even_triple_rejects_odd_perturbation_parity():
    t = two_point_triple(1.0)
    with pytest.raises(ParityError):
        perturb(t, GaugePotential(GradedOperator(np.eye(2))))
    with pytest.raises(ParityError):
        GaugePotential(GradedOperator(np.diag([1.0, -1.0]), "even", t.space))


def test_random_gauge_potential_norm_and_support(rng):
    c = circle_triple(8)
    A = random_gauge_potential(c, 0.3, rng)
    assert A.norm == pytest.approx(0.3)
    m = as_dense(A.matrix.matrix)
    outside = ~c.interior_mask()
    assert np.allclose(m[outside], 0) and np.allclose(m[:, outside], 0)
    shifted = perturb(c, A)
    assert shifted.truncation["perturbation_norm"] == pytest.approx(0.3)


def test_gauge_transform_formula(rng):
    t = two_point_triple(1.0)
    zero = GaugePotential(GradedOperator(np.zeros((2, 2)), "odd", t.space))
    g = GradedOperator(np.diag([1.0, 1j]), "even", t.space)
    A = gauge_transform(t.dirac, zero, g)
    D = as_dense(t.dirac.matrix)
    G = as_dense(g.matrix)
    assert np.allclose(as_dense(A.matrix.matrix), G.conj().T @ D @ G - D)
    conj = conjugate_dirac(t, g)
    assert np.allclose(np.linalg.eigvalsh(as_dense(conj.dirac.matrix)), [-1, 1])
    with pytest.raises(NotUnitaryError):
        gauge_transform(t.dirac, zero, GradedOperator(np.diag([2.0, 1.0]), "even", t.space))


def test_triple_validation():
    c = circle_triple(2)
    with pytest.raises(GradingError):
        c.with_dirac(GradedOperator(np.zeros((5, 5)))).__class__("even", c.dirac, {}, 1.0, "x", {},
                                                                  np.zeros(5))
