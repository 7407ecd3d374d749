import warnings

import numpy as np
import pytest

from ncindex.exceptions import ResidueFitError
from ncindex.ktheory import loop_as_element, loop_from_winding
from ncindex.linalg import BlockBanded, GradedOperator
from ncindex.triples import circle_triple, product_with_circle, torus2_dirac, two_point_triple
from ncindex.zeta import (
    DEFAULT_LADDER,
    cm_residue_term,
    experimental_local_pairing,
    profile_to_csv,
    residue_estimate,
    spectral_data,
    weyl_fit,
    zeta_profile,
    zeta_trace,
    _laurent_fit,
)

LADDER = np.asarray(DEFAULT_LADDER)


def test_riemann_series():
    c = circle_triple(10_000)
    assert abs(zeta_trace(c, None, 2.0) - np.pi ** 2 / 3) < 1e-3
    value, zeros = zeta_trace(c, None, 2.0, full_output=True)
    assert zeros == 1


def test_zero_and_single_mode_weights():
    c = circle_triple(10)
    zero = GradedOperator(BlockBanded.zeros(21, 1))
    assert zeta_trace(c, zero, 1.5) == 0
    proj = np.zeros((21, 21))
    proj[15, 15] = 1.0  # mode n = 5
    b = GradedOperator(BlockBanded.from_dense(proj, 1))
    assert zeta_trace(c, b, 2.5) == pytest.approx(5 ** -2.5)


def test_reflection_and_linearity(rng):
    c = circle_triple(50)
    z = 1.7 + 0.8j
    assert zeta_trace(c, None, np.conj(z)) == pytest.approx(np.conj(zeta_trace(c, None, z)))
    d = np.diag(rng.standard_normal(101))
    b1 = GradedOperator(BlockBanded.from_dense(d, 1))
    b2 = GradedOperator(BlockBanded.from_dense(np.eye(101), 1))
    combo = GradedOperator(BlockBanded.from_dense(2 * d - np.eye(101), 1))
    assert zeta_trace(c, combo, z) == pytest.approx(2 * zeta_trace(c, b1, z) - zeta_trace(c, b2, z))


def test_conjugation_invariance(rng):
    T = torus2_dirac(3)
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, T.dim))
    b = np.diag(rng.standard_normal(T.dim))
    u = np.diag(phases)
    b_op = GradedOperator(b, "even", T.space)
    conj = GradedOperator(u @ b @ u.conj().T, "even", T.space)
    assert zeta_trace(T, conj, 2.3) == pytest.approx(zeta_trace(T, b_op, 2.3))


def test_kernel_policy_and_domain():
    c = circle_triple(4)
    with pytest.raises(ValueError):
        zeta_trace(c, None, 1.0, kernel_policy="keep")
    with pytest.raises(ValueError):
        zeta_trace(c, None, -1.0)


def test_circle_residue():
    c = circle_triple(100_000)
    fit = residue_estimate(zeta_profile(c, None, list(1 + LADDER)), 1.0)
    assert fit.residue == pytest.approx(2.0, rel=0.02)


def test_finite_spectrum_residue_vanishes():
    t = two_point_triple(1.5)
    for s0 in (0.5, 1.0, 2.0):
        fit = residue_estimate(zeta_profile(t, None, list(s0 + LADDER)), s0)
        assert abs(fit.residue) < 1e-6


def test_product_residue_matches_weyl_count():
    P = product_with_circle(torus2_dirac(6), 6)
    tail = weyl_fit(spectral_data(P))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fit = residue_estimate(zeta_profile(P, None, list(3 + LADDER)), 3.0)
    assert fit.residue == pytest.approx(tail.coefficient * tail.exponent, rel=0.03)
    assert fit.residue == pytest.approx(8 * np.pi, rel=0.03)


def test_profile_points_right_of_pole():
    c = circle_triple(100)
    with pytest.warns(UserWarning, match="abscissa"):
        profile = zeta_profile(c, None, [1.5, 0.9])
    with pytest.raises(ValueError):
        residue_estimate(profile, 1.0)


def test_laurent_fit_failure():
    with pytest.raises(ResidueFitError):
        _laurent_fit([0.1, 0.2], [1.0, 2.0], 1)
    d = np.linspace(0.01, 0.1, 8)
    with pytest.raises(ResidueFitError):
        _laurent_fit(d, np.sin(300 * d) * 1e3, 1)


def test_profile_csv_columns():
    c = circle_triple(20)
    text = profile_to_csv(zeta_profile(c, None, [2.0, 3.0]))
    lines = text.splitlines()
    assert lines[0] == "z_re,z_im,re,im,cutoff,corrected_re,corrected_im"
    assert len(lines) == 3


@pytest.fixture(scope="module")
def big_circle():
    return circle_triple(2000)


@pytest.mark.parametrize("k", [-2, 1, 3])
def test_cm_residue_proportional_to_winding(big_circle, k):
    g = loop_from_winding([k])
    args = [loop_as_element(g.inverse(), big_circle), loop_as_element(g, big_circle)]
    assert cm_residue_term(big_circle, args, [0]) == pytest.approx(k, abs=1e-6)


def test_cm_residue_vanishing_cases(big_circle):
    g = loop_from_winding([1])
    args = [loop_as_element(g.inverse(), big_circle), loop_as_element(g, big_circle)]
    assert abs(cm_residue_term(big_circle, args, [0], q=1)) < 1e-8
    one = big_circle.identity()
    assert cm_residue_term(big_circle, [one, one], [0]) == 0.0
    scalar = GradedOperator(BlockBanded.identity(4001, 1) * 2.5)
    assert cm_residue_term(big_circle, [scalar, scalar], [0]) == 0.0
    with pytest.raises(ValueError):
        cm_residue_term(big_circle, args, [0, 0])


def test_experimental_local_pairing(big_circle):
    assert experimental_local_pairing(big_circle, loop_from_winding([2])) == pytest.approx(2, abs=1e-6)
