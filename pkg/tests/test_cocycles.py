import numpy as np
import pytest

from ncindex.calibration import load_table
from ncindex.cocycles import (
    ChernCocycle,
    check_cyclicity,
    check_hochschild,
    even_normalization,
    evaluate,
    odd_normalization_closed_form,
    odd_normalization_gamma,
    phi_from_tau,
    tau_even,
    tau_odd,
)
from ncindex.exceptions import ParityError
from ncindex.ktheory import loop_as_element, loop_from_winding
from ncindex.linalg import GradedOperator, as_dense
from ncindex.triples import circle_triple, compress_symbol, compress_torus_symbol, torus2_dirac


def test_phi_from_tau_values():
    assert phi_from_tau(1, 6) == 6
    assert phi_from_tau(2, 2) == -1
    assert phi_from_tau(3, 12) == -2
    with pytest.raises(ValueError):
        phi_from_tau(-1, 1.0)


def test_normalizations():
    assert even_normalization(0) == 0.5 and even_normalization(4) == 1
    for n in (1, 3, 5):
        assert float(odd_normalization_closed_form(n)) == pytest.approx(odd_normalization_gamma(n))
    table = load_table()
    for n in (1, 3, 5):
        assert table.odd_normalization(n) == pytest.approx(float(odd_normalization_closed_form(n)))


def _torus_symbol(rng, K, band=1, amp=1):
    c = rng.standard_normal((2 * band + 1, 2 * band + 1, amp, amp)) * (1 + 1j)
    return np.kron(np.eye(2), compress_torus_symbol(c, K))


def _circle_symbol(rng, N, band=1):
    coeffs = {j: complex(*rng.standard_normal(2)) for j in range(-band, band + 1)}
    return coeffs, compress_symbol(coeffs, N)


def test_tau_even_matches_naive_expansion(rng):
    T = torus2_dirac(1)
    co = ChernCocycle.for_triple(T, 2)
    args = [GradedOperator(_torus_symbol(rng, 1), "even", T.space) for _ in range(3)]
    F = co.F.matrix
    c = [F @ a.matrix - a.matrix @ F for a in args]
    g = T.space.gamma_diagonal
    n = T.dim
    naive = 0j
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    naive += g[i] * F[i, j] * c[0][j, k] * c[1][k, l] * c[2][l, i]
    assert tau_even(co, args) == pytest.approx(0.5 * naive, abs=1e-10)


def test_identity_argument_gives_zero(rng):
    T = torus2_dirac(2)
    co = ChernCocycle.for_triple(T, 2)
    a = GradedOperator(_torus_symbol(rng, 2), "even", T.space)
    assert tau_even(co, [a, T.identity(), a]) == 0
    c = circle_triple(8)
    odd = ChernCocycle.for_triple(c, 1)
    _, f = _circle_symbol(rng, 8)
    assert tau_odd(odd, [c.identity(), f]) == 0


def test_parity_errors():
    T = torus2_dirac(1)
    with pytest.raises(ParityError):
        tau_even(ChernCocycle.for_triple(T, 0), [GradedOperator(np.eye(T.dim))])
    with pytest.raises(ValueError):
        ChernCocycle.for_triple(T, 1)
    with pytest.raises(ValueError):
        tau_odd(ChernCocycle.for_triple(T, 2), [T.identity()] * 3)


def test_odd_degree_one_fourier_formula(rng):
    N = 24
    c = circle_triple(N)
    co = ChernCocycle.for_triple(c, 1)
    fc, f = _circle_symbol(rng, N, 2)
    gc, g = _circle_symbol(rng, N, 2)
    series = sum(n * fc.get(-n, 0) * gc.get(n, 0) for n in range(-2, 3))
    assert tau_odd(co, [f, g]) == pytest.approx(series, abs=1e-12)


def test_winding_one_degree_one_term_is_one():
    c = circle_triple(16)
    co = ChernCocycle.for_triple(c, 1)
    g = loop_from_winding([1])
    val = phi_from_tau(1, tau_odd(co, [loop_as_element(g.inverse(), c), loop_as_element(g, c)]))
    assert val == pytest.approx(1.0, abs=1e-12)


def test_cyclicity_interior_arguments(rng):
    c = circle_triple(24)
    co = ChernCocycle.for_triple(c, 3)
    args = [_circle_symbol(rng, 24)[1] for _ in range(4)]
    assert check_cyclicity(co, args) < 1e-10
    T = torus2_dirac(3)
    ce = ChernCocycle.for_triple(T, 2)
    eargs = [GradedOperator(_torus_symbol(rng, 3), "even", T.space) for _ in range(3)]
    assert check_cyclicity(ce, eargs) < 1e-10


def test_multilinearity(rng):
    T = torus2_dirac(2)
    co = ChernCocycle.for_triple(T, 2)
    a, b, x, y = (GradedOperator(_torus_symbol(rng, 2), "even", T.space) for _ in range(4))
    lhs = tau_even(co, [a, 2.0 * x + (-3.0) * y, b])
    rhs = 2.0 * tau_even(co, [a, x, b]) - 3.0 * tau_even(co, [a, y, b])
    assert lhs == pytest.approx(rhs, abs=1e-10)


def test_hochschild_exact_products(rng):
    c = circle_triple(16)
    co = ChernCocycle.for_triple(c, 1)
    args = [_circle_symbol(rng, 16)[1] for _ in range(3)]
    assert check_hochschild(co, args) < 1e-8


def _torus_hochschild(K, seed):
    r = np.random.default_rng(seed)
    T = torus2_dirac(K)
    co = ChernCocycle.for_triple(T, 2)
    coeffs = [r.standard_normal((3, 3)) * (1 + 0.5j) for _ in range(4)]
    def op(c):
        return GradedOperator(np.kron(np.eye(2), compress_torus_symbol(c, K)), "even", T.space)
    args = [op(c) for c in coeffs]
    from scipy.signal import convolve2d
    prods = [op(convolve2d(coeffs[j], coeffs[(j + 1) % 4])) for j in range(4)]
    return check_hochschild(co, args, prods)


def test_hochschild_decreases_with_cutoff():
    a, b = _torus_hochschild(4, 1), _torus_hochschild(8, 1)
    assert b < a


def test_evaluate_matches_tau(rng):
    c = circle_triple(8)
    co = ChernCocycle.for_triple(c, 1)
    _, f = _circle_symbol(rng, 8)
    _, g = _circle_symbol(rng, 8)
    assert evaluate(co, [f, g]) == tau_odd(co, [f, g])
