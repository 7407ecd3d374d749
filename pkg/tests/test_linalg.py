import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ncindex.exceptions import GradingError, KernelError, NotHermitianError, ParityError
from ncindex.linalg import (
    BlockBanded,
    GradedOperator,
    GradedSpace,
    as_dense,
    commutator,
    hermitian_eigen,
    sign_operator,
    supertrace,
    svd_kernel_dim,
    trace_product,
)

from conftest import random_hermitian


def test_graded_space_basics():
    s = GradedSpace(2, 3)
    assert s.dim == 5
    assert np.array_equal(s.gamma_diagonal, [1, 1, -1, -1, -1])
    assert s.tensor(2) == GradedSpace(4, 6)
    with pytest.raises(GradingError):
        GradedSpace(0, 0)


def test_parity_detection_and_products():
    s = GradedSpace(1, 1)
    odd = GradedOperator([[0, 1], [1, 0]], space=s)
    even = GradedOperator(np.diag([1.0, 2.0]), space=s)
    assert odd.parity == "odd" and even.parity == "even"
    assert (odd @ odd).parity == "even"
    assert (odd @ even).parity == "odd"
    with pytest.raises(ParityError):
        GradedOperator([[1, 1], [1, 1]], "even", s)


def test_supertrace_needs_grading_and_vanishes_on_odd():
    s = GradedSpace(2, 1)
    assert supertrace(GradedOperator(np.diag([1.0, 2.0, 5.0]), space=s)) == pytest.approx(-2.0)
    with pytest.raises(GradingError):
        supertrace(GradedOperator(np.eye(3)))


def test_hermitian_eigen_rejects_asymmetric():
    with pytest.raises(NotHermitianError) as info:
        hermitian_eigen(np.array([[0, 1], [0, 0]], dtype=complex))
    assert info.value.asymmetry == pytest.approx(1.0)


def test_hermitian_eigen_reconstructs(rng):
    h = random_hermitian(rng, 12)
    w, v = hermitian_eigen(h)
    assert np.allclose((v * w) @ v.conj().T, h, atol=1e-12)
    assert np.all(np.diff(w) >= 0)


def test_sign_operator_is_involution(rng):
    h = random_hermitian(rng, 10)
    F = sign_operator(h).matrix
    assert np.allclose(F @ F, np.eye(10), atol=1e-12)
    assert np.allclose(F, F.conj().T)
    assert np.allclose(commutator(F, h), 0, atol=1e-10)


def test_sign_operator_kernel_conventions():
    D = np.diag([-2.0, 0.0, 3.0])
    F = sign_operator(D).matrix
    assert np.allclose(np.diag(F), [-1, 1, 1])
    with pytest.raises(KernelError):
        sign_operator(D, zero_convention="error")


def test_sign_operator_graded_kernel_stays_odd():
    s = GradedSpace(2, 2)
    D = np.zeros((4, 4), dtype=complex)
    D[2, 0] = D[0, 2] = 1.0  # one kernel vector on each side
    F = sign_operator(GradedOperator(D, "odd", s))
    assert F.parity == "odd"
    assert np.allclose(F.matrix @ F.matrix, np.eye(4), atol=1e-12)


def test_svd_kernel_dim_gap_ratio():
    m = np.diag([3.0, 1.0, 1e-14])
    kc = svd_kernel_dim(m, 1e-8)
    assert kc.dim == 1
    assert kc.gap_ratio < 1e-13
    rect = np.ones((2, 3))
    assert svd_kernel_dim(rect, 1e-8).dim == 2
    with pytest.raises(ValueError):
        svd_kernel_dim(m, 0.0)


@st.composite
def banded_pairs(draw):
    nb = draw(st.integers(2, 6))
    d = draw(st.integers(1, 3))
    seed = draw(st.integers(0, 2**31 - 1))
    r = np.random.default_rng(seed)

    def make():
        offs = draw(st.sets(st.integers(-nb + 1, nb - 1), min_size=1, max_size=3))
        return BlockBanded.toeplitz(nb, {o: r.standard_normal((d, d)) + 1j * r.standard_normal((d, d))
                                         for o in offs})

    return make(), make()


@settings(max_examples=40, deadline=None)
@given(banded_pairs())
def test_block_banded_matches_dense(pair):
    a, b = pair
    A, B = a.to_dense(), b.to_dense()
    assert np.allclose((a @ b).to_dense(), A @ B)
    assert np.allclose((a + b).to_dense(), A + B)
    assert np.allclose(a.H.to_dense(), A.conj().T)
    assert trace_product(a, b) == pytest.approx(np.trace(A @ B))
    assert a.trace() == pytest.approx(np.trace(A))


def test_block_banded_from_dense_roundtrip(rng):
    m = BlockBanded.toeplitz(5, {0: np.eye(2), 2: rng.standard_normal((2, 2))})
    back = BlockBanded.from_dense(m.to_dense(), 2)
    assert np.allclose(back.to_dense(), m.to_dense())
    assert as_dense(GradedOperator(m)).shape == (10, 10)
