import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hamsham.csc import CscMatrix, csc_decode, csc_dot, csc_encode, dense_dot, psi_csc
from hamsham.errors import ContainerError

from conftest import EQ1, random_matrix


def test_encode_eq1_matches_worked_example():
    M = csc_encode(EQ1)
    # worked example vectors are 1-based
    np.testing.assert_array_equal(M.nz, [1, 2, 10, 3, 4, 5, 6])
    np.testing.assert_array_equal(M.ri, np.array([1, 3, 2, 3, 1, 3, 5]) - 1)
    np.testing.assert_array_equal(M.cb, np.array([1, 3, 5, 6, 6, 8]) - 1)


def test_encode_zero_and_dense():
    Z = csc_encode(np.zeros((3, 4)))
    assert Z.nnz == 0 and not Z.cb.any()
    D = csc_encode(np.ones((2, 2)))
    assert D.nnz == 4
    np.testing.assert_array_equal(D.cb, [0, 2, 4])


def test_roundtrips(rng):
    np.testing.assert_array_equal(csc_decode(csc_encode(EQ1)), EQ1)
    np.testing.assert_array_equal(csc_decode(csc_encode(np.zeros((3, 2)))), np.zeros((3, 2)))
    for s in (0.05, 0.5, 1.0):
        for _ in range(100):
            W = random_matrix(rng, 17, 23, s)
            np.testing.assert_array_equal(csc_decode(csc_encode(W)), W)


@pytest.mark.parametrize(
    "nz, ri, cb",
    [
        ([1.0], [0], [0, 0]),           # cb does not reach nnz
        ([1.0], [5], [0, 1]),           # row out of range
        ([0.0], [0], [0, 1]),           # stored zero
        ([1.0, 2.0], [1, 0], [0, 2]),   # rows not increasing within a column
        ([1.0, 2.0], [0, 0], [0, 2]),   # duplicate row
        ([1.0, 2.0], [0, 1], [0, 2, 1]),  # decreasing offsets
    ],
)
def test_decode_rejects_invalid(nz, ri, cb):
    M = CscMatrix(np.array(nz), np.array(ri), np.array(cb), 2, len(cb) - 1)
    with pytest.raises(ContainerError):
        csc_decode(M)


def test_decode_accepts_row_reset_across_columns():
    M = CscMatrix(np.array([1.0, 2.0]), np.array([1, 0]), np.array([0, 1, 2]), 2, 2)
    np.testing.assert_array_equal(csc_decode(M), [[0, 2], [1, 0]])


def test_dot_examples():
    M = csc_encode(EQ1)
    np.testing.assert_array_equal(csc_dot(np.ones(5), M), [3, 13, 4, 0, 11])
    np.testing.assert_array_equal(csc_dot(np.ones(5), M), np.ones(5) @ EQ1)
    for i in range(5):
        np.testing.assert_array_equal(csc_dot(np.eye(5)[i], M), EQ1[i])
    np.testing.assert_array_equal(csc_dot(np.zeros(5), M), np.zeros(5))
    with pytest.raises(ValueError):
        csc_dot(np.ones(4), M)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 30), st.integers(1, 30),
       st.sampled_from([0.0, 0.05, 0.3, 1.0]))
def test_dot_matches_dense(seed, n, m, s):
    rng = np.random.default_rng(seed)
    W = random_matrix(rng, n, m, s)
    x = rng.normal(size=n)
    ref = x @ W
    scale = np.maximum(np.abs(x) @ np.abs(W), 1.0)
    assert np.all(np.abs(csc_dot(x, csc_encode(W)) - ref) <= 1e-9 * scale)
    assert np.all(np.abs(dense_dot(x, W) - ref) <= 1e-9 * scale)


def test_psi_csc_examples():
    assert psi_csc(5, 5, 7) == 0.8
    assert psi_csc(10, 10, 50) == pytest.approx(1.11)
    assert psi_csc(4, 6, 0) == 7 / 24


@given(st.integers(1, 500), st.integers(1, 500), st.floats(0, 1))
def test_psi_csc_compression_needs_half_density(n, m, s):
    q = int(round(s * n * m))
    psi = psi_csc(n, m, q)
    assert (psi < 1) == (2 * q + m + 1 < n * m)
    if q / (n * m) >= 0.5:
        assert psi >= 1
