import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hamsham.compress import (
    SENTINEL,
    chain_prune_then_quantize,
    prob_quantize,
    prune,
    reconstruct,
    weight_share,
)
from hamsham.matrix import sparsity

from conftest import EQ1


def best_contiguous_sse(values, counts, k):
    """Exhaustive search over contiguous partitions of sorted values."""
    order = np.argsort(values)
    v, c = np.asarray(values, float)[order], np.asarray(counts, float)[order]
    best = np.inf
    for cuts in itertools.combinations(range(1, len(v)), k - 1):
        edges = (0,) + cuts + (len(v),)
        sse = 0.0
        for a, e in zip(edges[:-1], edges[1:]):
            mu = np.dot(c[a:e], v[a:e]) / c[a:e].sum()
            sse += np.dot(c[a:e], (v[a:e] - mu) ** 2)
        best = min(best, sse)
    return best


def sse_of(W, book, support):
    R = reconstruct(book)
    return float(np.sum((W[support] - R[support]) ** 2))


# --- pruning ---------------------------------------------------------------

def test_prune_p100_zeroes_everything(rng):
    W = rng.normal(size=(6, 4))
    res = prune(W, 100)
    assert not res.matrix.any() and not res.mask.any()


def test_prune_interpolated_threshold():
    W = np.array([[1, -2, 3, -4, 5], [-6, 7, -8, 9, -10]], dtype=float)
    res = prune(W, 50)
    mags = sorted(np.abs(W).ravel())
    assert res.threshold == (mags[4] + mags[5]) / 2 == 5.5
    np.testing.assert_array_equal(res.mask, np.abs(W) > 5.5)
    assert res.mask.sum() == 5


def test_prune_p0_keeps_nonzeros():
    res = prune(EQ1, 0)
    assert res.threshold == 0
    np.testing.assert_array_equal(res.matrix, EQ1)
    assert res.mask.sum() == 7


def test_prune_ties_at_threshold_are_pruned():
    W = np.array([[1.0, 1.0, 1.0, 2.0]])
    res = prune(W, 50)
    assert res.threshold == 1.0
    np.testing.assert_array_equal(res.mask, [[False, False, False, True]])


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.floats(0, 100), st.floats(0, 100))
def test_prune_properties(seed, p1, p2):
    W = np.random.default_rng(seed).normal(size=(7, 5))
    p1, p2 = sorted((p1, p2))
    r1, r2 = prune(W, p1), prune(W, p2)
    # result invariants
    assert np.all(r1.matrix[r1.mask] == W[r1.mask])
    assert np.all((~r1.mask) == ((r1.matrix == 0) & (np.abs(W) <= r1.threshold)))
    # idempotence and monotonicity
    np.testing.assert_array_equal(prune(r1.matrix, p1).matrix, r1.matrix)
    assert np.all(r1.mask | ~r2.mask)
    # density bound, continuous weights have no ties
    assert sparsity(r2.matrix).sparsity_coefficient <= 1 - p2 / 100 + 1 / W.size


# --- weight sharing --------------------------------------------------------

def test_ws_distinct_values_le_k():
    W = np.array([[-1.0, -1.0], [1.0, 1.0]])
    book = weight_share(W, 2)
    np.testing.assert_array_equal(book.centroids, [-1, 1])
    np.testing.assert_array_equal(reconstruct(book), W)


def test_ws_eq1_two_clusters_optimal():
    book = weight_share(EQ1, 2, seed=3)
    nz = EQ1[EQ1 != 0]
    assert book.k == 2
    assert sse_of(EQ1, book, EQ1 != 0) == pytest.approx(best_contiguous_sse(nz, np.ones(7), 2))
    # the optimum splits {1..6} from {10}
    np.testing.assert_allclose(book.centroids, [3.5, 10.0])


def test_ws_constant_matrix_collapses():
    book = weight_share(np.full((3, 3), 2.5), 2)
    assert book.k == 1
    np.testing.assert_array_equal(reconstruct(book), np.full((3, 3), 2.5))


def test_ws_k_lt_2_rejected():
    with pytest.raises(ValueError):
        weight_share(EQ1, 1)


def test_ws_zeros_stay_zero_and_sentinel(rng):
    W = np.where(rng.random((8, 8)) < 0.5, rng.normal(size=(8, 8)), 0.0)
    book = weight_share(W, 3, seed=1)
    assert np.all(book.assignment[W == 0] == SENTINEL)
    assert np.all(reconstruct(book)[W == 0] == 0)


def test_ws_codebook_invariants(rng):
    W = rng.normal(size=(20, 20))
    book = weight_share(W, 5, seed=0)
    assert np.all(np.diff(book.centroids) > 0)
    assert book.assignment.max() < book.k
    assert len(np.unique(reconstruct(book))) <= 5


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 12), st.integers(2, 4))
def test_ws_matches_exhaustive_optimum(seed, n_distinct, k):
    rng = np.random.default_rng(seed)
    values = np.unique(np.round(rng.normal(size=n_distinct) * rng.choice([1, 10]), 3))
    counts = rng.integers(1, 5, size=len(values))
    W = np.repeat(values, counts)[None, :]
    W = W[:, W[0] != 0]
    book = weight_share(W, k, seed=seed)
    vals, cnt = np.unique(W, return_counts=True)
    if len(vals) <= k:
        assert sse_of(W, book, W != 0) == 0
    else:
        opt = best_contiguous_sse(vals, cnt, k)
        assert sse_of(W, book, W != 0) <= opt * (1 + 1e-9) + 1e-12


# --- probabilistic quantization ---------------------------------------------

def test_pq_lower_endpoint_is_deterministic():
    W = np.array([[0.0, 0.25, 1.0]])
    for seed in range(50):
        R = reconstruct(prob_quantize(W, 2, seed=seed))
        assert R[0, 0] == 0.0 and R[0, 2] == 1.0


def test_pq_boundaries_from_quantiles():
    book = prob_quantize(np.array([[0.0, 0.25, 1.0]]), 2, seed=0)
    np.testing.assert_allclose(book.quantization.boundaries, [0, 0.25, 1])
    # 0.25 is itself a boundary: maps to itself
    assert reconstruct(book)[0, 1] == 0.25


def test_pq_midpoint_monte_carlo():
    # w at the middle of its interval: each endpoint with probability 1/2
    W = np.array([[0.0, 0.25, 0.75, 1.0]])  # uniform b=2 intervals: [0, .5], [.5, 1]
    N = 100_000
    draws = np.array([reconstruct(prob_quantize(W, 2, mode="uniform", seed=s))[0, 1]
                      for s in range(N)])
    assert set(np.unique(draws)) == {0.0, 0.5}
    sigma = (0.5 - 0.0) / (2 * np.sqrt(N))
    assert abs(draws.mean() - 0.25) < 3 * sigma


def test_pq_uniform_mode_boundaries(rng):
    W = rng.uniform(-2, 2, size=(6, 6))
    book = prob_quantize(W, 4, mode="uniform", seed=0)
    np.testing.assert_allclose(book.quantization.boundaries, np.linspace(W.min(), W.max(), 5))


def test_pq_degenerate_interval():
    W = np.array([[1.0, 1.0, 1.0, 2.0]])
    book = prob_quantize(W, 4, seed=0)  # several quantiles collapse onto 1.0
    np.testing.assert_array_equal(reconstruct(book)[0, :3], [1, 1, 1])


def test_pq_deterministic_given_seed(rng):
    W = rng.normal(size=(10, 10))
    a, b = prob_quantize(W, 8, seed=7), prob_quantize(W, 8, seed=7)
    np.testing.assert_array_equal(a.assignment, b.assignment)
    np.testing.assert_array_equal(a.centroids, b.centroids)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 40), st.sampled_from(["quantile", "uniform"]))
def test_pq_support_is_boundaries(seed, b, mode):
    W = np.random.default_rng(seed).normal(size=(9, 7))
    book = prob_quantize(W, b, mode=mode, seed=seed)
    bounds = book.quantization.boundaries
    R = reconstruct(book)
    assert np.all(np.isin(R, bounds))
    assert np.all(np.isin(book.centroids, bounds))
    # each entry lands on an endpoint of an interval containing it
    lo = bounds[np.clip(np.searchsorted(bounds, W, side="right") - 1, 0, b - 1)]
    hi = bounds[np.clip(np.searchsorted(bounds, W, side="right"), 1, b)]
    assert np.all((R == lo) | (R == hi))


# --- chaining and reconstruction --------------------------------------------

def test_chain_p100_all_sentinel(rng):
    W = rng.normal(size=(4, 4))
    for method, params in (("WS", {"k": 4}), ("PQ", {"b": 4})):
        pr, book = chain_prune_then_quantize(W, 100, method, **params)
        assert book.k == 0 and np.all(book.assignment == SENTINEL)
        assert not reconstruct(book).any()


def test_chain_eq1_ws_exact():
    pr, book = chain_prune_then_quantize(EQ1, 0, "WS", k=7)
    np.testing.assert_array_equal(reconstruct(book), EQ1)


def test_chain_pq_random(rng):
    W = rng.normal(size=(10, 10))
    pr, book = chain_prune_then_quantize(W, 90, "PQ", b=2, seed=1)
    R = reconstruct(book)
    assert len(np.unique(R[R != 0])) <= 3
    assert sparsity(R).sparsity_coefficient <= 0.1 + 1 / W.size


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 99), st.sampled_from(["WS", "PQ"]))
def test_chain_never_resurrects(seed, p, method):
    W = np.random.default_rng(seed).normal(size=(8, 6))
    params = {"k": 3} if method == "WS" else {"b": 3}
    pr, book = chain_prune_then_quantize(W, p, method, seed=seed, **params)
    assert np.all(reconstruct(book)[~pr.mask] == 0)


def test_reconstruct_roundtrip_and_dims():
    book = weight_share(EQ1, 7)
    np.testing.assert_array_equal(reconstruct(book, EQ1.shape), EQ1)
    with pytest.raises(ValueError):
        reconstruct(book, (4, 4))
