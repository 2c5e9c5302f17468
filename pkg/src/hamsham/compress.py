"""Lossy transforms: magnitude pruning, k-means weight sharing and
probabilistic quantization, alone or chained after pruning."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .matrix import as_matrix, percentile, quantiles

__all__ = [
    "SENTINEL",
    "PruneResult",
    "QuantizationSpec",
    "Codebook",
    "prune",
    "weight_share",
    "prob_quantize",
    "chain_prune_then_quantize",
    "reconstruct",
    "distortion",
]

#: assignment value for entries that are pruned / zero
SENTINEL = -1


@dataclass(frozen=True)
class PruneResult:
    matrix: np.ndarray
    mask: np.ndarray  # True where the weight survives
    threshold: float


@dataclass(frozen=True)
class QuantizationSpec:
    boundaries: np.ndarray
    mode: str
    seed: int


@dataclass(frozen=True)
class Codebook:
    """Representative values plus a per-entry index into them.

    ``assignment`` has the matrix shape; ``SENTINEL`` marks entries that
    reconstruct to zero.
    """
    centroids: np.ndarray
    assignment: np.ndarray
    quantization: QuantizationSpec | None = field(default=None, compare=False)

    @property
    def shape(self):
        return self.assignment.shape

    @property
    def k(self) -> int:
        return len(self.centroids)


def prune(W, p: float) -> PruneResult:
    """Zero every weight whose magnitude is at or below the ``p``-th percentile
    of ``|W|`` (stored zeros included)."""
    W = as_matrix(W)
    threshold = percentile(np.abs(W), p)
    mask = np.abs(W) > threshold
    out = np.where(mask, W, 0.0)
    out.setflags(write=False)
    mask.setflags(write=False)
    return PruneResult(out, mask, threshold)


def _support(W, mask, drop_zeros):
    support = np.ones(W.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if support.shape != W.shape:
        raise ValueError(f"mask shape {support.shape} does not match matrix {W.shape}")
    if drop_zeros:
        support = support & (W != 0)
    return support


def _codebook_from_values(shape, support, values, quantization=None) -> Codebook:
    """Build a codebook whose centroids are the distinct entries of ``values``
    (the reconstructed weights on ``support``)."""
    centroids, inverse = np.unique(values, return_inverse=True)
    assignment = np.full(shape, SENTINEL, dtype=np.int32)
    assignment[support] = inverse.ravel()
    centroids.setflags(write=False)
    assignment.setflags(write=False)
    return Codebook(centroids, assignment, quantization)


def _kmeanspp(values, weights, k, rng):
    centers = [values[rng.choice(len(values), p=weights / weights.sum())]]
    for _ in range(1, k):
        d2 = np.min((values[:, None] - np.asarray(centers)[None, :]) ** 2, axis=1) * weights
        total = d2.sum()
        if total <= 0:
            break
        centers.append(values[rng.choice(len(values), p=d2 / total)])
    return np.sort(np.asarray(centers, dtype=np.float64))


def _assign(values, centers):
    # centers sorted ascending: nearest center via midpoints
    return np.searchsorted((centers[1:] + centers[:-1]) / 2, values, side="left")


def _lloyd(values, weights, centers, tol, max_iter):
    for _ in range(max_iter):
        labels = _assign(values, centers)
        sums = np.bincount(labels, weights=weights * values, minlength=len(centers))
        mass = np.bincount(labels, weights=weights, minlength=len(centers))
        new = centers.copy()
        filled = mass > 0
        new[filled] = sums[filled] / mass[filled]
        if not filled.all():
            # re-seed each empty cluster at the value farthest from its centroid
            dist = np.abs(values - centers[labels])
            for j in np.flatnonzero(~filled):
                far = int(np.argmax(dist))
                new[j] = values[far]
                dist[far] = -1.0
        order = np.argsort(new, kind="stable")
        new = new[order]
        shift = np.max(np.abs(new - centers))
        centers = new
        if shift <= tol:
            break
    labels = _assign(values, centers)
    sse = float(np.sum(weights * (values - centers[labels]) ** 2))
    return centers, sse


def _optimal_centers(values, weights, k):
    """Globally optimal weighted 1-D k-means over sorted ``values`` by dynamic
    programming on contiguous partitions, O(k L^2)."""
    L = len(values)
    cw = np.concatenate(([0.0], np.cumsum(weights)))
    cx = np.concatenate(([0.0], np.cumsum(weights * values)))
    cxx = np.concatenate(([0.0], np.cumsum(weights * values ** 2)))

    def cost(starts, end):
        w = cw[end] - cw[starts]
        s = cx[end] - cx[starts]
        return cxx[end] - cxx[starts] - s * s / w

    # best[j][i]: min SSE of the first i values in j + 1 clusters
    best = np.full((k, L + 1), np.inf)
    arg = np.zeros((k, L + 1), dtype=np.int64)
    best[0, 1:] = cost(np.zeros(L, dtype=np.int64), np.arange(1, L + 1))
    for j in range(1, k):
        for i in range(j + 1, L + 1):
            starts = np.arange(j, i)
            total = best[j - 1, starts] + cost(starts, i)
            t = int(np.argmin(total))
            best[j, i], arg[j, i] = total[t], starts[t]
    cuts, end = [], L
    for j in range(k - 1, 0, -1):
        start = arg[j, end]
        cuts.append((start, end))
        end = start
    cuts.append((0, end))
    return np.array(sorted((cx[e] - cx[a]) / (cw[e] - cw[a]) for a, e in cuts))


#: above this many distinct values the exact seeding is skipped
EXACT_SEED_LIMIT = 1024


def kmeans_1d(values, weights, k: int, seed=0, n_init: int = 10, tol: float = 1e-9,
              max_iter: int = 300) -> np.ndarray:
    """Weighted scalar k-means; returns the sorted distinct centroids.

    Lloyd iterations are run from ``n_init`` k-means++ seedings and, for
    small supports, from the exact dynamic-programming optimum as well (a
    Lloyd fixed point); the lowest-SSE result wins. ``values`` must be
    sorted and distinct.
    """
    values = np.asarray(values, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    rng = np.random.default_rng(seed)
    inits = [_kmeanspp(values, weights, k, rng) for _ in range(n_init)]
    if len(values) <= EXACT_SEED_LIMIT:
        inits.append(_optimal_centers(values, weights, k))
    best, best_sse = None, np.inf
    for init in inits:
        centers, sse = _lloyd(values, weights, init, tol, max_iter)
        if sse < best_sse:
            best, best_sse = centers, sse
    labels = _assign(values, best)
    return np.unique(best[np.unique(labels)])


def weight_share(W, k: int, seed=0, mask=None, n_init: int = 10) -> Codebook:
    """Cluster the nonzero (and, if given, unmasked) weights into at most ``k``
    shared values.

    Exact zeros are never clustered and reconstruct to zero. When the support
    holds at most ``k`` distinct values they become the centroids unchanged.
    """
    if k < 2:
        raise ValueError(f"weight sharing needs k >= 2, got {k}")
    W = as_matrix(W)
    support = _support(W, mask, drop_zeros=True)
    vals = W[support]
    if vals.size == 0:
        return _codebook_from_values(W.shape, support, vals)
    distinct, counts = np.unique(vals, return_counts=True)
    if len(distinct) <= k:
        return _codebook_from_values(W.shape, support, vals)
    centers = kmeans_1d(distinct, counts, k, seed=seed, n_init=n_init)
    return _codebook_from_values(W.shape, support, centers[_assign(vals, centers)])


def prob_quantize(W, b: int, mode: str = "quantile", seed=0, mask=None) -> Codebook:
    """Stochastically round each weight to an endpoint of its interval.

    The weight range is split into ``b`` intervals whose extremes are the
    empirical quantiles (``mode="quantile"``) or equally spaced
    (``mode="uniform"``). A weight ``w`` in ``[lo, hi]`` becomes ``hi`` with
    probability ``(w - lo) / (hi - lo)`` and ``lo`` otherwise, so its
    expectation is ``w``. Without a mask every entry, zeros included, is
    quantized; with a mask only the unmasked entries are.
    """
    if b < 2:
        raise ValueError(f"probabilistic quantization needs b >= 2, got {b}")
    if mode not in ("quantile", "uniform"):
        raise ValueError(f"unknown interval mode {mode!r}")
    W = as_matrix(W)
    support = _support(W, mask, drop_zeros=False)
    vals = W[support]
    if vals.size == 0:
        spec = QuantizationSpec(np.zeros(0), mode, seed)
        return _codebook_from_values(W.shape, support, vals, spec)
    if mode == "quantile":
        bounds = quantiles(vals, b)
    else:
        bounds = np.linspace(vals.min(), vals.max(), b + 1)
    idx = np.clip(np.searchsorted(bounds, vals, side="right") - 1, 0, b - 1)
    lo, hi = bounds[idx], bounds[idx + 1]
    width = hi - lo
    p_up = np.divide(vals - lo, width, out=np.zeros_like(vals), where=width > 0)
    rng = np.random.default_rng(seed)
    out = np.where(rng.random(vals.size) < p_up, hi, lo)
    spec = QuantizationSpec(bounds, mode, seed)
    return _codebook_from_values(W.shape, support, out, spec)


def chain_prune_then_quantize(W, p: float, method: str = "WS", **params):
    """Prune at percentile ``p`` then quantize only the surviving weights.

    ``method`` is ``"WS"`` (params of :func:`weight_share`) or ``"PQ"``
    (params of :func:`prob_quantize`).
    """
    pruned = prune(W, p)
    method = method.upper()
    if method == "WS":
        book = weight_share(pruned.matrix, mask=pruned.mask, **params)
    elif method == "PQ":
        book = prob_quantize(pruned.matrix, mask=pruned.mask, **params)
    else:
        raise ValueError(f"unknown quantizer {method!r}; expected WS or PQ")
    return pruned, book


def reconstruct(codebook: Codebook, dims=None) -> np.ndarray:
    assign = codebook.assignment
    if dims is not None and tuple(dims) != assign.shape:
        raise ValueError(f"codebook covers {assign.shape}, asked for {tuple(dims)}")
    out = np.zeros(assign.shape, dtype=np.float64)
    hit = assign != SENTINEL
    out[hit] = codebook.centroids[assign[hit]]
    return out


def distortion(original, approx) -> float:
    """Mean squared reconstruction error."""
    return float(np.mean((np.asarray(original) - np.asarray(approx)) ** 2))
