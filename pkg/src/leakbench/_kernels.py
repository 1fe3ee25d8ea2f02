"""Brute-force distance kernels shared by the resamplers.

Two interchangeable backends: numba-jitted loops (default) and a pure
numpy path selected by setting ``LEAKBENCH_NUMBA=0`` (the numpy path is
also used automatically when numba is not installed).  Both accumulate
squared differences feature by feature in the same order, so their
outputs are bit-identical; ``benchmarks/kernel_bench.py`` times them
against each other.

Distance ties are broken toward the lower reference row index.  All
searches are exhaustive O(n_query * n_ref); callers that run them on
very large inputs are expected to gate that behind an explicit opt-in.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = ["backend_name", "knn", "pairwise_sq_dists"]

# Cap the (chunk, n_ref) scratch matrix of the numpy path at ~128 MB.
_CHUNK_ELEMS = 2**24


def _env_wants_numba() -> bool:
    flag = os.environ.get("LEAKBENCH_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "no", "off")


try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False

_USE_NUMBA = _HAVE_NUMBA and _env_wants_numba()


def backend_name() -> str:
    """Name of the kernel backend selected at import time."""
    return "numba" if _USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy backend
# ---------------------------------------------------------------------------


def _sq_dists_numpy(query: np.ndarray, ref: np.ndarray) -> np.ndarray:
    # Feature-by-feature accumulation mirrors the jitted loop exactly,
    # keeping both backends bit-identical.
    out = np.zeros((query.shape[0], ref.shape[0]))
    for j in range(query.shape[1]):
        diff = query[:, j, None] - ref[None, :, j]
        out += diff * diff
    return out


def _knn_numpy(query, ref, k, self_idx):
    n_query = query.shape[0]
    n_ref = ref.shape[0]
    idx = np.empty((n_query, k), dtype=np.int64)
    sqd = np.empty((n_query, k), dtype=np.float64)
    chunk = max(1, _CHUNK_ELEMS // max(n_ref, 1))
    for start in range(0, n_query, chunk):
        stop = min(n_query, start + chunk)
        dists = _sq_dists_numpy(query[start:stop], ref)
        excl = self_idx[start:stop]
        rows = np.nonzero(excl >= 0)[0]
        dists[rows, excl[rows]] = np.inf
        # stable sort keeps the lower reference index first on ties
        order = np.argsort(dists, axis=1, kind="stable")[:, :k]
        idx[start:stop] = order
        sqd[start:stop] = np.take_along_axis(dists, order, axis=1)
    return idx, sqd


# ---------------------------------------------------------------------------
# numba backend
# ---------------------------------------------------------------------------

if _HAVE_NUMBA:

    @njit(cache=True)
    def _sq_dists_numba(query, ref):  # pragma: no cover - jitted
        n_query, n_feat = query.shape
        n_ref = ref.shape[0]
        out = np.empty((n_query, n_ref))
        for i in range(n_query):
            for l in range(n_ref):
                acc = 0.0
                for j in range(n_feat):
                    d = query[i, j] - ref[l, j]
                    acc += d * d
                out[i, l] = acc
        return out

    @njit(cache=True)
    def _knn_numba(query, ref, k, self_idx):  # pragma: no cover - jitted
        n_query, n_feat = query.shape
        n_ref = ref.shape[0]
        idx = np.empty((n_query, k), dtype=np.int64)
        sqd = np.empty((n_query, k), dtype=np.float64)
        dists = np.empty(n_ref)
        for i in range(n_query):
            for l in range(n_ref):
                acc = 0.0
                for j in range(n_feat):
                    d = query[i, j] - ref[l, j]
                    acc += d * d
                dists[l] = acc
            skip = self_idx[i]
            for rank in range(k):
                best = -1
                best_d = np.inf
                for l in range(n_ref):
                    if l == skip:
                        continue
                    taken = False
                    for t in range(rank):
                        if idx[i, t] == l:
                            taken = True
                            break
                    if taken:
                        continue
                    # strict < keeps the lowest index among ties
                    if dists[l] < best_d:
                        best_d = dists[l]
                        best = l
                idx[i, rank] = best
                sqd[i, rank] = best_d
        return idx, sqd


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def _as_matrix(x: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(x, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {x.shape}")
    return out


def pairwise_sq_dists(query: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, shape (n_query, n_ref)."""
    query = _as_matrix(query)
    ref = _as_matrix(ref)
    if query.shape[1] != ref.shape[1]:
        raise ValueError("query and ref must have the same number of columns")
    if _USE_NUMBA:
        return _sq_dists_numba(query, ref)
    return _sq_dists_numpy(query, ref)


def knn(
    query: np.ndarray,
    ref: np.ndarray,
    k: int,
    self_idx: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """k nearest reference rows for every query row.

    ``self_idx[i]`` names a reference row excluded from row i's search
    (-1 for none); pass it when the query rows are themselves part of
    ``ref``.  Returns ``(indices, squared_distances)``, each of shape
    (n_query, k), nearest first, ties broken toward the lower index.
    """
    query = _as_matrix(query)
    ref = _as_matrix(ref)
    if query.shape[1] != ref.shape[1]:
        raise ValueError("query and ref must have the same number of columns")
    if self_idx is None:
        self_idx = np.full(query.shape[0], -1, dtype=np.int64)
    else:
        self_idx = np.ascontiguousarray(self_idx, dtype=np.int64)
        if self_idx.shape != (query.shape[0],):
            raise ValueError("self_idx must have one entry per query row")
    if k < 1:
        raise ValueError("k must be at least 1")
    eligible = ref.shape[0] - (1 if np.any(self_idx >= 0) else 0)
    if k > eligible:
        raise ValueError(f"k={k} exceeds the {eligible} eligible reference rows")
    if _USE_NUMBA:
        return _knn_numba(query, ref, k, self_idx)
    return _knn_numpy(query, ref, k, self_idx)
