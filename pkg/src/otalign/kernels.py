"""Numeric inner-loop kernels with a numba-jitted fast path.

The three hot loops of the package live here: Levenshtein distance,
the token-pairing cost table, and the Sinkhorn row/column scaling.
By default the loops are compiled with ``numba.njit``; setting the
environment variable ``OTALIGN_BACKEND=numpy`` (or running without
numba installed) selects the plain-numpy fallbacks instead.

Backend parity: the levenshtein kernels operate on integers and agree
bitwise. The pairing table intentionally shares one scalar body across
backends because its callers rely on exact float equality between
table entries and path sums (backtrace and the brute-force oracle).
The Sinkhorn fallback is vectorized numpy whose reduction order differs
from the scalar loop; outputs agree within 1e-9.
"""

from __future__ import annotations

import os

import numpy as np

ENV_VAR = "OTALIGN_BACKEND"

# Division guard for the marginal rescaling; row/column sums below this
# are treated as zero mass.
UNDERFLOW_CLAMP = 1e-300


def _levenshtein_scalar(a: np.ndarray, b: np.ndarray) -> int:
    """Unit-cost edit distance between two integer code sequences."""
    n = a.shape[0]
    m = b.shape[0]
    prev = np.arange(m + 1)
    curr = np.empty(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        curr[0] = i
        for j in range(1, m + 1):
            sub = prev[j - 1] + (0 if a[i - 1] == b[j - 1] else 1)
            ins = curr[j - 1] + 1
            dele = prev[j] + 1
            best = sub
            if ins < best:
                best = ins
            if dele < best:
                best = dele
            curr[j] = best
        prev, curr = curr, prev
    return int(prev[m])


def _levenshtein_numpy(a: np.ndarray, b: np.ndarray) -> int:
    """Row-sweep Levenshtein; exact because all arithmetic is integral."""
    n = a.shape[0]
    m = b.shape[0]
    if m == 0:
        return int(n)
    offsets = np.arange(m + 1)
    row = offsets.copy()
    for i in range(1, n + 1):
        sub = row[:-1] + (a[i - 1] != b)
        dele = row[1:] + 1
        g = np.concatenate(([i], np.minimum(sub, dele)))
        # d[j] = min(g[j], d[j-1] + 1) is a running min of g[j] - j.
        row = np.minimum.accumulate(g - offsets) + offsets
    return int(row[m])


def _pairing_table_scalar(cost: np.ndarray) -> np.ndarray:
    """Fill the (N, L) alignment table.

    Every transition (k-1,j), (k,j-1), (k-1,j-1) charges the same cell
    cost, so each table entry is one float add on top of a predecessor.
    The backtrace recovers predecessors by exact equality, which is why
    both backends run this identical body.
    """
    n_tgt, n_src = cost.shape
    f = np.empty((n_tgt, n_src))
    f[0, 0] = cost[0, 0]
    for j in range(1, n_src):
        f[0, j] = f[0, j - 1] + cost[0, j]
    for k in range(1, n_tgt):
        f[k, 0] = f[k - 1, 0] + cost[k, 0]
        for j in range(1, n_src):
            c = cost[k, j]
            best = f[k - 1, j - 1] + c
            up = f[k - 1, j] + c
            if up < best:
                best = up
            left = f[k, j - 1] + c
            if left < best:
                best = left
            f[k, j] = best
    return f


def _sinkhorn_scalar(K, a, b, threshold, max_iters):
    """Alternating row/column rescaling of the Gibbs kernel K.

    Returns (plan, iterations, converged, finite). Rows or columns with
    zero marginal mass are pinned to zero and skipped when rescaling.
    Convergence is the max of the two L1 marginal deviations.
    """
    n, m = K.shape
    t = K.copy()
    iters = 0
    converged = False
    finite = True
    for it in range(1, max_iters + 1):
        for x in range(n):
            s = 0.0
            for y in range(m):
                s += t[x, y]
            if a[x] > 0.0:
                factor = a[x] / max(s, UNDERFLOW_CLAMP)
                for y in range(m):
                    t[x, y] *= factor
            else:
                for y in range(m):
                    t[x, y] = 0.0
        for y in range(m):
            s = 0.0
            for x in range(n):
                s += t[x, y]
            if b[y] > 0.0:
                factor = b[y] / max(s, UNDERFLOW_CLAMP)
                for x in range(n):
                    t[x, y] *= factor
            else:
                for x in range(n):
                    t[x, y] = 0.0
        row_err = 0.0
        for x in range(n):
            s = 0.0
            for y in range(m):
                s += t[x, y]
            row_err += abs(s - a[x])
        col_err = 0.0
        for y in range(m):
            s = 0.0
            for x in range(n):
                s += t[x, y]
            col_err += abs(s - b[y])
        err = row_err if row_err > col_err else col_err
        iters = it
        if not np.isfinite(err):
            finite = False
            break
        if err <= threshold:
            converged = True
            break
    return t, iters, converged, finite


def _sinkhorn_numpy(K, a, b, threshold, max_iters):
    """Vectorized Sinkhorn scaling; same contract as the scalar body."""
    t = K.copy()
    row_live = a > 0.0
    col_live = b > 0.0
    iters = 0
    converged = False
    finite = True
    for it in range(1, max_iters + 1):
        row_sums = t.sum(axis=1)
        t *= np.where(row_live, a / np.maximum(row_sums, UNDERFLOW_CLAMP), 0.0)[:, None]
        col_sums = t.sum(axis=0)
        t *= np.where(col_live, b / np.maximum(col_sums, UNDERFLOW_CLAMP), 0.0)[None, :]
        err = max(np.abs(t.sum(axis=1) - a).sum(), np.abs(t.sum(axis=0) - b).sum())
        iters = it
        if not np.isfinite(err):
            finite = False
            break
        if err <= threshold:
            converged = True
            break
    return t, iters, converged, finite


_NUMPY_IMPLS = {
    "levenshtein": _levenshtein_numpy,
    "pairing_table": _pairing_table_scalar,
    "sinkhorn_scale": _sinkhorn_numpy,
}

_numba_impls: dict | None = None


def _build_numba_impls() -> dict:
    global _numba_impls
    if _numba_impls is None:
        from numba import njit

        _numba_impls = {
            "levenshtein": njit(cache=True)(_levenshtein_scalar),
            "pairing_table": njit(cache=True)(_pairing_table_scalar),
            "sinkhorn_scale": njit(cache=True)(_sinkhorn_scalar),
        }
    return _numba_impls


def get_impls(name: str) -> dict:
    """Implementation table for an explicit backend ("numba" or "numpy")."""
    if name == "numpy":
        return _NUMPY_IMPLS
    if name == "numba":
        return _build_numba_impls()
    raise ValueError(f"unknown backend {name!r}")


def _select_backend() -> str:
    choice = os.environ.get(ENV_VAR, "numba").strip().lower()
    if choice not in ("numba", "numpy"):
        raise ValueError(f"{ENV_VAR} must be 'numba' or 'numpy', got {choice!r}")
    if choice == "numba":
        try:
            import numba  # noqa: F401
        except ImportError:
            return "numpy"
    return choice


_BACKEND = _select_backend()
_active = get_impls(_BACKEND)

levenshtein = _active["levenshtein"]
pairing_table = _active["pairing_table"]
sinkhorn_scale = _active["sinkhorn_scale"]


def backend() -> str:
    """Name of the backend selected at import time."""
    return _BACKEND
