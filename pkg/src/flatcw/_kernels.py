"""Pointwise grid kernels: Lie bracket and polynomial contraction.

Both kernels come in two flavours.  The numba path loops over the nonzero
entries of the structure-constant / polynomial tensor and streams over grid
points; the numpy path is a dense ``einsum``.  Set ``FLATCW_NO_NUMBA=1`` to
force the numpy path (also used automatically when numba is missing).
"""

from __future__ import annotations

import os
import string

import numpy as np

try:  # pragma: no cover - exercised implicitly
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False


def numba_enabled() -> bool:
    flag = os.environ.get("FLATCW_NO_NUMBA", "").strip().lower()
    return HAVE_NUMBA and flag not in ("1", "true", "yes", "on")


def sparse_entries(tensor: np.ndarray, atol: float = 0.0):
    """Index array (K, r) and values (K,) of the nonzero tensor entries, in C order."""
    idx = np.argwhere(np.abs(tensor) > atol)
    vals = tensor[tuple(idx.T)] if idx.size else np.zeros(0, dtype=tensor.dtype)
    return np.ascontiguousarray(idx, dtype=np.int64), np.ascontiguousarray(vals)


if HAVE_NUMBA:

    @numba.njit(cache=True, nogil=True)
    def _bracket_nb(idx, vals, X, Y, out):  # pragma: no cover - compiled
        K = idx.shape[0]
        P = X.shape[1]
        for t in range(K):
            a = idx[t, 0]
            b = idx[t, 1]
            c = idx[t, 2]
            v = vals[t]
            for p in range(P):
                out[a, p] += v * X[b, p] * Y[c, p]
        return out

    @numba.njit(cache=True, nogil=True)
    def _contract_nb(idx, vals, args, out):  # pragma: no cover - compiled
        K = idx.shape[0]
        r = idx.shape[1]
        P = args.shape[2]
        for t in range(K):
            v = vals[t]
            for p in range(P):
                acc = v
                for s in range(r):
                    acc = acc * args[s, idx[t, s], p]
                out[p] += acc
        return out


def _common_dtype(*arrays):
    dt = np.result_type(*arrays)
    return np.complex128 if np.issubdtype(dt, np.complexfloating) else np.float64


def bracket_field(structure: np.ndarray, X: np.ndarray, Y: np.ndarray,
                  sparse=None) -> np.ndarray:
    """Z^a = c^a_{bc} X^b Y^c at every point; X, Y have shape (m, P)."""
    dt = _common_dtype(structure, X, Y)
    if numba_enabled():
        if sparse is None:
            sparse = sparse_entries(structure)
        idx, vals = sparse
        out = np.zeros(X.shape, dtype=dt)
        return _bracket_nb(idx, vals.astype(dt), np.ascontiguousarray(X, dtype=dt),
                           np.ascontiguousarray(Y, dtype=dt), out)
    return np.einsum("abc,bp,cp->ap", structure.astype(dt), X.astype(dt), Y.astype(dt))


def contract_field(tensor: np.ndarray, args, sparse=None) -> np.ndarray:
    """sum tensor[a1..ar] * args[0][a1] * ... * args[r-1][ar] pointwise.

    ``args`` is a sequence of r arrays of shape (m, P); returns shape (P,).
    """
    r = tensor.ndim
    if len(args) != r:
        raise ValueError(f"expected {r} arguments, got {len(args)}")
    dt = _common_dtype(tensor, *args)
    if numba_enabled():
        if sparse is None:
            sparse = sparse_entries(tensor)
        idx, vals = sparse
        stacked = np.ascontiguousarray(np.stack(args), dtype=dt)
        out = np.zeros(stacked.shape[2], dtype=dt)
        return _contract_nb(idx, vals.astype(dt), stacked, out)
    letters = string.ascii_lowercase[:r]
    subs = letters + "," + ",".join(f"{c}z" for c in letters) + "->z"
    return np.einsum(subs, tensor.astype(dt), *[a.astype(dt) for a in args], optimize=True)
