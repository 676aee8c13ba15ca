"""Dense and sparse numeric kernels with deterministic semantics.

Dense matrices are row-major float64 numpy arrays; sparse matrices are
scipy CSR with sorted indices and no explicit zeros. Repeated
single-threaded runs on identical inputs are bitwise reproducible.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


def dense(values) -> np.ndarray:
    """Materialize a row-major float64 matrix; rejects non-2D or non-finite input."""
    out = np.ascontiguousarray(values, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {out.shape}")
    if not np.isfinite(out).all():
        raise ValueError("matrix contains non-finite values")
    return out


def csr_from_coo(rows, cols, values, shape) -> sp.csr_matrix:
    """Canonical CSR: duplicates summed, column indices sorted, zeros pruned."""
    m = sp.coo_matrix((values, (rows, cols)), shape=shape, dtype=np.float64).tocsr()
    m.sum_duplicates()
    m.sort_indices()
    m.eliminate_zeros()
    return m


def spmm(S: sp.spmatrix, D: np.ndarray) -> np.ndarray:
    """Sparse @ dense product; summation runs in ascending column order per row."""
    if S.shape[1] != D.shape[0]:
        raise ValueError(f"dimension mismatch: {S.shape} @ {D.shape}")
    return np.asarray(S @ D)


def matmul(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    if A.shape[1] != B.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape} @ {B.shape}")
    return A @ B


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def row_softmax(x: np.ndarray) -> np.ndarray:
    """Rows sum to one; max subtraction keeps the exponentials bounded."""
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def mean_over_first_axis(stack) -> np.ndarray:
    """Elementwise mean of a stack of equally shaped matrices."""
    mats = list(stack)
    if not mats:
        raise ValueError("empty stack")
    first = mats[0]
    for m in mats[1:]:
        if m.shape != first.shape:
            raise ValueError(f"shape mismatch in stack: {m.shape} vs {first.shape}")
    total = mats[0].astype(np.float64, copy=True)
    for m in mats[1:]:
        total += m
    return total / len(mats)
