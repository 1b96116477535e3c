"""NumPy fallback for the row-wise kernel core.

Semantics must stay in lockstep with ``_core_cy``: the wrapper layer in
``kernels`` validates inputs and does the op accounting, so both backends
receive clean float64 C-contiguous arrays and just compute.
"""

from __future__ import annotations

import numpy as np


def softmax_rows(scores: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Max-subtracted row softmax; masked cells come out exactly 0."""
    if mask is None:
        shifted = scores - scores.max(axis=1, keepdims=True)
        e = np.exp(shifted)
    else:
        neg = np.where(mask, scores, -np.inf)
        e = np.exp(neg - neg.max(axis=1, keepdims=True))
        e[~mask] = 0.0
    return e / e.sum(axis=1, keepdims=True)


def mean_pool_rows(m: np.ndarray, block: int) -> np.ndarray:
    """Mean over consecutive row blocks; a short tail averages its true length."""
    rows = m.shape[0]
    starts = np.arange(0, rows, block)
    lengths = np.minimum(starts + block, rows) - starts
    return np.add.reduceat(m, starts, axis=0) / lengths[:, None].astype(np.float64)


def kurtosis(v: np.ndarray) -> float:
    """Pearson kurtosis m4/m2^2 with 1/n moments; 0.0 for zero-variance input."""
    d = v - v.mean()
    m2 = float(np.mean(d * d))
    if m2 == 0.0:
        return 0.0
    m4 = float(np.mean(d * d * d * d))
    return m4 / (m2 * m2)


def colsum(m: np.ndarray) -> np.ndarray:
    return m.sum(axis=0)
