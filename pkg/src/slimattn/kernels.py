"""Counted dense kernels: matmul, stable softmax, pooling, kurtosis.

Every arithmetic-heavy operation in the package flows through this module so
that op accounting lives in exactly one place. Tensors are plain float64
C-contiguous 2-D ``np.ndarray`` values; ``as_matrix`` is the constructor
that establishes the invariants (finite entries, row-major layout) and the
kernels re-check finiteness on their outputs.

Counting conventions
--------------------
``multiply_adds`` counts one unit per scalar multiply-accumulate:

* ``matmul(a, b)``            -> ``a.rows * a.cols * b.cols``
* mean pooling an ``m x d``   -> ``m * d`` (one accumulate per input element;
  the final scale by 1/len folds into the unit)

``exponentials`` and ``comparisons`` count one per unmasked softmax cell
(the exp itself and the row-max scan). Softmax internals, score reductions
and sort comparisons during selection are excluded from ``multiply_adds``;
the ratio-style reports treat multiply-adds as the headline quantity and
keep exponentials as a separate column.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import core
from .errors import DegenerateRowError, ParameterError, ShapeError


@dataclass
class OpCounter:
    """Additive per-run accumulator of counted operations.

    Parallel callers own one counter per unit of work and merge them with
    ``merge`` afterwards; counters only ever grow.
    """

    multiply_adds: int = 0
    exponentials: int = 0
    comparisons: int = 0

    def merge(self, other: "OpCounter") -> None:
        self.multiply_adds += other.multiply_adds
        self.exponentials += other.exponentials
        self.comparisons += other.comparisons

    def snapshot(self) -> "OpCounter":
        return OpCounter(self.multiply_adds, self.exponentials, self.comparisons)


def as_matrix(data, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Coerce to a float64 C-contiguous 2-D array and validate finiteness."""
    m = np.ascontiguousarray(data, dtype=np.float64)
    if m.ndim == 1 and rows is not None and cols is not None:
        if m.size != rows * cols:
            raise ShapeError(f"flat data of length {m.size} cannot fill {rows}x{cols}")
        m = m.reshape(rows, cols)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={m.ndim}")
    check_finite(m, "matrix construction")
    return m


def check_finite(m: np.ndarray, context: str) -> None:
    if not np.isfinite(m).all():
        raise ParameterError(f"non-finite values after {context}")


def matmul(a: np.ndarray, b: np.ndarray, counter: OpCounter | None = None) -> np.ndarray:
    """Dense product ``a @ b`` counting ``rows*inner*cols`` multiply-adds."""
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shapes incompatible: {a.shape} @ {b.shape}")
    if counter is not None:
        counter.multiply_adds += a.shape[0] * a.shape[1] * b.shape[1]
    out = np.matmul(a, b)
    check_finite(out, "matmul")
    return out


def softmax_rows(
    m: np.ndarray,
    mask: np.ndarray | None = None,
    counter: OpCounter | None = None,
) -> np.ndarray:
    """Row-wise stable softmax over unmasked cells.

    Masked cells are exactly 0 in the output and every row sums to 1.
    Raises ``DegenerateRowError`` when a row has no unmasked cell.
    """
    if m.shape[1] == 0:
        raise DegenerateRowError("softmax over zero columns")
    if mask is not None:
        if mask.shape != m.shape:
            raise ShapeError(f"mask shape {mask.shape} does not match matrix {m.shape}")
        mask = np.ascontiguousarray(mask, dtype=bool)
        row_alive = mask.any(axis=1)
        if not row_alive.all():
            dead = int(np.flatnonzero(~row_alive)[0])
            raise DegenerateRowError(f"softmax row {dead} is fully masked")
        unmasked = int(mask.sum())
    else:
        unmasked = m.shape[0] * m.shape[1]
    if counter is not None:
        counter.exponentials += unmasked
        counter.comparisons += unmasked
    out = core.softmax_rows(np.ascontiguousarray(m, dtype=np.float64), mask)
    check_finite(out, "softmax_rows")
    return out


def mean_pool_rows(m: np.ndarray, block: int) -> np.ndarray:
    """Mean-pool rows in consecutive blocks; the final short block averages
    over its true length."""
    if block < 1:
        raise ParameterError(f"pooling block must be >= 1, got {block}")
    out = core.mean_pool_rows(np.ascontiguousarray(m, dtype=np.float64), block)
    check_finite(out, "mean_pool_rows")
    return out


def kurtosis(v: np.ndarray) -> float:
    """Pearson (non-excess) kurtosis m4/m2^2 with 1/n central moments.

    A zero-variance vector is the limiting flat case and returns 0.0, which
    sorts it below any genuine distribution (m4/m2^2 >= 1 otherwise).
    """
    v = np.ascontiguousarray(v, dtype=np.float64).ravel()
    if v.size < 2:
        raise ParameterError(f"kurtosis needs at least 2 samples, got {v.size}")
    return float(core.kurtosis(v))


def colsum(m: np.ndarray) -> np.ndarray:
    """Per-column totals (reduction over the row axis); not op-counted."""
    return np.asarray(core.colsum(np.ascontiguousarray(m, dtype=np.float64)))
