"""Block-level approximation of the attention map.

Queries and keys are mean-pooled along the sequence axis before the score
product, shrinking the probe cost from N^2 d to (N/B)^2 d multiply-adds.
Pooling deliberately covers all queries — lazy/active verdicts never thin
the probe — and the pooled map is block-causal: block J is visible from
block I iff J's first token precedes the end of I, which for a shared
partition is simply J <= I.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .kernels import OpCounter, colsum, matmul, mean_pool_rows, softmax_rows


@dataclass
class BlockProbeMap:
    """Pooled block-causal attention over ceil(N/B) blocks."""

    block_size: int
    attention: np.ndarray
    block_lengths: np.ndarray
    seq_len: int

    @property
    def num_blocks(self) -> int:
        return self.attention.shape[0]


def _block_lengths(n: int, block: int) -> np.ndarray:
    nb = math.ceil(n / block)
    lengths = np.full(nb, block, dtype=np.int64)
    if n % block:
        lengths[-1] = n % block
    return lengths


def probe_attention(
    q: np.ndarray, k: np.ndarray, block_size: int, counter: OpCounter | None = None
) -> BlockProbeMap:
    """Softmax over pooled-Q pooled-K^T with the block-causal mask.

    With ``block_size == 1`` this reproduces the exact token-level causal
    attention matrix. Pooling is counted at one multiply-add per pooled
    input element.
    """
    if block_size < 1:
        raise ParameterError(f"block size must be >= 1, got {block_size}")
    if counter is not None:
        counter.multiply_adds += q.size + k.size
    pq = mean_pool_rows(q, block_size)
    pk = mean_pool_rows(k, block_size)
    scale = 1.0 / np.sqrt(q.shape[1])
    scores = matmul(pq, pk.T, counter) * scale
    nb = pq.shape[0]
    mask = np.tril(np.ones((nb, nb), dtype=bool))
    pooled = softmax_rows(scores, mask, counter)
    return BlockProbeMap(block_size, pooled, _block_lengths(q.shape[0], block_size), q.shape[0])


def block_scores_to_token_scores(pmap: BlockProbeMap, n_tokens: int) -> np.ndarray:
    """Spread each block's accumulated column mass evenly over its tokens.

    The result sums to the pooled map's row count (each pooled row carries
    unit mass), so callers comparing against a retention threshold should
    use the actual total rather than N.
    """
    if n_tokens != pmap.seq_len:
        raise ParameterError(f"map covers {pmap.seq_len} tokens, asked for {n_tokens}")
    block_mass = colsum(pmap.attention)
    per_token = block_mass / pmap.block_lengths.astype(np.float64)
    return np.repeat(per_token, pmap.block_lengths)


def pool_queries(q: np.ndarray, block_size: int) -> np.ndarray:
    """Mean-pool the full query tensor, ignoring any lazy/active masks."""
    return mean_pool_rows(q, block_size)
