"""Full multi-head attention oracle with causal masking.

This is the ground truth the sparse paths are measured against: it always
materializes the attention matrices, so recall and equivalence checks can
read them directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import LayoutError, ShapeError
from .kernels import OpCounter, matmul, softmax_rows


@dataclass(frozen=True)
class TokenLayout:
    """Partition of the sequence into vision, text and answer spans.

    The sequence is ordered vision first, then text, then answer tokens.
    ``sink_index`` names the attention-sink position used as the lazy probe
    key (the first token by default).
    """

    n_vision: int
    n_text: int
    n_answer: int = 0
    sink_index: int = 0

    def __post_init__(self):
        if self.n_vision < 0 or self.n_text < 0 or self.n_answer < 0:
            raise LayoutError("span lengths must be non-negative")
        if not 0 <= self.sink_index < self.n_vision + self.n_text:
            raise LayoutError(
                f"sink_index {self.sink_index} outside prompt of length "
                f"{self.n_vision + self.n_text}"
            )

    @property
    def total(self) -> int:
        return self.n_vision + self.n_text + self.n_answer


@dataclass
class AttentionWorkload:
    """Per-head Q/K/V tensors plus the token layout.

    All heads share the sequence length and head dimension; each tensor is
    ``seq_len x head_dim``.
    """

    queries: list[np.ndarray]
    keys: list[np.ndarray]
    values: list[np.ndarray]
    layout: TokenLayout

    def __post_init__(self):
        if not (len(self.queries) == len(self.keys) == len(self.values)):
            raise ShapeError("per-head tensor lists differ in length")
        if not self.queries:
            raise ShapeError("workload needs at least one head")
        shape = self.queries[0].shape
        for name, group in (("Q", self.queries), ("K", self.keys), ("V", self.values)):
            for i, t in enumerate(group):
                if t.shape != shape:
                    raise ShapeError(f"head {i} {name} shape {t.shape} != {shape}")
        if shape[0] != self.layout.total:
            raise ShapeError(
                f"layout covers {self.layout.total} tokens but tensors have {shape[0]} rows"
            )

    @property
    def num_heads(self) -> int:
        return len(self.queries)

    @property
    def head_dim(self) -> int:
        return self.queries[0].shape[1]

    @property
    def seq_len(self) -> int:
        return self.queries[0].shape[0]


@dataclass
class MultiheadOutput:
    head_outputs: list[np.ndarray]
    concatenated: np.ndarray
    attention: list[np.ndarray] = field(default_factory=list)


def causal_mask(n_queries: int, n_keys: int) -> np.ndarray:
    """Boolean visibility mask: cell (n, m) is visible iff m <= n."""
    return np.tril(np.ones((n_queries, n_keys), dtype=bool))


def attention_matrix(
    q: np.ndarray, k: np.ndarray, causal: bool, counter: OpCounter | None = None
) -> np.ndarray:
    """Row-stochastic attention map ``softmax(q k^T / sqrt(d))``."""
    if q.shape[1] != k.shape[1]:
        raise ShapeError(f"query dim {q.shape[1]} != key dim {k.shape[1]}")
    scale = 1.0 / np.sqrt(q.shape[1])
    scores = matmul(q, k.T, counter) * scale
    mask = causal_mask(q.shape[0], k.shape[0]) if causal else None
    return softmax_rows(scores, mask, counter)


def full_multihead(
    w: AttentionWorkload,
    causal: bool = True,
    counter: OpCounter | None = None,
    output_proj: np.ndarray | None = None,
    keep_attention: bool = False,
) -> MultiheadOutput:
    """Exact multi-head attention over a workload.

    Head outputs are concatenated horizontally in head order; the optional
    output projection is applied to the concatenation when supplied and is
    identity otherwise.
    """
    heads = []
    attns = []
    for q, k, v in zip(w.queries, w.keys, w.values):
        a = attention_matrix(q, k, causal, counter)
        heads.append(matmul(a, v, counter))
        if keep_attention:
            attns.append(a)
    concat = np.hstack(heads)
    if output_proj is not None:
        concat = matmul(concat, output_proj, counter)
    return MultiheadOutput(heads, concat, attns)
