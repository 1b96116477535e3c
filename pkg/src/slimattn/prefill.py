"""Sparse prefill: query selection + budgeted KV selection + masked attention.

The pipeline always runs the exact full-attention oracle alongside the
sparse path: the oracle's attention maps feed the recall instrumentation
(and the key scores when the exact score source is selected), and its op
counter is the denominator of every reduction ratio. Outputs at lazy query
positions are zero vectors; active queries attend causally to the selected
keys only, with the softmax renormalized over that surviving set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attention import AttentionWorkload, full_multihead
from .block_probe import block_scores_to_token_scores, probe_attention
from .errors import ParameterError
from .kernels import OpCounter, matmul, softmax_rows
from .kv_select import (
    KeyScores,
    SelectionResult,
    accumulated_key_scores,
    budget_with_retained_mass,
    build_key_masks,
    flattest_head,
    key_scores_from_vectors,
    select_top_blocks,
)
from .metrics import attention_recall
from .query_select import QueryMask, build_query_masks

SCORE_SOURCES = ("exact", "probe")
GRANULARITIES = ("token", "block")


@dataclass(frozen=True)
class SparsityConfig:
    """All sparsity knobs in one place.

    ``tau`` is the lazy/active threshold on the two-way probe probability,
    ``p`` the fraction of total attention mass the shared budget must
    retain on the flattest head. ``granularity`` picks the selection atom:
    individual tokens or whole probe blocks. ``sink_index`` is applied when
    the harness constructs token layouts.
    """

    tau: float = 0.08
    p: float = 0.82
    block_size: int = 256
    granularity: str = "token"
    preserve_first_head: bool = True
    sink_index: int = 0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.tau < 1.0:
            raise ParameterError(f"tau must be in [0, 1), got {self.tau}")
        if not 0.0 < self.p <= 1.0:
            raise ParameterError(f"p must be in (0, 1], got {self.p}")
        if self.block_size < 1:
            raise ParameterError(f"block_size must be >= 1, got {self.block_size}")
        if self.granularity not in GRANULARITIES:
            raise ParameterError(f"granularity must be one of {GRANULARITIES}")


@dataclass
class PrefillOutput:
    """Sparse outputs plus every intermediate the reports need."""

    outputs: list[np.ndarray]
    query_masks: list[QueryMask]
    selection: SelectionResult
    key_scores: KeyScores
    recall_per_head: list[float]
    flattest_retained_mass: float
    flattest_total_mass: float
    score_source: str
    counter_full: OpCounter = field(default_factory=OpCounter)
    counter_sparse: OpCounter = field(default_factory=OpCounter)
    counter_probe: OpCounter = field(default_factory=OpCounter)

    @property
    def active_per_head(self) -> list[int]:
        return [m.count_active for m in self.query_masks]


def sparse_head_attention(
    q: np.ndarray,
    k: np.ndarray,
    v: np.ndarray,
    selected: np.ndarray,
    active: np.ndarray,
    sink_index: int,
    counter: OpCounter | None = None,
) -> np.ndarray:
    """Causal attention of the active query rows over the selected keys.

    Lazy rows come out as zero vectors. An active row whose causal range
    contains no selected key falls back to attending the sink key alone;
    a one-key softmax has weight 1, so the fallback is a value-row copy and
    adds no counted arithmetic.
    """
    out = np.zeros_like(v)
    rows = np.flatnonzero(active)
    if rows.size == 0 or selected.size == 0:
        return out
    k_sel = k[selected]
    v_sel = v[selected]
    scale = 1.0 / np.sqrt(q.shape[1])
    scores = matmul(q[rows], k_sel.T, counter) * scale
    visible = selected[None, :] <= rows[:, None]
    alive = visible.any(axis=1)
    probs = np.zeros_like(scores)
    if alive.any():
        probs[alive] = softmax_rows(scores[alive], visible[alive], counter)
    head_out = matmul(probs, v_sel, counter)
    if not alive.all():
        head_out[~alive] = v[sink_index]
    out[rows] = head_out
    return out


def compute_key_scores(
    w: AttentionWorkload,
    cfg: SparsityConfig,
    score_source: str,
    full_attention: list[np.ndarray],
    counter_probe: OpCounter,
) -> KeyScores:
    """Token-level key scores from the exact maps or the block probe."""
    if score_source == "exact":
        return accumulated_key_scores(full_attention)
    vectors = []
    for q, k in zip(w.queries, w.keys):
        pmap = probe_attention(q, k, cfg.block_size, counter_probe)
        vectors.append(block_scores_to_token_scores(pmap, w.seq_len))
    return key_scores_from_vectors(vectors)


def sparse_prefill(
    w: AttentionWorkload, cfg: SparsityConfig, score_source: str = "exact"
) -> PrefillOutput:
    """Run the full sparse prefill and record masks, budget and counters.

    Budget determination uses the actual total mass of the score vector
    (equal to N for exact row-stochastic attention, and the pooled row
    count for probe scores), so both score sources share one code path and
    the flattest-head retention guarantee ``retained >= p * total`` holds
    as an exact float comparison.
    """
    if score_source not in SCORE_SOURCES:
        raise ParameterError(f"score source must be one of {SCORE_SOURCES}")

    counter_full = OpCounter()
    counter_sparse = OpCounter()
    counter_probe = OpCounter()

    oracle = full_multihead(w, causal=True, counter=counter_full, keep_attention=True)
    masks = build_query_masks(w, cfg.tau, cfg.preserve_first_head, counter_probe)
    scores = compute_key_scores(w, cfg, score_source, oracle.attention, counter_probe)

    flat = flattest_head(scores)
    budget, retained, total = budget_with_retained_mass(scores.scores[flat], cfg.p)
    if cfg.granularity == "token":
        selection = build_key_masks(scores, budget)
    else:
        selection = select_top_blocks(scores, budget, cfg.block_size)

    sink = w.layout.sink_index
    outputs = [
        sparse_head_attention(q, k, v, sel, m.active, sink, counter_sparse)
        for q, k, v, sel, m in zip(w.queries, w.keys, w.values, selection.selected, masks)
    ]
    recall = [
        attention_recall(a, sel, m.active)
        for a, sel, m in zip(oracle.attention, selection.selected, masks)
    ]
    return PrefillOutput(
        outputs=outputs,
        query_masks=masks,
        selection=selection,
        key_scores=scores,
        recall_per_head=recall,
        flattest_retained_mass=retained,
        flattest_total_mass=total,
        score_source=score_source,
        counter_full=counter_full,
        counter_sparse=counter_sparse,
        counter_probe=counter_probe,
    )
