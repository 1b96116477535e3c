"""Decode-phase KV cache with pruned, regrouped vision segments.

Each head stores exactly ``budget`` selected vision KV rows (pruning packs
them into equal-length contiguous arrays, which is what makes parallel
per-head indexing possible), the full text KV, and a growable answer
segment. At every step the decoding query is re-classified against the
probe keys frozen at prefill time; lazy heads skip the vision fetch
entirely — their attention runs over text+answer only — while active heads
fetch the slimmed vision segment. Fetches are metered in tokens and bytes
under a flat memory model.

Eq.-style masking note: multiplying vision K/V by a zeroed diagonal would
leave zero-logit keys inside the softmax, which still receive mass. The
production path treats masked vision as absent (exclusion);
``decode_attention_dense`` exposes the literal zeroing variant so tests can
demonstrate the two differ.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attention import AttentionWorkload
from .errors import DegenerateContextError, IntegrityError, ShapeError
from .kernels import OpCounter, matmul, softmax_rows
from .kv_select import SelectionResult
from .metrics import VALUE_BYTES
from .query_select import ProbeKeys, build_probe_keys, classify_queries


@dataclass
class HeadCache:
    vision_k: np.ndarray
    vision_v: np.ndarray
    vision_indices: np.ndarray
    text_k: np.ndarray
    text_v: np.ndarray
    probes: ProbeKeys
    answer_k: list[np.ndarray] = field(default_factory=list)
    answer_v: list[np.ndarray] = field(default_factory=list)


@dataclass
class FetchLog:
    """Running totals plus one entry per decode step."""

    vision_tokens: int = 0
    vision_bytes: int = 0
    text_answer_bytes: int = 0
    step_vision_tokens: list[int] = field(default_factory=list)
    step_active_heads: list[int] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.step_active_heads)

    @property
    def active_head_steps(self) -> int:
        return int(sum(self.step_active_heads))


@dataclass
class SlimKVCache:
    heads: list[HeadCache]
    budget: int
    head_dim: int
    n_text: int
    preserve_first_head: bool
    fetch: FetchLog = field(default_factory=FetchLog)

    @property
    def num_heads(self) -> int:
        return len(self.heads)

    @property
    def n_answer(self) -> int:
        return len(self.heads[0].answer_k)


def build_cache(
    w: AttentionWorkload, sel: SelectionResult, preserve_first_head: bool = True
) -> SlimKVCache:
    """Prune each head's vision KV to its selected indices and regroup into
    equal-length contiguous segments; copy text KV whole; answer starts
    empty. Probe keys are built from the original, unpruned keys and frozen
    into the cache."""
    nv = w.layout.n_vision
    nt = w.layout.n_text
    heads = []
    for i, (k, v) in enumerate(zip(w.keys, w.values)):
        idx = np.asarray(sel.selected[i], dtype=np.int64)
        if idx.shape[0] != sel.budget:
            raise IntegrityError(f"head {i} selection has {idx.shape[0]} keys, budget {sel.budget}")
        if idx.size and (idx.min() < 0 or idx.max() >= nv):
            raise IntegrityError(f"head {i} selection indices fall outside the vision span")
        heads.append(
            HeadCache(
                vision_k=np.ascontiguousarray(k[idx]),
                vision_v=np.ascontiguousarray(v[idx]),
                vision_indices=idx.copy(),
                text_k=np.ascontiguousarray(k[nv : nv + nt]),
                text_v=np.ascontiguousarray(v[nv : nv + nt]),
                probes=build_probe_keys(k, w.layout),
            )
        )
    return SlimKVCache(heads, sel.budget, w.head_dim, nt, preserve_first_head)


def append_answer(cache: SlimKVCache, k_heads: list[np.ndarray], v_heads: list[np.ndarray]) -> None:
    """Grow every head's answer segment by one token."""
    if len(k_heads) != cache.num_heads or len(v_heads) != cache.num_heads:
        raise ShapeError("append needs one k and one v row per head")
    for hc, k, v in zip(cache.heads, k_heads, v_heads):
        k = np.asarray(k, dtype=np.float64).reshape(-1)
        v = np.asarray(v, dtype=np.float64).reshape(-1)
        if k.shape[0] != cache.head_dim or v.shape[0] != cache.head_dim:
            raise ShapeError(f"answer rows must have length {cache.head_dim}")
        hc.answer_k.append(k)
        hc.answer_v.append(v)


def classify_decode_query(
    q_heads: list[np.ndarray] | np.ndarray,
    cache: SlimKVCache,
    tau: float,
    counter: OpCounter | None = None,
) -> np.ndarray:
    """Per-head active flags for one decoding token, using the prefill
    classifier on a single-row query. Head 0 is always active when
    first-head preservation is on."""
    flags = np.zeros(cache.num_heads, dtype=bool)
    for i, hc in enumerate(cache.heads):
        q = np.asarray(q_heads[i], dtype=np.float64).reshape(1, -1)
        _, verdict = classify_queries(q, hc.probes, tau, counter)
        flags[i] = bool(verdict[0])
    if cache.preserve_first_head:
        flags[0] = True
    return flags


def _fetched_segments(hc: HeadCache, active: bool) -> tuple[np.ndarray, np.ndarray]:
    parts_k = [hc.vision_k] if active else []
    parts_v = [hc.vision_v] if active else []
    if hc.text_k.shape[0]:
        parts_k.append(hc.text_k)
        parts_v.append(hc.text_v)
    if hc.answer_k:
        parts_k.append(np.vstack(hc.answer_k))
        parts_v.append(np.vstack(hc.answer_v))
    if not parts_k:
        raise DegenerateContextError("lazy head with no text and no answer KV")
    return np.vstack(parts_k), np.vstack(parts_v)


def decode_attention(
    q_heads: list[np.ndarray] | np.ndarray,
    cache: SlimKVCache,
    tau: float,
    counter: OpCounter | None = None,
    flags: np.ndarray | None = None,
) -> tuple[list[np.ndarray], np.ndarray]:
    """One decode step across all heads with conditional vision fetch.

    ``flags`` overrides classification (diagnostic hook for forcing a head
    lazy/active); when omitted the step classifies the query itself. The
    fetch log gains one entry per call.
    """
    if flags is None:
        flags = classify_decode_query(q_heads, cache, tau, counter)
    else:
        flags = np.asarray(flags, dtype=bool)
    outputs = []
    step_vision = 0
    for i, hc in enumerate(cache.heads):
        q = np.asarray(q_heads[i], dtype=np.float64).reshape(1, -1)
        if q.shape[1] != cache.head_dim:
            raise ShapeError(f"decode query must have length {cache.head_dim}")
        keys, vals = _fetched_segments(hc, bool(flags[i]))
        scale = 1.0 / np.sqrt(cache.head_dim)
        scores = matmul(q, keys.T, counter) * scale
        probs = softmax_rows(scores, None, counter)
        outputs.append(matmul(probs, vals, counter)[0])
        if flags[i]:
            step_vision += cache.budget
            cache.fetch.vision_bytes += cache.budget * 2 * cache.head_dim * VALUE_BYTES
        cache.fetch.text_answer_bytes += (
            (keys.shape[0] - (cache.budget if flags[i] else 0)) * 2 * cache.head_dim * VALUE_BYTES
        )
    cache.fetch.vision_tokens += step_vision
    cache.fetch.step_vision_tokens.append(step_vision)
    cache.fetch.step_active_heads.append(int(flags.sum()))
    return outputs, flags


def decode_attention_dense(
    q_heads: list[np.ndarray] | np.ndarray,
    cache: SlimKVCache,
    flags: np.ndarray,
    zero_masked_vision: bool = False,
) -> list[np.ndarray]:
    """Dense reference over the concatenated cache segments.

    Default semantics mask a lazy head's vision logits to -inf (exclusion);
    with ``zero_masked_vision`` the vision K/V rows are literally zeroed
    instead, in which case those keys stay inside the softmax at logit 0.
    Never touches the fetch log.
    """
    flags = np.asarray(flags, dtype=bool)
    outputs = []
    for i, hc in enumerate(cache.heads):
        q = np.asarray(q_heads[i], dtype=np.float64).reshape(1, -1)
        keys, vals = _fetched_segments(hc, active=True)
        b = hc.vision_k.shape[0]
        if not flags[i] and zero_masked_vision:
            keys = keys.copy()
            vals = vals.copy()
            keys[:b] = 0.0
            vals[:b] = 0.0
        scores = np.matmul(q, keys.T) / np.sqrt(cache.head_dim)
        if not flags[i] and not zero_masked_vision:
            scores[0, :b] = -np.inf
        shifted = np.exp(scores - scores.max())
        shifted[~np.isfinite(scores)] = 0.0
        probs = shifted / shifted.sum()
        outputs.append(np.matmul(probs, vals)[0])
    return outputs
