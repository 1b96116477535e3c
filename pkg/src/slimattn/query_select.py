"""Lazy/active query classification against a two-key probe.

Each head gets two reference keys: the attention-sink key (lazy reference)
and the mean of all vision keys (active reference). A query's two-way
softmax over its similarity to these references gives an active
probability; queries at or below the threshold are lazy and skipped in
sparse attention. The first head can be preserved wholesale as a safety
channel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import AttentionWorkload, TokenLayout
from .errors import LayoutError
from .kernels import OpCounter, matmul, softmax_rows


@dataclass(frozen=True)
class ProbeKeys:
    """Per-head classification references: sink key and vision-key mean."""

    lazy_key: np.ndarray
    active_key: np.ndarray


@dataclass
class QueryMask:
    """Per-position active flags for one head (True = query is computed)."""

    active: np.ndarray

    @property
    def count_active(self) -> int:
        return int(self.active.sum())


def build_probe_keys(k: np.ndarray, layout: TokenLayout) -> ProbeKeys:
    """Extract the sink key and the vision-row mean from a key tensor."""
    if layout.n_vision == 0:
        raise LayoutError("probe keys need at least one vision token")
    lazy = np.array(k[layout.sink_index], dtype=np.float64)
    active = np.asarray(k[: layout.n_vision].mean(axis=0), dtype=np.float64)
    return ProbeKeys(lazy, active)


def classify_queries(
    q: np.ndarray,
    probes: ProbeKeys,
    tau: float,
    counter: OpCounter | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Two-logit softmax classification of each query row.

    Returns ``(active_prob, active)`` where ``active`` is the strict
    comparison ``active_prob > tau``; ties at exactly tau are lazy.
    """
    if not 0.0 <= tau < 1.0:
        raise ValueError(f"tau must be in [0, 1), got {tau}")
    refs = np.stack([probes.lazy_key, probes.active_key])  # (2, d), lazy first
    scale = 1.0 / np.sqrt(q.shape[1])
    logits = matmul(q, refs.T, counter) * scale
    probs = softmax_rows(logits, None, counter)
    active_prob = probs[:, 1]
    return active_prob, active_prob > tau


def build_query_masks(
    w: AttentionWorkload,
    tau: float,
    preserve_first_head: bool = True,
    counter: OpCounter | None = None,
) -> list[QueryMask]:
    """Classify the vision-position queries of every head.

    Only vision positions are classified; text and answer queries are always
    active. With preservation on, head 0 is forced all-active (its
    classification is still computed so probe cost is uniform across heads).
    """
    nv = w.layout.n_vision
    masks = []
    for i, q in enumerate(w.queries):
        _, verdicts = classify_queries(q[:nv], build_probe_keys(w.keys[i], w.layout), tau, counter)
        active = np.ones(w.seq_len, dtype=bool)
        active[:nv] = verdicts
        if preserve_first_head and i == 0:
            active[:] = True
        masks.append(QueryMask(active))
    return masks
