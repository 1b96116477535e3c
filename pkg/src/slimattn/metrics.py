"""Analytic and measured accounting: attention recall, multiply-add models,
KV residency and fetch traffic, and the JSON report tying them together.

Unit convention: every ``flops_*`` quantity is a multiply-add count under
the same rules the instrumented kernels use (see ``kernels``), so measured
counters and the analytic model must agree to the integer. Softmax
exponentials are tracked separately and excluded from the headline
reduction ratio. Causality is never used to discount a product that the
kernels actually compute over the full rectangle, so ratios are not
flattered.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

SCHEMA_VERSION = 1
VALUE_BYTES = 8  # float64 carrier; flat memory model, bytes = values * width


def attention_recall(
    full_attention: np.ndarray, selected: np.ndarray, active: np.ndarray | None = None
) -> float:
    """Fraction of attention mass over active query rows landing on the
    selected keys.

    A head with no active rows recalls vacuously (1.0): it contributes no
    attention output to lose.
    """
    a = full_attention if active is None else full_attention[np.asarray(active, dtype=bool)]
    if a.shape[0] == 0:
        return 1.0
    total = float(a.sum())
    return float(a[:, selected].sum()) / total


@dataclass(frozen=True)
class FlopsBreakdown:
    """Multiply-add counts for the three instrumented paths."""

    full: int
    sparse: int
    probe_overhead: int

    @property
    def reduction(self) -> float:
        return 1.0 - (self.sparse + self.probe_overhead) / self.full


def analytic_flops(
    n_tokens: int,
    n_vision: int,
    head_dim: int,
    active_per_head: list[int],
    budget: int,
    block_size: int | None = None,
    probe_scores: bool = False,
) -> FlopsBreakdown:
    """Closed-form multiply-add model of the pipeline.

    full:   per head, QK^T (N*d*N) + AV (N*N*d) over the causal rectangle.
    sparse: per head, the same two products over active rows x budget keys.
    probe:  classification logits (2 per vision query, d each) plus, when
            the block probe supplies the scores, Q/K pooling (one
            accumulate per element) and the pooled score product.
    """
    h = len(active_per_head)
    full = h * 2 * n_tokens * n_tokens * head_dim
    sparse = sum(2 * n_active * budget * head_dim for n_active in active_per_head)
    probe = h * 2 * n_vision * head_dim
    if probe_scores:
        if block_size is None:
            raise ValueError("probe accounting needs the block size")
        nb = math.ceil(n_tokens / block_size)
        probe += h * (2 * n_tokens * head_dim + nb * nb * head_dim)
    return FlopsBreakdown(full, sparse, probe)


@dataclass(frozen=True)
class KVReduction:
    """Residency and fetch savings over the vision KV segment."""

    resident_reduction: float
    fetch_reduction: float
    predicted_vision_tokens: int
    predicted_vision_bytes: int


def kv_reduction(
    n_vision: int,
    budget: int,
    head_dim: int,
    active_head_steps: int,
    total_head_steps: int,
) -> KVReduction:
    """Vision-segment savings: residency shrinks by 1 - b/Nv, per-step fetch
    additionally by the active-head fraction. Text/answer segments are
    counted unreduced and do not appear here.

    Predicted totals use the same integer arithmetic as the cache fetch
    counters (b tokens, K and V rows, VALUE_BYTES each), so a decode trace
    must match them exactly.
    """
    if budget > n_vision:
        raise ValueError(f"budget {budget} exceeds vision span {n_vision}")
    resident = 1.0 - budget / n_vision
    active_fraction = active_head_steps / total_head_steps if total_head_steps else 0.0
    tokens = budget * active_head_steps
    return KVReduction(
        resident_reduction=resident,
        fetch_reduction=1.0 - (budget / n_vision) * active_fraction,
        predicted_vision_tokens=tokens,
        predicted_vision_bytes=tokens * 2 * head_dim * VALUE_BYTES,
    )


@dataclass
class MetricsReport:
    """Everything a run reports, serialized as one JSON document.

    ``recall_flattest`` is the selection-basis quantity (retained score
    mass over all query rows of the flattest head) whose ``>= p`` guarantee
    the budget construction provides on the exact score path;
    ``recall_per_head`` is measured over active query rows only.
    """

    mode: str
    config: dict[str, Any]
    workload: dict[str, Any]
    flops_full: int
    flops_sparse: int
    flops_probe_overhead: int
    flops_reduction: float
    exponentials_full: int
    exponentials_sparse: int
    recall_per_head: list[float]
    recall_min: float
    recall_flattest: float
    flattest_retained_mass: float
    flattest_total_mass: float
    budget: int
    flattest_head: int
    lazy_query_fraction: float
    sparsity_gap: float | None
    kv_resident_reduction: float | None = None
    kv_fetch_reduction: float | None = None
    lazy_head_fraction_decode: float | None = None
    decode: dict[str, Any] | None = None
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "mode": self.mode,
            "config": self.config,
            "workload": self.workload,
            "flops_full": self.flops_full,
            "flops_sparse": self.flops_sparse,
            "flops_probe_overhead": self.flops_probe_overhead,
            "flops_reduction": self.flops_reduction,
            "exponentials_full": self.exponentials_full,
            "exponentials_sparse": self.exponentials_sparse,
            "recall_per_head": self.recall_per_head,
            "recall_min": self.recall_min,
            "recall_flattest": self.recall_flattest,
            "flattest_retained_mass": self.flattest_retained_mass,
            "flattest_total_mass": self.flattest_total_mass,
            "budget": self.budget,
            "flattest_head": self.flattest_head,
            "lazy_query_fraction": self.lazy_query_fraction,
            "sparsity_gap": self.sparsity_gap,
            "kv_resident_reduction": self.kv_resident_reduction,
            "kv_fetch_reduction": self.kv_fetch_reduction,
            "lazy_head_fraction_decode": self.lazy_head_fraction_decode,
            "decode": self.decode,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "MetricsReport":
        d = dict(d)
        version = d.pop("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {version}")
        return cls(schema_version=version, **d)

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        return cls.from_dict(json.loads(text))
