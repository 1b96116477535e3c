"""Key selection under a head-shared budget.

Per-key importance is the total attention mass a key receives (column sums
of the row-stochastic attention map). The head whose score vector has the
lowest kurtosis is the flattest — it needs the most keys to retain a given
mass fraction — so the budget is sized on that head and applied uniformly:
every head keeps its own top-``b`` keys, which makes the retained mass on
the flattest head at least ``p`` of the total by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IntegrityError, ParameterError
from .kernels import colsum, kurtosis

STOCHASTIC_ATOL = 1e-6


@dataclass
class KeyScores:
    """Per-head accumulated key mass and its kurtosis."""

    scores: list[np.ndarray]
    kurtoses: list[float]

    @property
    def num_heads(self) -> int:
        return len(self.scores)

    @property
    def num_keys(self) -> int:
        return self.scores[0].shape[0]


@dataclass
class SelectionResult:
    """Shared budget plus per-head ascending index lists of exactly
    ``budget`` selected keys."""

    budget: int
    selected: list[np.ndarray]
    flattest_head: int


def key_scores_from_vectors(vectors: list[np.ndarray]) -> KeyScores:
    return KeyScores(
        [np.asarray(v, dtype=np.float64) for v in vectors],
        [kurtosis(np.asarray(v, dtype=np.float64)) for v in vectors],
    )


def accumulated_key_scores(attn_matrices: list[np.ndarray]) -> KeyScores:
    """Column sums of per-head attention maps.

    Inputs must be row-stochastic; each resulting score vector then sums to
    the number of query rows.
    """
    vectors = []
    for i, a in enumerate(attn_matrices):
        row_sums = a.sum(axis=1)
        if np.abs(row_sums - 1.0).max() > STOCHASTIC_ATOL:
            worst = int(np.abs(row_sums - 1.0).argmax())
            raise IntegrityError(
                f"head {i} attention row {worst} sums to {row_sums[worst]:.9f}, not 1"
            )
        if a.min() < 0.0:
            raise IntegrityError(f"head {i} attention has negative entries")
        vectors.append(colsum(a))
    return key_scores_from_vectors(vectors)


def flattest_head(scores: KeyScores) -> int:
    """Index of the minimum-kurtosis head; ties go to the lowest index."""
    if scores.num_heads < 1:
        raise ParameterError("need at least one head")
    return int(np.argmin(scores.kurtoses))


def _descending_cumsum(a: np.ndarray) -> np.ndarray:
    return np.cumsum(np.sort(a)[::-1])


def determine_budget(a_star: np.ndarray, p: float, total_mass: float | None = None) -> int:
    """Smallest key count whose descending-sorted mass reaches ``p`` of the
    total.

    ``total_mass`` is the nominal total (the number of query rows for exact
    attention scores); it defaults to the actual sum. The threshold is
    clipped to the actual sum so ``p = 1.0`` selects exactly the keys
    carrying nonzero mass rather than failing on float shortfall.
    """
    if not 0.0 < p <= 1.0:
        raise ParameterError(f"retention p must be in (0, 1], got {p}")
    a_star = np.asarray(a_star, dtype=np.float64)
    cum = _descending_cumsum(a_star)
    threshold = min(p * (total_mass if total_mass is not None else cum[-1]), cum[-1])
    return int(np.searchsorted(cum, threshold, side="left")) + 1


def budget_with_retained_mass(
    a_star: np.ndarray, p: float, total_mass: float | None = None
) -> tuple[int, float, float]:
    """``determine_budget`` plus the exact retained/total masses it implies.

    The retained mass is read off the same cumulative sum the budget search
    used, so callers asserting ``retained >= p * total`` reproduce the stop
    condition bit for bit.
    """
    if not 0.0 < p <= 1.0:
        raise ParameterError(f"retention p must be in (0, 1], got {p}")
    a_star = np.asarray(a_star, dtype=np.float64)
    cum = _descending_cumsum(a_star)
    total = float(total_mass) if total_mass is not None else float(cum[-1])
    threshold = min(p * total, cum[-1])
    b = int(np.searchsorted(cum, threshold, side="left")) + 1
    return b, float(cum[b - 1]), total


def top_b_indices(a: np.ndarray, b: int) -> np.ndarray:
    """Ascending indices of the ``b`` largest scores; cutoff ties break
    toward lower token index so the result is deterministic."""
    order = np.lexsort((np.arange(a.shape[0]), -a))
    return np.sort(order[:b])


def build_key_masks(scores: KeyScores, budget: int) -> SelectionResult:
    """Select each head's own top-``budget`` keys.

    Exactly ``budget`` keys per head; ties at the score cutoff are broken
    by lower token index (equal scores make the retained mass identical, so
    the recall guarantee is unaffected).
    """
    n = scores.num_keys
    if not 1 <= budget <= n:
        raise ParameterError(f"budget must be in [1, {n}], got {budget}")
    return SelectionResult(
        budget,
        [top_b_indices(a, budget) for a in scores.scores],
        flattest_head(scores),
    )


def select_top_blocks(scores: KeyScores, budget: int, block_size: int) -> SelectionResult:
    """Block-granularity selection: whole blocks by total mass, truncated to
    exactly ``budget`` tokens.

    Blocks are ranked by their summed token mass (ties to the lower block
    index); the marginal block contributes its lowest-index tokens so the
    result stays deterministic and exactly ``budget`` long.
    """
    n = scores.num_keys
    if not 1 <= budget <= n:
        raise ParameterError(f"budget must be in [1, {n}], got {budget}")
    if block_size < 1:
        raise ParameterError(f"block size must be >= 1, got {block_size}")
    starts = np.arange(0, n, block_size)
    selected = []
    for a in scores.scores:
        block_mass = np.add.reduceat(a, starts)
        order = np.lexsort((np.arange(starts.shape[0]), -block_mass))
        chosen = []
        remaining = budget
        for bi in order:
            lo = int(starts[bi])
            hi = min(lo + block_size, n)
            take = min(hi - lo, remaining)
            chosen.append(np.arange(lo, lo + take, dtype=np.int64))
            remaining -= take
            if remaining == 0:
                break
        selected.append(np.sort(np.concatenate(chosen)))
    return SelectionResult(budget, selected, flattest_head(scores))


def select_vision_keys(scores: KeyScores, budget: int, n_vision: int) -> SelectionResult:
    """Per-head top keys restricted to the vision span.

    Decode-time cache slimming stores an equal-length vision segment per
    head while text stays resident in full, so the candidate pool here is
    the vision columns only and the budget is capped at ``n_vision``.
    """
    if n_vision < 1:
        raise ParameterError("vision span is empty")
    b = min(budget, n_vision)
    if b < 1:
        raise ParameterError(f"budget must be positive, got {budget}")
    return SelectionResult(
        b,
        [top_b_indices(a[:n_vision], b) for a in scores.scores],
        flattest_head(scores),
    )


def sparsity_gap(scores: KeyScores, p: float) -> float:
    """Over-selection the shared budget incurs on the sharpest head.

    Both extremes get their own individual budget at retention ``p``; the
    gap is ``(b_flattest - b_sharpest) / N``.
    """
    if scores.num_heads < 2:
        raise ParameterError("sparsity gap needs at least two heads")
    flat = flattest_head(scores)
    sharp = int(np.argmax(scores.kurtoses))
    b_flat = determine_budget(scores.scores[flat], p)
    b_sharp = determine_budget(scores.scores[sharp], p)
    return (b_flat - b_sharp) / scores.num_keys
