"""Synthetic attention workloads with controllable head statistics.

Construction sketch (all draws from one seeded generator, in fixed order):

* every vision key shares a per-head content direction, so the vision-key
  mean is a meaningful "active" probe reference;
* the sink key is small-norm and content-free, so lazy queries are made by
  anti-aligning with the content direction rather than by piling real
  attention mass onto the sink (a huge common sink spike would distort the
  cross-head kurtosis comparison for every head at once);
* a head's sharpness parameter (0 = flat, 1 = sharp) boosts a small set of
  hot keys and aligns the active queries with them, concentrating that
  head's accumulated key mass;
* a target fraction of vision query positions is generated lazy; the
  positions are drawn once and shared across heads, mirroring how lazy
  queries overlap across heads in practice.

Text keys carry no content component, so lazy rows dump their mass mostly
on the text span, which keeps text keys naturally high-scoring.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import AttentionWorkload, TokenLayout
from .errors import WorkloadError

CONTENT_SCALE = 0.4  # per-sqrt(d) content strength of vision keys
SINK_NORM = 0.2  # sink key norm, in units of sqrt(d)
ACTIVE_ALIGN = 3.0  # content component of active queries
LAZY_ANTI_ALIGN = 9.0  # negative content component of lazy queries
HOT_KEY_SCALE = 0.9  # hot-key boost per unit sharpness, in units of sqrt(d)
HOT_QUERY_MEAN = 3.0  # mean hot-direction component of active queries
HOT_FRACTION = 0.03  # fraction of vision keys boosted on sharp heads


@dataclass(frozen=True)
class WorkloadSpec:
    """Knobs for synthetic generation; deterministic under a fixed seed."""

    heads: int = 4
    head_dim: int = 32
    n_vision: int = 256
    n_text: int = 16
    sharpness: tuple[float, ...] | float | None = None
    lazy_fraction: float = 0.5
    sink_index: int = 0
    seed: int = 0

    def sharpness_profile(self) -> np.ndarray:
        if self.sharpness is None:
            if self.heads == 1:
                return np.zeros(1)
            return np.linspace(0.0, 1.0, self.heads)
        if np.isscalar(self.sharpness):
            return np.full(self.heads, float(self.sharpness))
        prof = np.asarray(self.sharpness, dtype=np.float64)
        if prof.shape != (self.heads,):
            raise WorkloadError(
                f"sharpness profile has {prof.shape[0]} entries for {self.heads} heads"
            )
        return prof


def _unit(rng: np.random.Generator, d: int) -> np.ndarray:
    v = rng.normal(size=d)
    return v / np.linalg.norm(v)


def _validate(spec: WorkloadSpec) -> None:
    if spec.heads < 1:
        raise WorkloadError("need at least one head")
    if spec.head_dim < 4:
        raise WorkloadError("head_dim must be >= 4 to fit the probe directions")
    if spec.n_vision < 2:
        raise WorkloadError("need at least two vision tokens")
    if spec.n_text < 0:
        raise WorkloadError("n_text must be non-negative")
    if not 0.0 <= spec.lazy_fraction <= 1.0:
        raise WorkloadError(f"lazy_fraction must be in [0, 1], got {spec.lazy_fraction}")
    if not 0 <= spec.sink_index < spec.n_vision:
        raise WorkloadError("sink_index must point into the vision span")


def generate_workload(spec: WorkloadSpec) -> AttentionWorkload:
    _validate(spec)
    rng = np.random.default_rng(spec.seed)
    d = spec.head_dim
    nv, nt = spec.n_vision, spec.n_text
    n = nv + nt
    sqd = np.sqrt(d)
    profile = spec.sharpness_profile()

    n_lazy = int(round(spec.lazy_fraction * nv))
    lazy_pool = np.setdiff1d(np.arange(nv), [spec.sink_index])
    lazy_rows = rng.choice(lazy_pool, size=min(n_lazy, lazy_pool.size), replace=False)
    lazy_mask = np.zeros(nv, dtype=bool)
    lazy_mask[lazy_rows] = True

    n_hot = max(2, int(round(HOT_FRACTION * nv)))
    queries, keys, values = [], [], []
    for c in profile:
        u_content = _unit(rng, d)
        u_sink = _unit(rng, d)
        u_hot = _unit(rng, d)

        k = rng.normal(size=(n, d))
        k[:nv] += CONTENT_SCALE * sqd * u_content
        hot = rng.choice(lazy_pool, size=n_hot, replace=False)
        k[hot] += c * HOT_KEY_SCALE * sqd * u_hot
        k[spec.sink_index] = SINK_NORM * sqd * u_sink

        q = rng.normal(size=(n, d))
        q[:nv][lazy_mask] += -LAZY_ANTI_ALIGN * u_content
        active_rows = np.concatenate([np.flatnonzero(~lazy_mask), np.arange(nv, n)])
        q[active_rows] += ACTIVE_ALIGN * u_content
        q[active_rows] += (
            c * np.abs(rng.normal(HOT_QUERY_MEAN, 1.0, size=(active_rows.size, 1))) * u_hot
        )

        queries.append(q)
        keys.append(k)
        values.append(rng.normal(size=(n, d)))

    layout = TokenLayout(nv, nt, 0, spec.sink_index)
    return AttentionWorkload(queries, keys, values, layout)


def generate_decode_inputs(
    spec: WorkloadSpec, w: AttentionWorkload, steps: int, rng: np.random.Generator
) -> list[tuple[list[np.ndarray], list[np.ndarray], list[np.ndarray]]]:
    """Per-step (q, k, v) head lists for autoregressive decoding.

    Each head's decoding query is lazy with the spec's target probability,
    built the same way as the prefill queries so the frozen probe keys
    classify it the same way.
    """
    d = spec.head_dim
    out = []
    for _ in range(steps):
        q_heads, k_heads, v_heads = [], [], []
        for i in range(spec.heads):
            k_mean = w.keys[i][: spec.n_vision].mean(axis=0)
            u_content = k_mean / np.linalg.norm(k_mean)
            q = rng.normal(size=d)
            if rng.random() < spec.lazy_fraction:
                q += -LAZY_ANTI_ALIGN * u_content
            else:
                q += ACTIVE_ALIGN * u_content
            q_heads.append(q)
            k_heads.append(rng.normal(size=d))
            v_heads.append(rng.normal(size=d))
        out.append((q_heads, k_heads, v_heads))
    return out
