"""Greedy integration of features by weighted class entropy.

Every sample carries a weight, initially 1. Each iteration normalizes the
weights, picks the remaining feature whose top-K samples have the smallest
total weight times the feature's class entropy, and multiplies the weights of
that feature's top-K samples by ``1 + 1/H``. Features whose top-K sets overlap
already selected ones therefore look progressively worse, so the selection
favours pure features that cover different samples.

Entropies are computed once up front and never updated; only the weights move.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from numbers import Integral, Real
from typing import Sequence

import numpy as np
from scipy import sparse

from .dataset import LabeledDataset
from .ranking import FeatureStats, TopKSet, rank_all_features

DEFAULT_K_FRACTION = 0.1
DEFAULT_T = 3000

#: floor on the entropy in the penalization multiplier; pure sets have H = 0
ENTROPY_EPS = 1e-6

#: scores within this relative distance of the minimum count as tied
TIE_RTOL = 1e-12


class SelectionError(ValueError):
    code = "E_SELECT"


class EmptyCandidateError(SelectionError):
    code = "E_NO_CANDIDATES"


class WeightError(ArithmeticError):
    code = "E_WEIGHTS"


@dataclass
class SelectionState:
    """Mutable state of the greedy loop; confined to a single caller."""

    weights: np.ndarray
    remaining: set[int]
    selected: list[int] = field(default_factory=list)
    iteration: int = 0

    @classmethod
    def initial(cls, n_samples: int, eligible: Sequence[int]) -> "SelectionState":
        return cls(weights=np.ones(n_samples), remaining=set(eligible))


@dataclass(frozen=True)
class StepRecord:
    feature_id: int
    entropy_bits: float
    weighted_score: float
    penalized_sample_ids: tuple[int, ...]


@dataclass(frozen=True)
class SelectionResult:
    selected: tuple[int, ...]
    steps: tuple[StepRecord, ...]
    k: int
    t: int
    n_eligible: int
    n_samples: int
    feature_stats: tuple[FeatureStats, ...] = field(default=(), compare=False, repr=False)

    @property
    def per_step(self) -> tuple[StepRecord, ...]:
        return self.steps

    @property
    def t_effective(self) -> int:
        return len(self.selected)

    def prefix(self, t: int) -> "SelectionResult":
        """The result a run with ``T = t`` would have produced."""
        t = min(t, len(self.selected))
        return SelectionResult(
            self.selected[:t],
            self.steps[:t],
            self.k,
            t,
            self.n_eligible,
            self.n_samples,
            self.feature_stats,
        )


def weighted_score(stats: FeatureStats, weights) -> float:
    """Sum of the top-K sample weights times the feature's class entropy."""
    if not stats.eligible:
        raise SelectionError(f"feature {stats.feature_id} is not eligible")
    w = np.asarray(weights, dtype=np.float64)
    total = 0.0
    for k in sorted(stats.top_k.sample_ids):
        total += w[k]
    return total * stats.entropy_bits


def penalize(weights, t: TopKSet, H: float) -> np.ndarray:
    """Return a copy of ``weights`` with the samples of ``t`` scaled by ``1 + 1/H``.

    ``H`` is clamped below at :data:`ENTROPY_EPS`.
    """
    w = np.array(weights, dtype=np.float64, copy=True)
    if t.sample_ids:
        w[list(t.sample_ids)] *= 1.0 + 1.0 / max(H, ENTROPY_EPS)
    return w


def normalize(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    if not np.all(np.isfinite(w)):
        raise WeightError("weights must be finite")
    if np.any(w <= 0):
        raise WeightError("weights must be strictly positive")
    return w / w.sum()


def _membership(stats: Sequence[FeatureStats], n_samples: int) -> sparse.csr_matrix:
    # rows = features, columns = samples; sorted column indices make every row
    # sum run left to right over ascending sample ids
    indptr = [0]
    indices = []
    for s in stats:
        ids = sorted(s.top_k.sample_ids)
        indices.extend(ids)
        indptr.append(len(indices))
    data = np.ones(len(indices))
    m = sparse.csr_matrix(
        (data, np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(stats), n_samples),
    )
    m.has_sorted_indices = True
    return m


def select_features(stats: Sequence[FeatureStats], T: int) -> SelectionResult:
    """Run the greedy loop over ``stats`` for at most ``T`` iterations.

    Parameters
    ----------
    stats : sequence of FeatureStats
        Output of :func:`~entsel.ranking.rank_all_features`; ``stats[j]`` must
        describe feature ``j``. Ineligible features never enter the candidate
        set and do not count toward ``T``.
    T : int
        Number of features to select. Stops early once candidates run out.

    Returns
    -------
    SelectionResult
        Selected feature ids in selection order with per-step diagnostics.
        Ties in the score go to the lowest feature id.
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    for j, s in enumerate(stats):
        if s.feature_id != j:
            raise ValueError(f"stats[{j}] describes feature {s.feature_id}")
    eligible = [s.feature_id for s in stats if s.eligible]
    if not eligible:
        raise EmptyCandidateError("no eligible feature: every column lacks positive activations")
    sizes = {s.top_k.n_samples for s in stats}
    if len(sizes) != 1:
        raise ValueError("stats come from datasets of different sizes")
    n_samples = sizes.pop()
    k_values = {s.top_k.k_requested for s in stats}
    K = k_values.pop() if len(k_values) == 1 else -1

    H = np.array([s.entropy_bits if s.eligible else 0.0 for s in stats])
    member = _membership(stats, n_samples)
    active = np.zeros(len(stats), dtype=bool)
    active[eligible] = True

    state = SelectionState.initial(n_samples, eligible)
    steps = []
    while state.iteration < T and state.remaining:
        state.weights = normalize(state.weights)
        scores = H * (member @ state.weights)
        scores[~active] = np.inf
        best = float(scores.min())
        tied = np.flatnonzero(scores <= best + TIE_RTOL * abs(best))
        j = int(tied[0])

        chosen = stats[j]
        state.selected.append(j)
        state.remaining.discard(j)
        active[j] = False
        state.weights = penalize(state.weights, chosen.top_k, chosen.entropy_bits)
        state.iteration += 1
        steps.append(
            StepRecord(j, float(chosen.entropy_bits), float(scores[j]), chosen.top_k.sample_ids)
        )

    return SelectionResult(
        selected=tuple(state.selected),
        steps=tuple(steps),
        k=K,
        t=int(T),
        n_eligible=len(eligible),
        n_samples=n_samples,
        feature_stats=tuple(stats),
    )


def resolve_k(k_spec, n_samples: int) -> int:
    """Turn a count (int) or a fraction of ``n_samples`` (float in (0, 1]) into K.

    Fractions round half up and clamp to at least 1.
    """
    if isinstance(k_spec, bool):
        raise TypeError("K must be a count or a fraction")
    if isinstance(k_spec, Integral):
        if k_spec < 1:
            raise ValueError(f"K count must be >= 1, got {k_spec}")
        return int(k_spec)
    if isinstance(k_spec, Real):
        frac = float(k_spec)
        if not 0.0 < frac <= 1.0:
            raise ValueError(f"K fraction must lie in (0, 1], got {frac}")
        return max(1, math.floor(frac * n_samples + 0.5))
    raise TypeError(f"K must be a count or a fraction, got {type(k_spec).__name__}")


def parse_k(text: str):
    """``"0.1"`` -> 0.1 (fraction), ``"50"`` -> 50 (count)."""
    text = str(text).strip()
    if any(ch in text for ch in ".eE"):
        return float(text)
    return int(text)


def run_pipeline(
    ds: LabeledDataset, k_spec=DEFAULT_K_FRACTION, T: int = DEFAULT_T
) -> SelectionResult:
    """Rank every feature of ``ds`` and run the greedy selection.

    The per-feature stats stay reachable as ``result.feature_stats``.
    """
    K = resolve_k(k_spec, ds.n_samples)
    return select_features(rank_all_features(ds, K), T)
