"""Per-feature top-K activation sets and their class entropy.

For every column the samples with the largest strictly positive activations
are collected, and the Shannon entropy (bits) of their class distribution
measures how discriminative the column is: a pure set scores 0, a set spread
evenly over ``C`` classes scores ``log2(C)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import LabeledDataset


class EmptyTopKError(ValueError):
    """Entropy requested for a feature with no positive activations."""

    code = "E_EMPTY_TOPK"


@dataclass(frozen=True)
class TopKSet:
    feature_id: int
    sample_ids: tuple[int, ...]
    k_requested: int
    n_samples: int

    def __len__(self):
        return len(self.sample_ids)

    @property
    def empty(self) -> bool:
        return not self.sample_ids


@dataclass(frozen=True)
class FeatureStats:
    feature_id: int
    top_k: TopKSet
    entropy_bits: float | None

    @property
    def eligible(self) -> bool:
        return not self.top_k.empty


def _top_k_order(column: np.ndarray, K: int) -> np.ndarray:
    # stable sort on the negated column: descending values, ascending index on ties
    order = np.argsort(-column, kind="stable")
    n_pos = int(np.count_nonzero(column > 0))
    return order[: min(K, n_pos)]


def top_k_samples(ds: LabeledDataset, feature_id: int, K: int) -> TopKSet:
    """Return the ``K`` samples with the largest strictly positive activations.

    Samples are ordered by descending activation, ties by ascending row index.
    Fewer than ``K`` ids are returned when fewer entries are positive.
    """
    if not 0 <= feature_id < ds.n_features:
        raise IndexError(f"feature_id {feature_id} out of range [0, {ds.n_features})")
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    ids = _top_k_order(ds.column(feature_id), K)
    return TopKSet(int(feature_id), tuple(int(i) for i in ids), int(K), ds.n_samples)


def entropy_from_counts(counts) -> float:
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise EmptyTopKError("entropy of an empty sample set is undefined")
    p = counts[counts > 0] / total
    h = float(-(p * np.log2(p)).sum())
    # a pure set gives -1*log2(1) = -0.0
    return h if h > 0 else 0.0


def class_entropy(t: TopKSet, ds: LabeledDataset) -> float:
    """Shannon entropy in bits of the class distribution within ``t``."""
    if t.empty:
        raise EmptyTopKError(
            f"feature {t.feature_id} has no positive activations; entropy undefined"
        )
    counts = np.bincount(ds.labels[list(t.sample_ids)], minlength=ds.class_count)
    return entropy_from_counts(counts)


def rank_all_features(ds: LabeledDataset, K: int) -> list[FeatureStats]:
    """Top-K set and class entropy for every column, in column order.

    Columns without a single positive activation are returned ineligible with
    ``entropy_bits=None``.
    """
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    X = ds.features
    y = ds.labels
    C = ds.class_count
    order = np.argsort(-X, axis=0, kind="stable")
    n_pos = np.count_nonzero(X > 0, axis=0)
    stats = []
    for j in range(ds.n_features):
        ids = order[: min(K, int(n_pos[j])), j]
        top = TopKSet(j, tuple(int(i) for i in ids), int(K), ds.n_samples)
        if ids.size:
            h = entropy_from_counts(np.bincount(y[ids], minlength=C))
        else:
            h = None
        stats.append(FeatureStats(j, top, h))
    return stats
