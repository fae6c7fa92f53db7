"""Ensemble diversity statistics over classifier correctness patterns.

Implements the pairwise Q statistic and disagreement (averaged over all
classifier pairs) and the non-pairwise interrater agreement kappa,
Kohavi-Wolpert variance and generalized diversity, following

Kuncheva, L. I. and Whitaker, C. J. "Measures of diversity in classifier
ensembles and their relationship with the ensemble accuracy." Machine
Learning 51 (2003): 181-207.

Undefined values are reported as ``None``, never as 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .ranking import FeatureStats


class DiversityError(ValueError):
    code = "E_DIVERSITY"


@dataclass(frozen=True)
class CorrectnessMatrix:
    """``entries[l, i] == 1`` iff classifier ``l`` is right on sample ``i``."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries)
        if e.ndim != 2:
            raise DiversityError(f"correctness matrix must be 2-D, got shape {e.shape}")
        if e.shape[0] < 2:
            raise DiversityError("need at least two classifiers")
        if e.shape[1] < 1:
            raise DiversityError("need at least one sample")
        if not np.all((e == 0) | (e == 1)):
            raise DiversityError("correctness entries must be exactly 0 or 1")
        e = e.astype(np.int8)
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def n_classifiers(self) -> int:
        return self.entries.shape[0]

    @property
    def n_samples(self) -> int:
        return self.entries.shape[1]

    @classmethod
    def from_predictions(cls, predictions: Sequence[Sequence[int]], truth: Sequence[int]):
        truth = np.asarray(truth)
        rows = []
        for l, pred in enumerate(predictions):
            pred = np.asarray(pred)
            if pred.shape != truth.shape:
                raise DiversityError(
                    f"classifier {l}: {pred.shape[0]} predictions for {truth.shape[0]} samples"
                )
            rows.append(pred == truth)
        return cls(np.array(rows))


@dataclass(frozen=True)
class DiversityReport:
    kappa: float | None
    q_statistic: float | None
    kw_variance: float
    disagreement: float
    generalized_diversity: float | None
    q_pairs_used: int
    q_pairs_excluded: int
    mean_accuracy: float
    h_f: float | None = None
    h_s: float | None = None

    def with_entropies(self, h_f: float | None, h_s: float | None) -> "DiversityReport":
        return DiversityReport(
            self.kappa,
            self.q_statistic,
            self.kw_variance,
            self.disagreement,
            self.generalized_diversity,
            self.q_pairs_used,
            self.q_pairs_excluded,
            self.mean_accuracy,
            h_f,
            h_s,
        )


def avg_entropy(stats: Sequence[FeatureStats], subset: Iterable[int]) -> float:
    """Mean class entropy (bits) of the features in ``subset``."""
    ids = list(subset)
    if not ids:
        raise DiversityError("average entropy of an empty feature set is undefined")
    vals = []
    for j in ids:
        if not stats[j].eligible:
            raise DiversityError(f"feature {j} is not eligible and has no entropy")
        vals.append(stats[j].entropy_bits)
    return float(np.mean(vals))


def _pair_counts(a: np.ndarray, b: np.ndarray):
    n11 = int(np.sum((a == 1) & (b == 1)))
    n00 = int(np.sum((a == 0) & (b == 0)))
    n10 = int(np.sum((a == 1) & (b == 0)))
    n01 = int(np.sum((a == 0) & (b == 1)))
    return n11, n00, n10, n01


def q_statistic_pair(a, b) -> float | None:
    n11, n00, n10, n01 = _pair_counts(np.asarray(a), np.asarray(b))
    den = n11 * n00 + n01 * n10
    if den == 0:
        return None
    return (n11 * n00 - n01 * n10) / den


def disagreement_pair(a, b) -> float:
    n11, n00, n10, n01 = _pair_counts(np.asarray(a), np.asarray(b))
    return (n01 + n10) / (n11 + n00 + n10 + n01)


def diversity_report(cm: CorrectnessMatrix) -> DiversityReport:
    """All five statistics for ``cm``; entropy fields are left unset."""
    E = cm.entries.astype(np.int64)
    L, N = E.shape
    correct = E.sum(axis=0)  # l_i
    spread = float(np.sum(correct * (L - correct)))
    p_bar = float(E.sum()) / (N * L)

    kw = spread / (N * L * L)

    q_vals = []
    d_vals = []
    for a, b in combinations(range(L), 2):
        d_vals.append(disagreement_pair(E[a], E[b]))
        q = q_statistic_pair(E[a], E[b])
        if q is not None:
            q_vals.append(q)
    n_pairs = L * (L - 1) // 2
    disagreement = float(np.mean(d_vals))
    q_stat = float(np.mean(q_vals)) if q_vals else None

    chance = N * (L - 1) * p_bar * (1.0 - p_bar)
    kappa = 1.0 - (spread / L) / chance if chance > 0 else None

    failures = L - correct
    p_fail = np.bincount(failures, minlength=L + 1) / N
    i = np.arange(L + 1)
    p1 = float(np.sum(i / L * p_fail))
    p2 = float(np.sum(i * (i - 1) / (L * (L - 1)) * p_fail))
    gd = 1.0 - p2 / p1 if p1 > 0 else None

    return DiversityReport(
        kappa=kappa,
        q_statistic=q_stat,
        kw_variance=kw,
        disagreement=disagreement,
        generalized_diversity=gd,
        q_pairs_used=len(q_vals),
        q_pairs_excluded=n_pairs - len(q_vals),
        mean_accuracy=p_bar,
    )
