import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entsel.diversity import (
    CorrectnessMatrix,
    DiversityError,
    avg_entropy,
    diversity_report,
)
from entsel.ranking import FeatureStats, TopKSet
from oracles import brute_diversity

# published (disagreement, Kohavi-Wolpert variance) pairs, rounded to 4 decimals
PUBLISHED_ROWS = [(0.0279, 0.0070), (0.0172, 0.0043), (0.0008, 0.0002)]


def stat(j, h):
    return FeatureStats(j, TopKSet(j, (0,), 1, 1), h)


def test_avg_entropy():
    stats = [stat(0, 2.0), stat(1, 3.0), stat(2, 1.7)]
    assert avg_entropy(stats, [0, 1]) == 2.5
    assert avg_entropy(stats, {2}) == 1.7
    with pytest.raises(DiversityError):
        avg_entropy(stats, [])
    with pytest.raises(DiversityError):
        avg_entropy([FeatureStats(0, TopKSet(0, (), 1, 1), None)], [0])


def test_identical_classifiers():
    rep = diversity_report(CorrectnessMatrix(np.array([[1, 1, 0, 0], [1, 1, 0, 0]])))
    assert rep.disagreement == 0.0
    assert rep.kw_variance == 0.0
    assert rep.q_statistic == 1.0
    assert rep.kappa == 1.0
    assert rep.generalized_diversity == 0.0


def test_complementary_classifiers():
    rep = diversity_report(CorrectnessMatrix(np.array([[1, 0, 1, 0], [0, 1, 0, 1]])))
    assert rep.disagreement == 1.0
    assert rep.kw_variance == 0.25
    assert rep.q_statistic == -1.0
    assert rep.kappa == -1.0
    assert rep.generalized_diversity == 1.0


def test_undefined_values_are_surfaced():
    # both always right: p_bar = 1, Q denominator 0, nobody fails
    rep = diversity_report(CorrectnessMatrix(np.ones((2, 5), dtype=int)))
    assert rep.kappa is None
    assert rep.q_statistic is None
    assert rep.q_pairs_excluded == 1
    assert rep.generalized_diversity is None
    assert rep.disagreement == 0.0


def test_q_pair_exclusion_with_three_classifiers():
    E = np.array([[1, 1, 0, 0], [1, 1, 1, 1], [1, 0, 1, 0]])
    rep = diversity_report(CorrectnessMatrix(E))
    # pairs (0,1) and (1,2) involve an always-correct classifier -> N00 = N01 = 0
    assert rep.q_pairs_used == 1 and rep.q_pairs_excluded == 2
    assert rep.q_statistic == pytest.approx(0.0)


def test_rejects_non_binary():
    with pytest.raises(DiversityError):
        CorrectnessMatrix(np.array([[1, 2], [0, 1]]))
    with pytest.raises(DiversityError):
        CorrectnessMatrix(np.array([[1, 0, 1]]))


def test_from_predictions():
    cm = CorrectnessMatrix.from_predictions([[0, 1, 2], [0, 0, 2]], [0, 1, 1])
    assert cm.entries.tolist() == [[1, 1, 0], [1, 0, 0]]
    with pytest.raises(DiversityError):
        CorrectnessMatrix.from_predictions([[0, 1], [0]], [0, 1])


@pytest.mark.parametrize("dis, kw", PUBLISHED_ROWS)
def test_published_rows_satisfy_kw_equals_quarter_disagreement(dis, kw):
    # each printed value carries +-5e-5 rounding; D/4 shrinks D's share to 1.25e-5
    assert abs(dis / 4 - kw) <= 5e-5 + 1.25e-5


binary = st.integers(1, 60).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(0, 1), min_size=n, max_size=n),
        st.lists(st.integers(0, 1), min_size=n, max_size=n),
    )
)


@given(binary)
@settings(max_examples=200, deadline=None)
def test_two_classifier_relations(pair):
    a, b = pair
    rep = diversity_report(CorrectnessMatrix(np.array([a, b])))
    ref = brute_diversity(a, b)
    assert abs(rep.kw_variance - rep.disagreement / 4) <= 1e-12
    assert rep.disagreement == pytest.approx(ref["disagreement"], abs=1e-15)
    assert rep.q_statistic == (None if ref["q"] is None else pytest.approx(ref["q"], abs=1e-15))

    swapped = diversity_report(CorrectnessMatrix(np.array([b, a])))
    doubled = diversity_report(CorrectnessMatrix(np.array([a + a, b + b])))
    for other in (swapped, doubled):
        for name in ("kappa", "q_statistic", "kw_variance", "disagreement", "generalized_diversity"):
            x, y = getattr(rep, name), getattr(other, name)
            assert (x is None) == (y is None)
            if x is not None:
                assert y == pytest.approx(x, abs=1e-12)


@given(st.integers(2, 6), st.integers(1, 40), st.randoms())
@settings(max_examples=150, deadline=None)
def test_ranges_general_L(L, N, rnd):
    E = np.array([[rnd.randrange(2) for _ in range(N)] for _ in range(L)])
    rep = diversity_report(CorrectnessMatrix(E))
    tol = 1e-12
    if rep.kappa is not None:
        assert -1 - tol <= rep.kappa <= 1 + tol
    if rep.q_statistic is not None:
        assert -1 - tol <= rep.q_statistic <= 1 + tol
    assert rep.kw_variance >= 0
    assert 0 <= rep.disagreement <= 1
    if rep.generalized_diversity is not None:
        assert -tol <= rep.generalized_diversity <= 1 + tol

    perm = list(range(L))
    rnd.shuffle(perm)
    shuffled = diversity_report(CorrectnessMatrix(E[perm]))
    assert shuffled.kw_variance == pytest.approx(rep.kw_variance, abs=1e-15)
    assert shuffled.disagreement == pytest.approx(rep.disagreement, abs=1e-12)


def test_kappa_matches_hand_formula():
    E = np.array([[1, 1, 0, 1, 0, 1], [1, 0, 0, 1, 1, 1], [0, 1, 0, 1, 1, 1]])
    L, N = E.shape
    l = E.sum(axis=0)
    p = E.mean()
    expected = 1 - (np.sum(l * (L - l)) / L) / (N * (L - 1) * p * (1 - p))
    assert diversity_report(CorrectnessMatrix(E)).kappa == pytest.approx(expected, abs=1e-15)
