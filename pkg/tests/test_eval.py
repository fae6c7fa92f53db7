import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entsel.dataset import LabeledDataset
from entsel.eval import (
    ClassifierConfig,
    DegenerateModelError,
    EvalError,
    SplitSpec,
    accuracy,
    evaluate_regimes,
    knn_classify,
    logreg_objective,
    logreg_predict,
    logreg_train,
    provenance_counts,
    repeat_splits,
    select_on_train,
    sweep_k,
    sweep_t,
)
from entsel.selector import run_pipeline
from entsel.synth import SynthConfig, generate
from oracles import brute_knn


def two_clusters(seed, n=20):
    rng = np.random.default_rng(seed)
    a = rng.normal(0.0, 1.0, size=(n, 2))
    b = rng.normal(0.0, 1.0, size=(n, 2)) + [10.0, 0.0]
    return np.vstack([a, b]), np.repeat([0, 1], n)


def test_knn_single_point():
    assert knn_classify([[0.0, 0.0]], [1], [[5.0, -3.0], [0.0, 0.0]], k=1, class_count=2).tolist() == [1, 1]


def test_knn_exact_match():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]])
    assert knn_classify(X, [0, 1, 2], [[1.0, 1.0]], k=1).tolist() == [1]


def test_knn_distance_tie_goes_to_lower_row():
    X = np.array([[1.0], [-1.0]])
    assert knn_classify(X, [1, 0], [[0.0]], k=1).tolist() == [1]


def test_knn_vote_tie_goes_to_smaller_class():
    X = np.array([[1.0], [2.0], [3.0]])
    # k=3 with three classes: one vote each
    assert knn_classify(X, [2, 1, 0], [[0.0]], k=3).tolist() == [0]


def test_knn_separable_clusters():
    X, y = two_clusters(0)
    Xt, yt = two_clusters(1)
    pred = knn_classify(X, y, Xt, k=3)
    expected = [brute_knn(X.tolist(), y.tolist(), row, 3) for row in Xt.tolist()]
    assert pred.tolist() == expected
    assert accuracy(pred, yt) == 1.0


@given(st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_knn_matches_bruteforce(seed):
    rng = np.random.default_rng(seed)
    n, d = int(rng.integers(3, 25)), int(rng.integers(1, 5))
    # integer grid produces plenty of exact distance ties
    X = rng.integers(-3, 4, size=(n, d)).astype(float)
    y = rng.integers(0, 3, n)
    Q = rng.integers(-3, 4, size=(6, d)).astype(float)
    k = int(rng.choice([1, 3, 5]))
    if k > n:
        k = 1
    got = knn_classify(X, y, Q, k=k, class_count=3)
    assert got.tolist() == [brute_knn(X.tolist(), y.tolist(), q, k) for q in Q.tolist()]


def test_knn_training_accuracy_k1():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(50, 3))
    y = rng.integers(0, 4, 50)
    assert accuracy(knn_classify(X, y, X, k=1), y) == 1.0


def test_knn_contract():
    with pytest.raises(EvalError):
        knn_classify(np.zeros((0, 2)), [], [[0.0, 0.0]], k=1)
    with pytest.raises(EvalError):
        knn_classify([[0.0]], [0], [[0.0]], k=2)
    with pytest.raises(EvalError):
        knn_classify([[0.0]], [0], [[0.0]], k=3)


def test_logreg_separable():
    X, y = two_clusters(2)
    model = logreg_train(X, y)
    assert accuracy(logreg_predict(model, X), y) == 1.0
    # cross-check against the k-NN oracle on held-out points
    Xt, _ = two_clusters(3)
    assert logreg_predict(model, Xt).tolist() == knn_classify(X, y, Xt, k=3).tolist()


def test_logreg_zero_epochs():
    X, y = two_clusters(5)
    model = logreg_train(X, y, class_count=3, epochs=0)
    assert np.all(model.weights == 0) and np.all(model.bias == 0)
    assert logreg_predict(model, X).tolist() == [0] * len(y)


def test_logreg_single_class():
    with pytest.raises(DegenerateModelError):
        logreg_train(np.ones((4, 2)), [1, 1, 1, 1])


def test_logreg_loss_decreases():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(60, 4))
    y = rng.integers(0, 3, 60)
    model = logreg_train(X, y, 3, epochs=200, learning_rate=0.05, l2=1e-3)
    assert np.all(np.diff(model.losses) <= 1e-15)


def test_logreg_gradient_matches_finite_differences():
    rng = np.random.default_rng(21)
    X = rng.normal(size=(15, 4))
    y = rng.integers(0, 3, 15)
    h = 1e-6
    for _ in range(10):
        params = rng.normal(size=4 * 3 + 3)
        _, grad = logreg_objective(params, X, y, 3, l2=0.1)
        num = np.empty_like(params)
        for i in range(params.size):
            e = np.zeros_like(params)
            e[i] = h
            num[i] = (
                logreg_objective(params + e, X, y, 3, 0.1)[0]
                - logreg_objective(params - e, X, y, 3, 0.1)[0]
            ) / (2 * h)
        assert np.linalg.norm(grad - num) / np.linalg.norm(num) < 1e-4


def test_accuracy():
    assert accuracy([1, 2, 3], [1, 2, 3]) == 1.0
    assert accuracy([0, 0], [1, 1]) == 0.0
    assert accuracy([1, 1, 0, 1], [1, 1, 1, 1]) == 0.75
    with pytest.raises(EvalError):
        accuracy([1], [1, 2])


@given(st.lists(st.integers(0, 4), min_size=1, max_size=30), st.randoms())
@settings(max_examples=50, deadline=None)
def test_accuracy_relabeling_invariant(truth, rnd):
    pred = [rnd.randrange(5) for _ in truth]
    perm = list(range(5))
    rnd.shuffle(perm)
    assert accuracy([perm[p] for p in pred], [perm[t] for t in truth]) == accuracy(pred, truth)


def test_splits():
    s = SplitSpec.random_equal(11, seed=3)
    assert len(s.train) == 5 and len(s.test) == 6
    assert set(s.train) | set(s.test) == set(range(11))
    assert SplitSpec.random_equal(11, seed=3) == s
    assert len({sp.train for sp in repeat_splits(40, 10, 0)}) == 10
    with pytest.raises(EvalError):
        SplitSpec((0, 1), (1, 2))


@pytest.fixture(scope="module")
def planted():
    return generate(SynthConfig(classes=3, samples_per_class=20, informative_per_class=3,
                                noise_features=12, duplicates=1, seed=4))


def test_sweep_k_shape(planted):
    ds = planted.dataset
    curve = sweep_k(ds, [0.1], T=10, repeats=1)
    assert len(curve.points) == 1
    assert curve.points[0].diagnostics["k_resolved"] == [3]
    grid = sweep_k(ds, T=10, repeats=2)
    assert [p.value for p in grid.points] == [0.01, 0.05, 0.1, 0.25, 0.5, 1.0]
    for p in grid.points:
        assert 0.0 <= p.mean <= 1.0
    csv = grid.to_csv().splitlines()
    assert csv[0] == "k_fraction,mean,std,repeats" and len(csv) == 7


def test_sweep_k_full_fraction_reports_short_sets(planted):
    # informative columns sit near -1 off-class, so fewer than K are positive
    curve = sweep_k(planted.dataset, [1.0], T=5, repeats=1)
    diag = curve.points[0].diagnostics
    assert diag["features_below_k"][0] > 0
    assert diag["mean_topk_fill"] < 1.0


def test_sweep_t(planted):
    ds = planted.dataset
    n_elig = run_pipeline(ds, 0.1, 1).n_eligible
    curve = sweep_t(ds, [2, 5, n_elig + 10], repeats=3)
    assert [p.value for p in curve.points] == [2, 5, n_elig + 10]
    assert curve.points[-1].diagnostics["clamped"]
    assert curve.points[-1].diagnostics["t_effective"] == n_elig
    assert not curve.points[0].diagnostics["clamped"]
    assert all(p.repeats == 3 for p in curve.points)
    assert any(p.std > 0 for p in curve.points) or all(p.mean == 1.0 for p in curve.points)


def test_sweep_t_prefix(planted):
    ds = planted.dataset
    split = SplitSpec.random_equal(ds.n_samples, 0)
    big = select_on_train(ds, split, 0.1, 30)
    for t in (1, 7, 15):
        assert select_on_train(ds, split, 0.1, t).selected == big.selected[:t]


def test_sweep_concurrent_matches_serial(planted):
    ds = planted.dataset
    a = sweep_k(ds, [0.1, 0.5], T=6, repeats=3, n_jobs=1)
    b = sweep_k(ds, [0.1, 0.5], T=6, repeats=3, n_jobs=4)
    assert a == b


def test_provenance_counts():
    ds = LabeledDataset(
        np.eye(4) + 0.1, [0, 1, 0, 1],
        feature_names=["m_1", "o_3", "m_2", "o_4"],
        provenance=["material", "object", "material", "object"],
    )
    res = run_pipeline(ds, 1, 3)
    history = provenance_counts(res, ds)
    assert len(history) == 3
    for t, counts in enumerate(history, start=1):
        assert sum(counts.values()) == t
    names = [ds.feature_names[j] for j in res.selected]
    final = history[-1]
    assert final["material"] == sum(n.startswith("m_") for n in names)
    assert final["object"] == sum(n.startswith("o_") for n in names)


def test_provenance_single_block():
    ds = LabeledDataset(np.eye(3) + 0.1, [0, 1, 2], provenance=["material"] * 3)
    history = provenance_counts(run_pipeline(ds, 1, 3), ds)
    assert history[-1] == {"material": 3}
    ds2 = LabeledDataset(np.eye(3) + 0.1, [0, 1, 2], provenance=["material"] * 2 + ["object"])
    res = run_pipeline(ds2, 1, 1)
    assert set(provenance_counts(res, ds2)[-1]) == {"material", "object"}


def test_evaluate_regimes(planted):
    table = evaluate_regimes(planted.dataset, 0.1, 12, ClassifierConfig(), splits=3, seed=1)
    assert list(table.cells) == ["O", "M", "MO", "SMO"] or list(table.cells) == ["M", "O", "MO", "SMO"]
    for cell in table.cells.values():
        assert cell.runs == 3 and 0 <= cell.mean <= 1
    assert table.block_diversity is not None
    assert table.h_s <= table.h_f


def test_evaluate_single_block():
    sd = generate(SynthConfig(classes=2, samples_per_class=10, informative_per_class=2,
                              noise_features=2, seed=0))
    ds = sd.dataset
    mono = LabeledDataset(ds.features, ds.labels, feature_names=ds.feature_names)
    table = evaluate_regimes(mono, 0.2, 3, ClassifierConfig(kind="logreg", epochs=50), splits=2)
    assert list(table.cells) == ["MO", "SMO"]
    assert any("single provenance block" in n for n in table.notes)
    assert table.block_diversity is None
