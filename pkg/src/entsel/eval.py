"""Evaluation classifiers, random equal splits and robustness sweeps.

Two small classifiers stand in for a kernel SVM: Euclidean k-NN and
multinomial logistic regression trained by full-batch gradient descent.
Columns are standardized with train-split statistics before classification;
selection itself always sees the raw activations.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .dataset import LabeledDataset
from .diversity import CorrectnessMatrix, DiversityReport, avg_entropy, diversity_report
from .ranking import rank_all_features
from .selector import DEFAULT_K_FRACTION, DEFAULT_T, SelectionResult, resolve_k, select_features
from .synth import make_rng

DEFAULT_SPLITS = 10
K_FRACTION_GRID = (0.01, 0.05, 0.10, 0.25, 0.50, 1.00)
T_GRID = (100, 200, 400, 1000, 2000, 3000)

BLOCK_ABBREV = {"material": "M", "object": "O"}


class EvalError(ValueError):
    code = "E_EVAL"


class DegenerateModelError(EvalError):
    code = "E_DEGENERATE"


# -- splits ---------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    train: tuple[int, ...]
    test: tuple[int, ...]
    seed: int | None = None

    def __post_init__(self):
        if set(self.train) & set(self.test):
            raise EvalError("train and test rows overlap")

    @classmethod
    def random_equal(cls, n_samples: int, seed: int) -> "SplitSpec":
        """Shuffle rows and cut them in half; the extra row of an odd count goes to test."""
        if n_samples < 2:
            raise EvalError("need at least two rows to split")
        perm = make_rng(seed).permutation(n_samples)
        half = n_samples // 2
        return cls(
            tuple(sorted(int(i) for i in perm[:half])),
            tuple(sorted(int(i) for i in perm[half:])),
            seed,
        )


def repeat_splits(n_samples: int, repeats: int, seed: int) -> list[SplitSpec]:
    if repeats < 1:
        raise EvalError("repeats must be >= 1")
    return [SplitSpec.random_equal(n_samples, seed + r) for r in range(repeats)]


# -- classifiers ----------------------------------------------------------


def standardize(train: np.ndarray, test: np.ndarray):
    mu = train.mean(axis=0)
    sd = train.std(axis=0)
    sd[sd == 0] = 1.0
    return (train - mu) / sd, (test - mu) / sd


def knn_classify(X_train, y_train, X_test, k: int = 5, class_count: int | None = None):
    """Majority vote of the ``k`` nearest training rows (Euclidean).

    Equal distances favour the lower training-row index; tied votes go to the
    smallest class id.
    """
    X_train = np.asarray(X_train, dtype=np.float64)
    X_test = np.asarray(X_test, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.int64)
    n = X_train.shape[0]
    if n == 0:
        raise EvalError("k-NN needs a non-empty training set")
    if k < 1 or k % 2 == 0:
        raise EvalError(f"k must be a positive odd integer, got {k}")
    if k > n:
        raise EvalError(f"k={k} exceeds training size {n}")
    C = class_count or int(y_train.max()) + 1
    if X_train.shape[1] == 0:
        d2 = np.zeros((X_test.shape[0], n))
    else:
        d2 = cdist(X_test, X_train, metric="sqeuclidean")
    nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
    votes = y_train[nearest]
    pred = np.empty(X_test.shape[0], dtype=np.int64)
    for i in range(X_test.shape[0]):
        pred[i] = int(np.argmax(np.bincount(votes[i], minlength=C)))
    return pred


@dataclass
class LogRegModel:
    weights: np.ndarray  # (n_features, n_classes)
    bias: np.ndarray  # (n_classes,)
    losses: list[float] = field(default_factory=list)

    @property
    def class_count(self) -> int:
        return self.bias.shape[0]


def logreg_objective(params, X, y, class_count: int, l2: float = 0.0):
    """Mean cross-entropy plus ``l2/2 * ||W||^2`` and its gradient.

    ``params`` is the flattened ``W`` (row-major, features x classes) followed by ``b``.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    C = class_count
    W = params[: d * C].reshape(d, C)
    b = params[d * C :]
    Z = X @ W + b
    Zs = Z - Z.max(axis=1, keepdims=True)
    logp = Zs - np.log(np.exp(Zs).sum(axis=1, keepdims=True))
    loss = -logp[np.arange(n), y].mean() + 0.5 * l2 * float(np.sum(W * W))
    G = np.exp(logp)
    G[np.arange(n), y] -= 1.0
    G /= n
    gW = X.T @ G + l2 * W
    gb = G.sum(axis=0)
    return float(loss), np.concatenate([gW.ravel(), gb])


def logreg_train(
    X,
    y,
    class_count: int | None = None,
    epochs: int = 500,
    learning_rate: float = 0.1,
    l2: float = 1e-4,
) -> LogRegModel:
    """Full-batch gradient descent from zero weights."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if np.unique(y).size < 2:
        raise DegenerateModelError("logistic regression needs at least two classes in train")
    C = class_count or int(y.max()) + 1
    d = X.shape[1]
    params = np.zeros(d * C + C)
    losses = []
    for _ in range(epochs):
        loss, grad = logreg_objective(params, X, y, C, l2)
        losses.append(loss)
        params -= learning_rate * grad
    return LogRegModel(params[: d * C].reshape(d, C).copy(), params[d * C :].copy(), losses)


def logreg_predict(model: LogRegModel, X) -> np.ndarray:
    scores = np.asarray(X, dtype=np.float64) @ model.weights + model.bias
    return np.argmax(scores, axis=1).astype(np.int64)


def accuracy(pred, truth) -> float:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise EvalError(f"length mismatch: {pred.shape[0]} predictions, {truth.shape[0]} labels")
    if pred.size == 0:
        raise EvalError("accuracy of an empty prediction vector is undefined")
    return float(np.mean(pred == truth))


@dataclass(frozen=True)
class ClassifierConfig:
    kind: str = "knn"
    k: int = 5
    epochs: int = 500
    learning_rate: float = 0.1
    l2: float = 1e-4

    def __post_init__(self):
        if self.kind not in ("knn", "logreg"):
            raise EvalError(f"unknown classifier {self.kind!r}")

    def fit_predict(self, X_train, y_train, X_test, class_count: int) -> np.ndarray:
        X_train, X_test = standardize(X_train, X_test)
        if self.kind == "knn":
            n = X_train.shape[0]
            # largest odd k the training set allows
            k = min(self.k, n if n % 2 else n - 1)
            return knn_classify(X_train, y_train, X_test, max(k, 1), class_count)
        model = logreg_train(
            X_train, y_train, class_count, self.epochs, self.learning_rate, self.l2
        )
        return logreg_predict(model, X_test)


def classify_columns(
    ds: LabeledDataset, split: SplitSpec, columns: Sequence[int], clf: ClassifierConfig
) -> np.ndarray:
    """Train on ``split.train`` restricted to ``columns``; predict ``split.test``."""
    cols = list(columns)
    tr = list(split.train)
    te = list(split.test)
    X = ds.features
    return clf.fit_predict(
        X[np.ix_(tr, cols)], ds.labels[tr], X[np.ix_(te, cols)], ds.class_count
    )


def select_on_train(ds: LabeledDataset, split: SplitSpec, k_spec, T: int) -> SelectionResult:
    train = ds.select_rows(split.train)
    K = resolve_k(k_spec, train.n_samples)
    return select_features(rank_all_features(train, K), T)


# -- sweeps ---------------------------------------------------------------


@dataclass(frozen=True)
class SweepPoint:
    value: float
    mean: float
    std: float
    repeats: int
    diagnostics: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class SweepCurve:
    parameter: str
    points: tuple[SweepPoint, ...]

    def __post_init__(self):
        vals = [p.value for p in self.points]
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise EvalError("sweep parameter values must be strictly increasing")

    def to_csv(self) -> str:
        lines = [f"{self.parameter},mean,std,repeats"]
        for p in self.points:
            lines.append(f"{p.value!r},{p.mean!r},{p.std!r},{p.repeats}")
        return "\n".join(lines) + "\n"


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), std


def _run_jobs(fn: Callable, jobs: Iterable, n_jobs: int) -> list:
    jobs = list(jobs)
    if n_jobs <= 1:
        return [fn(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, jobs))


def sweep_k(
    ds: LabeledDataset,
    k_fractions: Sequence[float] = K_FRACTION_GRID,
    T: int = DEFAULT_T,
    classifier: ClassifierConfig = ClassifierConfig(),
    repeats: int = DEFAULT_SPLITS,
    seed: int = 0,
    n_jobs: int = 1,
) -> SweepCurve:
    """Test accuracy as a function of the top-K fraction, with ``T`` fixed.

    Each repeat draws a fresh seeded equal split; the same splits are reused
    across grid points. Diagnostics record the resolved K and the mean
    fraction of K actually filled by positive activations.
    """
    fracs = [float(f) for f in k_fractions]
    for f in fracs:
        if not 0.0 < f <= 1.0:
            raise EvalError(f"K fraction {f} outside (0, 1]")
    splits = repeat_splits(ds.n_samples, repeats, seed)

    def job(key):
        fi, r = key
        split = splits[r]
        result = select_on_train(ds, split, fracs[fi], T)
        pred = classify_columns(ds, split, result.selected, classifier)
        truth = ds.labels[list(split.test)]
        elig = [s for s in result.feature_stats if s.eligible]
        fill = float(np.mean([len(s.top_k) / result.k for s in elig]))
        short = sum(1 for s in result.feature_stats if len(s.top_k) < result.k)
        return accuracy(pred, truth), result.k, fill, short, result.t_effective

    keys = [(fi, r) for fi in range(len(fracs)) for r in range(repeats)]
    out = dict(zip(keys, _run_jobs(job, keys, n_jobs)))
    points = []
    for fi, f in enumerate(fracs):
        runs = [out[(fi, r)] for r in range(repeats)]
        mean, std = _mean_std([a for a, *_ in runs])
        points.append(
            SweepPoint(
                f,
                mean,
                std,
                repeats,
                {
                    "k_resolved": [run[1] for run in runs],
                    "mean_topk_fill": float(np.mean([run[2] for run in runs])),
                    "features_below_k": [run[3] for run in runs],
                    "t_effective": [run[4] for run in runs],
                },
            )
        )
    return SweepCurve("k_fraction", tuple(points))


def sweep_t(
    ds: LabeledDataset,
    t_values: Sequence[int] = T_GRID,
    k_spec=DEFAULT_K_FRACTION,
    classifier: ClassifierConfig = ClassifierConfig(),
    repeats: int = DEFAULT_SPLITS,
    seed: int = 0,
    n_jobs: int = 1,
) -> SweepCurve:
    """Test accuracy as a function of ``T`` with K fixed.

    Selection runs once per repeat at ``max(t_values)``; smaller ``T`` reuse its
    prefix. Values beyond the eligible count are clamped and flagged.
    """
    ts = [int(t) for t in t_values]
    if not ts or min(ts) < 1:
        raise EvalError("t values must be >= 1")
    splits = repeat_splits(ds.n_samples, repeats, seed)
    t_max = max(ts)

    def job(r):
        split = splits[r]
        full = select_on_train(ds, split, k_spec, t_max)
        truth = ds.labels[list(split.test)]
        accs = []
        for t in ts:
            sel = full.prefix(t).selected
            accs.append(accuracy(classify_columns(ds, split, sel, classifier), truth))
        return accs, full.n_eligible, full.k

    runs = _run_jobs(job, range(repeats), n_jobs)
    n_eligible = runs[0][1]
    points = []
    for ti, t in enumerate(ts):
        mean, std = _mean_std([run[0][ti] for run in runs])
        points.append(
            SweepPoint(
                t,
                mean,
                std,
                repeats,
                {
                    "t_effective": min(t, n_eligible),
                    "clamped": t > n_eligible,
                    "k_resolved": [run[2] for run in runs],
                },
            )
        )
    return SweepCurve("t", tuple(points))


# -- provenance -----------------------------------------------------------


def provenance_counts(result: SelectionResult, ds: LabeledDataset) -> list[dict[str, int]]:
    """Cumulative selected-feature count per block tag after each iteration.

    Entry ``t - 1`` holds the counts after ``t`` selections; every tag present
    in ``ds`` appears, with zero where nothing was selected from it.
    """
    counts = {tag: 0 for tag in ds.blocks()}
    history = []
    for j in result.selected:
        counts[ds.provenance[j]] += 1
        history.append(dict(counts))
    return history


# -- accuracy table over feature regimes ----------------------------------


@dataclass(frozen=True)
class RegimeCell:
    mean: float
    std: float
    runs: int


@dataclass(frozen=True)
class RegimeTable:
    cells: dict  # regime name -> RegimeCell, in column order
    notes: tuple[str, ...]
    k_resolved: int
    t: int
    t_effective: tuple[int, ...]
    h_f: float
    h_s: float
    block_diversity: DiversityReport | None
    first_split_predictions: dict  # regime -> predictions on split 0
    first_split_truth: np.ndarray


def regime_name(tag: str) -> str:
    return BLOCK_ABBREV.get(tag, tag)


def evaluate_regimes(
    ds: LabeledDataset,
    k_spec=DEFAULT_K_FRACTION,
    T: int = DEFAULT_T,
    classifier: ClassifierConfig = ClassifierConfig(),
    splits: int = DEFAULT_SPLITS,
    seed: int = 0,
    n_jobs: int = 1,
) -> RegimeTable:
    """Accuracy of each single block, all columns (MO) and the selection (SMO).

    With exactly two blocks, the decisions of the two single-block classifiers
    on the first split also feed a diversity report.
    """
    blocks = ds.blocks()
    notes = []
    regimes = {}
    if len(blocks) > 1:
        for tag in blocks:
            regimes[regime_name(tag)] = ds.columns_in_block(tag)
    else:
        notes.append(
            f"single provenance block {blocks[0]!r}: per-block columns collapse into MO"
        )
    regimes["MO"] = list(range(ds.n_features))
    split_list = repeat_splits(ds.n_samples, splits, seed)

    def job(r):
        split = split_list[r]
        result = select_on_train(ds, split, k_spec, T)
        truth = ds.labels[list(split.test)]
        preds = {name: classify_columns(ds, split, cols, classifier) for name, cols in regimes.items()}
        preds["SMO"] = classify_columns(ds, split, result.selected, classifier)
        stats = result.feature_stats
        elig = [s.feature_id for s in stats if s.eligible]
        return (
            {name: accuracy(p, truth) for name, p in preds.items()},
            preds,
            truth,
            result,
            avg_entropy(stats, elig),
            avg_entropy(stats, result.selected),
        )

    runs = _run_jobs(job, range(splits), n_jobs)
    cells = {}
    for name in list(regimes) + ["SMO"]:
        mean, std = _mean_std([run[0][name] for run in runs])
        cells[name] = RegimeCell(mean, std, splits)

    first_preds, first_truth = runs[0][1], runs[0][2]
    block_div = None
    if len(blocks) == 2:
        names = [regime_name(t) for t in blocks]
        cm = CorrectnessMatrix.from_predictions([first_preds[n] for n in names], first_truth)
        block_div = diversity_report(cm)
        notes.append(f"block diversity computed on split 0 between {names[0]} and {names[1]}")

    h_f = float(np.mean([run[4] for run in runs]))
    h_s = float(np.mean([run[5] for run in runs]))
    if block_div is not None:
        block_div = block_div.with_entropies(h_f, h_s)
    return RegimeTable(
        cells=cells,
        notes=tuple(notes),
        k_resolved=runs[0][3].k,
        t=int(T),
        t_effective=tuple(run[3].t_effective for run in runs),
        h_f=h_f,
        h_s=h_s,
        block_diversity=block_div,
        first_split_predictions=first_preds,
        first_split_truth=first_truth,
    )
