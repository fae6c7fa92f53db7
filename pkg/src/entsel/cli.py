"""``entsel`` command line: select, evaluate, diversity, sweep, synth.

Settings resolve as command-line flag, then ``--config`` file value, then the
built-in default. The config file holds ``key = value`` lines whose keys are
the long flag names without dashes (``k``, ``t``, ``features-b`` or
``features_b``, ...).

Errors go to stderr as ``entsel: error[CODE]: message`` and exit with status 1.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import (
    LabeledDataset,
    ProvenanceManifest,
    atomic_write_text,
    concatenate,
    load_dataset,
    load_manifest,
)
from .diversity import CorrectnessMatrix, avg_entropy, diversity_report
from .eval import (
    DEFAULT_SPLITS,
    K_FRACTION_GRID,
    T_GRID,
    ClassifierConfig,
    evaluate_regimes,
    sweep_k,
    sweep_t,
)
from .report import (
    diversity_to_dict,
    dumps,
    format_diversity_text,
    format_regime_text,
    format_selection_text,
    format_sweep_text,
    regime_table_to_dict,
    selection_to_dict,
    sweep_to_dict,
)
from .selector import DEFAULT_K_FRACTION, DEFAULT_T, parse_k, run_pipeline
from .synth import SynthConfig, generate, write_synth


class CliError(Exception):
    def __init__(self, message: str, code: str = "E_USAGE"):
        super().__init__(message)
        self.code = code


# -- configuration ----------------------------------------------------------

DEFAULTS = {
    "features": None,
    "features_b": None,
    "manifest": None,
    "class_count": None,
    "k": str(DEFAULT_K_FRACTION),
    "t": DEFAULT_T,
    "classifier": "knn",
    "knn_k": 5,
    "epochs": 500,
    "lr": 0.1,
    "l2": 1e-4,
    "splits": DEFAULT_SPLITS,
    "seed": 0,
    "jobs": 1,
    "out": "entsel-out",
    "param": "k",
    "grid": None,
    "predictions": None,
    "truth": None,
    # synth
    "classes": 5,
    "samples_per_class": 40,
    "informative": 4,
    "noise": 40,
    "duplicates": 0,
    "on_mean": 5.0,
    "off_mean": -1.0,
    "spread": 1.0,
}

_INT_KEYS = {"t", "knn_k", "epochs", "splits", "seed", "jobs", "class_count", "classes",
             "samples_per_class", "informative", "noise", "duplicates"}
_FLOAT_KEYS = {"lr", "l2", "on_mean", "off_mean", "spread"}


def read_config_file(path) -> dict:
    values = {}
    p = Path(path)
    if not p.is_file():
        raise CliError(f"config file not found: {p}", "E_IO")
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError(f"{p}: line {lineno}: expected 'key = value'", "E_CONFIG")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in DEFAULTS:
            raise CliError(f"{p}: line {lineno}: unknown key {key!r}", "E_CONFIG")
        values[key] = value
    return values


def _coerce(key: str, value):
    if value is None:
        return None
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
    except ValueError:
        raise CliError(f"bad value for {key}: {value!r}", "E_CONFIG")
    if key == "predictions" and isinstance(value, str):
        return value.split()
    return value


@dataclass(frozen=True)
class RunConfig:
    features: str | None
    features_b: str | None
    manifest: str | None
    class_count: int | None
    k_spec: object
    t: int
    classifier: ClassifierConfig
    splits: int
    seed: int
    jobs: int
    out: Path

    def __post_init__(self):
        if isinstance(self.k_spec, float) and not 0.0 < self.k_spec <= 1.0:
            raise CliError(f"--k fraction must lie in (0, 1], got {self.k_spec}")
        if isinstance(self.k_spec, int) and self.k_spec < 1:
            raise CliError(f"--k count must be >= 1, got {self.k_spec}")
        if self.t < 1:
            raise CliError(f"--t must be >= 1, got {self.t}")
        if self.splits < 1:
            raise CliError(f"--splits must be >= 1, got {self.splits}")


def resolve(args: argparse.Namespace) -> dict:
    file_values = read_config_file(args.config) if args.config else {}
    merged = {}
    for key, default in DEFAULTS.items():
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = _coerce(key, flag)
        elif key in file_values:
            merged[key] = _coerce(key, file_values[key])
        else:
            merged[key] = default
    return merged


def run_config(opts: dict) -> RunConfig:
    try:
        k_spec = parse_k(opts["k"])
    except ValueError:
        raise CliError(f"--k must be a count or a fraction, got {opts['k']!r}")
    try:
        clf = ClassifierConfig(
            kind=opts["classifier"],
            k=opts["knn_k"],
            epochs=opts["epochs"],
            learning_rate=opts["lr"],
            l2=opts["l2"],
        )
    except ValueError as exc:
        raise CliError(str(exc))
    return RunConfig(
        features=opts["features"],
        features_b=opts["features_b"],
        manifest=opts["manifest"],
        class_count=opts["class_count"],
        k_spec=k_spec,
        t=opts["t"],
        classifier=clf,
        splits=opts["splits"],
        seed=opts["seed"],
        jobs=opts["jobs"],
        out=Path(opts["out"]),
    )


def load_inputs(cfg: RunConfig) -> LabeledDataset:
    if not cfg.features:
        raise CliError("--features is required")
    manifest = load_manifest(cfg.manifest) if cfg.manifest else ProvenanceManifest()
    ds = load_dataset(cfg.features, manifest, class_count=cfg.class_count)
    if cfg.features_b:
        b = load_dataset(cfg.features_b, manifest, class_count=cfg.class_count)
        if b.class_count != ds.class_count:
            cc = max(ds.class_count, b.class_count)
            ds = load_dataset(cfg.features, manifest, class_count=cc)
            b = load_dataset(cfg.features_b, manifest, class_count=cc)
        ds = concatenate(ds, b)
    return ds


def _emit(out: Path, stem: str, doc: dict, text: str) -> None:
    atomic_write_text(out / f"{stem}.json", dumps(doc))
    atomic_write_text(out / f"{stem}.txt", text)
    sys.stdout.write(text)


# -- commands ---------------------------------------------------------------


def cmd_select(opts: dict) -> int:
    cfg = run_config(opts)
    ds = load_inputs(cfg)
    result = run_pipeline(ds, cfg.k_spec, cfg.t)
    doc = selection_to_dict(result, ds, cfg.k_spec)
    _emit(cfg.out, "selection", doc, format_selection_text(doc))
    return 0


def cmd_evaluate(opts: dict) -> int:
    cfg = run_config(opts)
    ds = load_inputs(cfg)
    table = evaluate_regimes(
        ds, cfg.k_spec, cfg.t, cfg.classifier, cfg.splits, cfg.seed, cfg.jobs
    )
    doc = regime_table_to_dict(table, cfg.k_spec, cfg.classifier.kind, cfg.splits, cfg.seed)
    _emit(cfg.out, "evaluation", doc, format_regime_text(doc))
    # split-0 decisions, ready for the diversity command
    atomic_write_text(cfg.out / "truth.txt", _label_lines(table.first_split_truth))
    for name, pred in table.first_split_predictions.items():
        atomic_write_text(cfg.out / f"predictions_{name}.txt", _label_lines(pred))
    return 0


def _label_lines(labels) -> str:
    return "".join(f"{int(v)}\n" for v in labels)


def read_label_file(path) -> np.ndarray:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"no such prediction file: {p}", "E_IO")
    labels = []
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            labels.append(int(line))
        except ValueError:
            raise CliError(f"{p}: line {lineno}: label {line!r} is not an integer", "E_LABEL")
    return np.array(labels, dtype=np.int64)


def cmd_diversity(opts: dict) -> int:
    preds = opts["predictions"]
    if not preds or len(preds) < 2:
        raise CliError("--predictions needs at least two files")
    if not opts["truth"]:
        raise CliError("--truth is required")
    truth = read_label_file(opts["truth"])
    cm = CorrectnessMatrix.from_predictions([read_label_file(p) for p in preds], truth)
    rep = diversity_report(cm)
    if opts["features"]:
        cfg = run_config(opts)
        ds = load_inputs(cfg)
        result = run_pipeline(ds, cfg.k_spec, cfg.t)
        stats = result.feature_stats
        rep = rep.with_entropies(
            avg_entropy(stats, [s.feature_id for s in stats if s.eligible]),
            avg_entropy(stats, result.selected),
        )
    doc = diversity_to_dict(rep, cm.n_classifiers, cm.n_samples)
    _emit(Path(opts["out"]), "diversity", doc, format_diversity_text(doc))
    return 0


def _parse_grid(text, cast):
    try:
        return [cast(v) for v in str(text).replace(",", " ").split()]
    except ValueError:
        raise CliError(f"bad --grid value {text!r}")


def cmd_sweep(opts: dict) -> int:
    cfg = run_config(opts)
    ds = load_inputs(cfg)
    if opts["param"] == "k":
        grid = _parse_grid(opts["grid"], float) if opts["grid"] else list(K_FRACTION_GRID)
        curve = sweep_k(ds, grid, cfg.t, cfg.classifier, cfg.splits, cfg.seed, cfg.jobs)
        stem = "sweep_k"
    elif opts["param"] == "t":
        grid = _parse_grid(opts["grid"], int) if opts["grid"] else list(T_GRID)
        curve = sweep_t(ds, grid, cfg.k_spec, cfg.classifier, cfg.splits, cfg.seed, cfg.jobs)
        stem = "sweep_t"
    else:
        raise CliError(f"--param must be 'k' or 't', got {opts['param']!r}")
    atomic_write_text(cfg.out / f"{stem}.csv", curve.to_csv())
    _emit(cfg.out, stem, sweep_to_dict(curve), format_sweep_text(curve))
    return 0


def cmd_synth(opts: dict) -> int:
    try:
        config = SynthConfig(
            classes=opts["classes"],
            samples_per_class=opts["samples_per_class"],
            informative_per_class=opts["informative"],
            noise_features=opts["noise"],
            duplicates=opts["duplicates"],
            on_mean=opts["on_mean"],
            off_mean=opts["off_mean"],
            spread=opts["spread"],
            seed=opts["seed"],
        )
    except ValueError as exc:
        raise CliError(str(exc), "E_CONFIG")
    sd = generate(config)
    out = Path(opts["out"])
    paths = write_synth(sd, out)
    doc = {
        "schema": "entsel.synth/1",
        "config": config.as_dict(),
        "n_samples": sd.dataset.n_samples,
        "n_features": sd.dataset.n_features,
        "informative": list(sd.informative),
        "files": {k: p.name for k, p in paths.items()},
    }
    text = (
        f"wrote {sd.dataset.n_samples} x {sd.dataset.n_features} dataset "
        f"({len(sd.informative)} informative, {len(sd.duplicate_of)} duplicate, "
        f"{config.noise_features} noise columns) to {out}\n"
    )
    _emit(out, "synth", doc, text)
    return 0


COMMANDS = {
    "select": cmd_select,
    "evaluate": cmd_evaluate,
    "diversity": cmd_diversity,
    "sweep": cmd_sweep,
    "synth": cmd_synth,
}


# -- argument parsing ---------------------------------------------------------


def _data_flags(p):
    p.add_argument("--features", help="columnar features file (first block)")
    p.add_argument("--features-b", dest="features_b", help="second block, joined column-wise")
    p.add_argument("--manifest", help="prefix = tag provenance manifest")
    p.add_argument("--class-count", dest="class_count", type=int, help="override class count")
    p.add_argument("--k", help="top-K size: fraction such as 0.1 or count such as 50 (default 0.1)")
    p.add_argument("--t", type=int, help=f"number of features to integrate (default {DEFAULT_T})")


def _eval_flags(p):
    p.add_argument("--classifier", choices=["knn", "logreg"])
    p.add_argument("--knn-k", dest="knn_k", type=int, help="neighbours for k-NN (odd, default 5)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--l2", type=float)
    p.add_argument("--splits", type=int, help=f"random equal splits (default {DEFAULT_SPLITS})")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, help="worker threads for independent splits")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="entsel", description="Entropy-weighted greedy feature selection and integration."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--out", help="output directory (default entsel-out)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("select", parents=[common], help="run the greedy selection")
    _data_flags(p)

    p = sub.add_parser("evaluate", parents=[common], help="accuracy of M / O / MO / SMO")
    _data_flags(p)
    _eval_flags(p)

    p = sub.add_parser("diversity", parents=[common], help="diversity of classifier decisions")
    p.add_argument("--predictions", nargs="+", help="one label per line, aligned across files")
    p.add_argument("--truth", help="true labels, one per line")
    _data_flags(p)

    p = sub.add_parser("sweep", parents=[common], help="accuracy vs K fraction or T")
    _data_flags(p)
    _eval_flags(p)
    p.add_argument("--param", choices=["k", "t"])
    p.add_argument("--grid", help="comma-separated parameter values")

    p = sub.add_parser("synth", parents=[common], help="write a planted synthetic dataset")
    p.add_argument("--classes", type=int)
    p.add_argument("--samples-per-class", dest="samples_per_class", type=int)
    p.add_argument("--informative", type=int, help="informative features per class")
    p.add_argument("--noise", type=int, help="noise features")
    p.add_argument("--duplicates", type=int, help="exact copies per informative feature")
    p.add_argument("--on-mean", dest="on_mean", type=float)
    p.add_argument("--off-mean", dest="off_mean", type=float)
    p.add_argument("--spread", type=float)
    p.add_argument("--seed", type=int)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = resolve(args)
        return COMMANDS[args.command](opts)
    except FileNotFoundError as exc:
        code, msg = "E_IO", str(exc)
    except OSError as exc:
        code, msg = "E_IO", str(exc)
    except (CliError, ValueError, ArithmeticError, IndexError) as exc:
        code, msg = getattr(exc, "code", "E_INPUT"), str(exc)
    print(f"entsel: error[{code}]: {msg}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
