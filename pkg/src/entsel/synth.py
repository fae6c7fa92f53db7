"""Seeded planted-feature datasets.

Each class owns ``informative_per_class`` columns whose activations are high on
that class and low elsewhere; noise columns ignore the class; duplicate columns
are exact copies of informative ones. Column order is shuffled and tags
alternate between ``material`` and ``object`` to mimic two representations.

Randomness comes from PCG64 (O'Neill 2014, 128-bit LCG with XSL-RR output) as
shipped by numpy. Uniform doubles are ``(next64 >> 11) * 2**-53`` and normals
are Box-Muller pairs built from those uniforms, so a seed pins the stream.
"""

from __future__ import annotations

import io
import csv
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .dataset import (
    LabeledDataset,
    ProvenanceManifest,
    atomic_write_text,
    format_manifest,
    save_dataset,
)

BLOCK_PREFIXES = {"m_": "material", "o_": "object"}


@dataclass(frozen=True)
class SynthConfig:
    classes: int = 5
    samples_per_class: int = 40
    informative_per_class: int = 4
    noise_features: int = 40
    duplicates: int = 0
    on_mean: float = 5.0
    off_mean: float = -1.0
    spread: float = 1.0
    noise_mean: float = 0.0
    noise_spread: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.classes < 2:
            raise ValueError("need at least 2 classes")
        for name in ("samples_per_class", "informative_per_class", "noise_features", "duplicates"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.samples_per_class < 1:
            raise ValueError("samples_per_class must be >= 1")
        if not self.on_mean > self.off_mean:
            raise ValueError("on-class mean must exceed off-class mean")
        if self.spread < 0 or self.noise_spread < 0:
            raise ValueError("spreads must be non-negative")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    @property
    def n_informative(self) -> int:
        return self.classes * self.informative_per_class

    @property
    def n_features(self) -> int:
        return self.n_informative * (1 + self.duplicates) + self.noise_features

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SynthDataset:
    dataset: LabeledDataset
    informative: tuple[str, ...]
    informative_class: dict
    duplicate_of: dict

    def planted_groups(self) -> dict[str, set[str]]:
        """Informative name -> itself plus all of its exact copies."""
        groups = {name: {name} for name in self.informative}
        for dup, orig in self.duplicate_of.items():
            groups[orig].add(dup)
        return groups


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def uniforms(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.random(n)


def box_muller(rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` standard normals from ``ceil(n/2)`` uniform pairs."""
    m = (n + 1) // 2
    u = uniforms(rng, 2 * m).reshape(m, 2)
    # 1 - u lies in (0, 1], keeping the log finite
    r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
    theta = 2.0 * np.pi * u[:, 1]
    z = np.empty(2 * m)
    z[0::2] = r * np.cos(theta)
    z[1::2] = r * np.sin(theta)
    return z[:n]


def generate(config: SynthConfig) -> SynthDataset:
    rng = make_rng(config.seed)
    C, n_c = config.classes, config.samples_per_class
    n = C * n_c
    labels = np.repeat(np.arange(C), n_c)

    columns = []
    kinds = []  # (role, class, source column index)
    for c in range(C):
        on = labels == c
        for _ in range(config.informative_per_class):
            z = box_muller(rng, n)
            col = np.where(on, config.on_mean, config.off_mean) + config.spread * z
            columns.append(col)
            kinds.append(("informative", c, len(columns) - 1))
    n_inf = len(columns)
    for src in range(n_inf):
        for _ in range(config.duplicates):
            columns.append(columns[src].copy())
            kinds.append(("duplicate", kinds[src][1], src))
    for _ in range(config.noise_features):
        columns.append(config.noise_mean + config.noise_spread * box_muller(rng, n))
        kinds.append(("noise", -1, -1))

    perm = rng.permutation(len(columns)) if columns else np.arange(0)
    prefixes = list(BLOCK_PREFIXES)
    names_by_src = {}
    for pos, src in enumerate(perm):
        names_by_src[int(src)] = f"{prefixes[pos % 2]}{pos:04d}"

    X = np.column_stack([columns[s] for s in perm]) if columns else np.zeros((n, 0))
    names = [names_by_src[int(s)] for s in perm]
    manifest = ProvenanceManifest(BLOCK_PREFIXES)
    ds = LabeledDataset(
        X,
        labels,
        class_count=C,
        feature_names=names,
        provenance=manifest.tags_for(names),
    )

    informative = tuple(sorted(names_by_src[s] for s in range(n_inf)))
    informative_class = {names_by_src[s]: kinds[s][1] for s in range(n_inf)}
    duplicate_of = {
        names_by_src[s]: names_by_src[kinds[s][2]]
        for s in range(len(kinds))
        if kinds[s][0] == "duplicate"
    }
    return SynthDataset(ds, informative, informative_class, duplicate_of)


def format_ground_truth(sd: SynthDataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["feature", "role", "class", "original"])
    for name in sd.informative:
        w.writerow([name, "informative", sd.informative_class[name], name])
    for dup in sorted(sd.duplicate_of):
        orig = sd.duplicate_of[dup]
        w.writerow([dup, "duplicate", sd.informative_class[orig], orig])
    return buf.getvalue()


def write_synth(sd: SynthDataset, out_dir) -> dict[str, Path]:
    """Write ``features.csv``, ``manifest.txt`` and ``ground_truth.csv``."""
    out = Path(out_dir)
    paths = {
        "features": out / "features.csv",
        "manifest": out / "manifest.txt",
        "ground_truth": out / "ground_truth.csv",
    }
    save_dataset(sd.dataset, paths["features"])
    atomic_write_text(paths["manifest"], format_manifest(ProvenanceManifest(BLOCK_PREFIXES)))
    atomic_write_text(paths["ground_truth"], format_ground_truth(sd))
    return paths
