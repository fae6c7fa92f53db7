"""Machine-readable (JSON) and aligned plain-text renderings of results.

Every JSON document carries a ``schema`` key naming its layout:

``entsel.selection/1``
    ``config`` (k, k_spec, t, t_effective, n_samples, n_features, n_eligible),
    ``selected`` ids, ``selected_names``, ``steps`` (feature_id, feature_name,
    provenance, entropy_bits, weighted_score, penalized_sample_ids),
    ``entropy`` (h_f, h_s) and ``provenance_counts`` (final, per_step).
``entsel.diversity/1``
    ``n_classifiers``, ``n_samples`` and one key per statistic; undefined
    values are ``null``.
``entsel.sweep/1``
    ``parameter`` and ``points`` (value, mean, std, repeats, diagnostics).
``entsel.evaluate/1``
    ``config``, ``regimes`` (name -> mean, std, runs), ``entropy``,
    ``block_diversity`` and ``notes``.

Floats are written with ``repr`` precision and keys keep insertion order, so
identical inputs give byte-identical files.
"""

from __future__ import annotations

import json

from .dataset import LabeledDataset
from .diversity import DiversityReport, avg_entropy
from .eval import RegimeTable, SweepCurve, provenance_counts
from .selector import SelectionResult


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def _table(header: list[str], rows: list[list[str]]) -> str:
    widths = [len(h) for h in header]
    for row in rows:
        widths = [max(w, len(c)) for w, c in zip(widths, row)]
    fmt = lambda cells: "  ".join(c.rjust(w) for c, w in zip(cells, widths)).rstrip()
    lines = [fmt(header), fmt(["-" * w for w in widths])]
    lines += [fmt(r) for r in rows]
    return "\n".join(lines) + "\n"


def _opt(x, spec=".4f"):
    return "undefined" if x is None else format(x, spec)


# -- selection -------------------------------------------------------------


def selection_to_dict(result: SelectionResult, ds: LabeledDataset, k_spec) -> dict:
    stats = result.feature_stats
    eligible = [s.feature_id for s in stats if s.eligible]
    history = provenance_counts(result, ds)
    return {
        "schema": "entsel.selection/1",
        "config": {
            "k": result.k,
            "k_spec": k_spec,
            "t": result.t,
            "t_effective": result.t_effective,
            "n_samples": result.n_samples,
            "n_features": ds.n_features,
            "n_eligible": result.n_eligible,
        },
        "selected": list(result.selected),
        "selected_names": [ds.feature_names[j] for j in result.selected],
        "steps": [
            {
                "step": i + 1,
                "feature_id": s.feature_id,
                "feature_name": ds.feature_names[s.feature_id],
                "provenance": ds.provenance[s.feature_id],
                "entropy_bits": s.entropy_bits,
                "weighted_score": s.weighted_score,
                "penalized_sample_ids": list(s.penalized_sample_ids),
            }
            for i, s in enumerate(result.steps)
        ],
        "entropy": {
            "h_f": avg_entropy(stats, eligible),
            "h_s": avg_entropy(stats, result.selected),
        },
        "provenance_counts": {
            "final": history[-1] if history else {tag: 0 for tag in ds.blocks()},
            "per_step": history,
        },
    }


def format_selection_text(doc: dict, max_rows: int = 50) -> str:
    cfg = doc["config"]
    out = [
        f"K = {cfg['k']} (from {cfg['k_spec']}), T = {cfg['t']}, selected {cfg['t_effective']} "
        f"of {cfg['n_eligible']} eligible / {cfg['n_features']} features",
        f"average entropy  all eligible: {doc['entropy']['h_f']:.4f} bits  "
        f"selected: {doc['entropy']['h_s']:.4f} bits",
        "final provenance counts: "
        + ", ".join(f"{k}={v}" for k, v in doc["provenance_counts"]["final"].items()),
        "",
    ]
    rows = [
        [
            str(s["step"]),
            s["feature_name"],
            s["provenance"],
            f"{s['entropy_bits']:.6f}",
            f"{s['weighted_score']:.6g}",
            str(len(s["penalized_sample_ids"])),
        ]
        for s in doc["steps"][:max_rows]
    ]
    out.append(_table(["step", "feature", "block", "H (bits)", "score", "|top-K|"], rows))
    if len(doc["steps"]) > max_rows:
        out.append(f"... {len(doc['steps']) - max_rows} more steps in the JSON report\n")
    return "\n".join(out)


# -- diversity -------------------------------------------------------------


def diversity_to_dict(rep: DiversityReport, n_classifiers: int, n_samples: int) -> dict:
    return {
        "schema": "entsel.diversity/1",
        "n_classifiers": n_classifiers,
        "n_samples": n_samples,
        "h_f": rep.h_f,
        "h_s": rep.h_s,
        "kappa": rep.kappa,
        "q_statistic": rep.q_statistic,
        "kw_variance": rep.kw_variance,
        "disagreement": rep.disagreement,
        "generalized_diversity": rep.generalized_diversity,
        "q_pairs_used": rep.q_pairs_used,
        "q_pairs_excluded": rep.q_pairs_excluded,
        "mean_accuracy": rep.mean_accuracy,
    }


_DIVERSITY_ROWS = [
    ("MO (H^F, bits)", "h_f"),
    ("SMO (H^S, bits)", "h_s"),
    ("kappa (lower = more diverse)", "kappa"),
    ("Q statistic (lower = more diverse)", "q_statistic"),
    ("Kohavi-Wolpert variance (higher = more diverse)", "kw_variance"),
    ("Disagreement (higher = more diverse)", "disagreement"),
    ("Generalized diversity (higher = more diverse)", "generalized_diversity"),
]


def format_diversity_text(doc: dict) -> str:
    rows = []
    for label, key in _DIVERSITY_ROWS:
        if key in ("h_f", "h_s") and doc[key] is None:
            continue
        spec = ".2f" if key in ("h_f", "h_s") else ".4f"
        rows.append([label, _opt(doc[key], spec)])
    text = _table(["measure", "value"], rows)
    if doc["q_pairs_excluded"]:
        text += f"Q excludes {doc['q_pairs_excluded']} classifier pair(s) with a zero denominator\n"
    return text


# -- sweeps ----------------------------------------------------------------


def sweep_to_dict(curve: SweepCurve) -> dict:
    return {
        "schema": "entsel.sweep/1",
        "parameter": curve.parameter,
        "points": [
            {
                "value": p.value,
                "mean": p.mean,
                "std": p.std,
                "repeats": p.repeats,
                "diagnostics": p.diagnostics,
            }
            for p in curve.points
        ],
    }


def format_sweep_text(curve: SweepCurve) -> str:
    rows = [
        [format(p.value, "g"), f"{100 * p.mean:.1f}", f"{100 * p.std:.1f}", str(p.repeats)]
        for p in curve.points
    ]
    return _table([curve.parameter, "accuracy %", "std %", "repeats"], rows)


# -- regime table ----------------------------------------------------------


def regime_table_to_dict(table: RegimeTable, k_spec, classifier: str, splits: int, seed: int) -> dict:
    div = table.block_diversity
    return {
        "schema": "entsel.evaluate/1",
        "config": {
            "k": table.k_resolved,
            "k_spec": k_spec,
            "t": table.t,
            "t_effective": list(table.t_effective),
            "classifier": classifier,
            "splits": splits,
            "seed": seed,
        },
        "regimes": {
            name: {"mean": c.mean, "std": c.std, "runs": c.runs} for name, c in table.cells.items()
        },
        "entropy": {"h_f": table.h_f, "h_s": table.h_s},
        "block_diversity": None
        if div is None
        else diversity_to_dict(div, 2, int(table.first_split_truth.shape[0])),
        "notes": list(table.notes),
    }


def format_regime_text(doc: dict) -> str:
    names = list(doc["regimes"])
    row = [f"{100 * c['mean']:.1f} +- {100 * c['std']:.1f}" for c in doc["regimes"].values()]
    text = _table([f"{n} (%)" for n in names], [row])
    text += (
        f"\nK = {doc['config']['k']}, T = {doc['config']['t']}, "
        f"{doc['config']['splits']} split(s), classifier {doc['config']['classifier']}\n"
        f"H^F = {doc['entropy']['h_f']:.2f} bits, H^S = {doc['entropy']['h_s']:.2f} bits\n"
    )
    if doc["block_diversity"] is not None:
        text += "\n" + format_diversity_text(doc["block_diversity"])
    for note in doc["notes"]:
        text += f"note: {note}\n"
    return text
