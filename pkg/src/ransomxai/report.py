"""Rendering of run artifacts: metrics and timing tables, selection and
comparison reports, plot-ready CSVs. Every renderer is a pure function of
its inputs so reruns with one seed give identical bytes."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .explain import SummaryRanking
from .metrics import (ConfusionMatrix, accuracy_delta, fmt2, improvement, metrics)

METRIC_ROWS = ("Accuracy", "Precision", "Recall", "F1-score")
ARM_LABELS = {True: "W FS", False: "W/O FS"}


def write_atomic(path, text: str) -> None:
    """Write through a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def metrics_table(confusions: dict, classifiers) -> str:
    """Rows are metrics, columns are classifier x {W FS, W/O FS}.

    ``confusions`` maps ``(classifier, fs_enabled)`` to a ConfusionMatrix;
    missing arms leave empty cells.
    """
    header = ["Metric"]
    cols = []
    for clf in classifiers:
        for fs in (True, False):
            header.append(f"{clf} {ARM_LABELS[fs]}")
            cm = confusions.get((clf, fs))
            cols.append(metrics(cm).as_percentages() if cm is not None else None)
    rows = [header]
    for name in METRIC_ROWS:
        rows.append([name] + [fmt2(c[name]) if c is not None else "" for c in cols])
    return _csv(rows)


def parse_metrics_table(text: str) -> dict:
    rows = list(csv.reader(io.StringIO(text)))
    header = rows[0][1:]
    return {r[0]: {h: (float(v) if v else None) for h, v in zip(header, r[1:])} for r in rows[1:]}


@dataclass
class ArmTiming:
    seconds: float
    final_fit_seconds: float


def timing_table(timings: dict, classifiers) -> str:
    """Per classifier: wall-clock time without and with selection and the
    improvement, then final-fit times; the last row averages the improvements.

    ``timings`` maps ``(classifier, fs_enabled)`` to an :class:`ArmTiming`.
    """
    rows = [["Classifier", "W/O FS (s)", "W FS (s)", "Improvement (%)",
             "Final fit W/O FS (s)", "Final fit W FS (s)", "Final fit improvement (%)"]]
    imps, fit_imps = [], []
    for clf in classifiers:
        wo, w = timings.get((clf, False)), timings.get((clf, True))
        if wo is None or w is None:
            rows.append([clf, "", "", "", "", "", ""])
            continue
        imp = improvement(wo.seconds, w.seconds)
        fit_imp = improvement(wo.final_fit_seconds, w.final_fit_seconds) if wo.final_fit_seconds > 0 else float("nan")
        imps.append(imp)
        fit_imps.append(fit_imp)
        rows.append([clf, fmt2(wo.seconds), fmt2(w.seconds), fmt2(imp),
                     f"{wo.final_fit_seconds:.4f}", f"{w.final_fit_seconds:.4f}", fmt2(fit_imp)])
    rows.append(["Average", "", "", fmt2(float(np.mean(imps))) if imps else "",
                 "", "", fmt2(float(np.mean(fit_imps))) if fit_imps else ""])
    return _csv(rows)


def difference_list(selected, ranking, top_k) -> list:
    """Selected features absent from ``top_k``, ordered by selection rank then name.

    ``ranking`` maps feature name to its elimination rank.
    """
    top = set(top_k)
    return sorted((f for f in selected if f not in top), key=lambda f: (ranking[f], f))


def comparison_report(selections: dict, rankings: dict, confusions: dict, classifiers, seed) -> dict:
    """Selected-versus-top-k comparison per classifier.

    ``selections`` maps classifier to an RfecvResult and ``rankings`` to a
    full SummaryRanking. k is the largest selected-set size. The accuracy
    delta is taken from the two-decimal accuracies of the metrics table.
    """
    sizes = [selections[c].n_selected for c in classifiers if c in selections]
    k = max(sizes) if sizes else 0
    out = {"k": k, "seed": int(seed), "classifiers": {}}
    for clf in classifiers:
        entry = {}
        sel = selections.get(clf)
        rank = rankings.get(clf)
        if sel is not None:
            entry["selected"] = sel.selected
            entry["n_selected"] = sel.n_selected
        if rank is not None:
            entry["top_k"] = list(rank.features[:k])
        if sel is not None and rank is not None:
            ranking = dict(zip(sel.feature_names, (int(r) for r in sel.ranking)))
            diff = difference_list(sel.selected, ranking, rank.features[:k])
            entry["selected_not_in_top_k"] = diff
            entry["n_selected_not_in_top_k"] = len(diff)
        cm_w, cm_wo = confusions.get((clf, True)), confusions.get((clf, False))
        if cm_w is not None and cm_wo is not None:
            a_wo = float(fmt2(metrics(cm_wo).accuracy))
            a_w = float(fmt2(metrics(cm_w).accuracy))
            entry["accuracy_delta"] = round(accuracy_delta(a_wo, a_w), 2)
        out["classifiers"][clf] = entry
    return out


def summary_csv(ranking: SummaryRanking, top_k: int | None = None) -> str:
    n = len(ranking.features) if top_k is None else top_k
    return SummaryRanking(ranking.features[:n], ranking.mean_abs[:n], ranking.seed).to_csv()


def curve_csv(cv_curve) -> str:
    rows = [["n_features", "mean_accuracy", "std"]]
    rows += [[int(s), repr(float(m)), repr(float(sd))] for s, m, sd in cv_curve]
    return _csv(rows)


def confusion_csv(cm: ConfusionMatrix) -> str:
    return cm.to_csv()
