"""Confusion matrices, headline metrics, and comparison-table assembly."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

import numpy as np


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # (K, K): cm[i][j] = true i predicted j

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def supports(self) -> np.ndarray:
        return self.counts.sum(axis=1)


@dataclass(frozen=True)
class MetricSet:
    accuracy: float
    precision: np.ndarray  # per class
    recall: np.ndarray
    f1: np.ndarray
    precision_macro: float
    recall_macro: float
    f1_macro: float
    precision_weighted: float
    recall_weighted: float
    f1_weighted: float


def confusion(y_true, y_pred, n_classes: int) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    for name, arr in (("y_true", y_true), ("y_pred", y_pred)):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise ValueError(f"{name} has labels outside [0, {n_classes})")
    counts = np.bincount(y_true * n_classes + y_pred,
                         minlength=n_classes * n_classes)
    return ConfusionMatrix(counts.reshape(n_classes, n_classes))


def metrics(cm: ConfusionMatrix) -> MetricSet:
    counts = cm.counts.astype(np.float64)
    total = counts.sum()
    if total < 1:
        raise ValueError("confusion matrix is empty")
    diag = np.diag(counts)
    col = counts.sum(axis=0)
    row = counts.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(col > 0, diag / col, 0.0)
        recall = np.where(row > 0, diag / row, 0.0)
        pr = precision + recall
        f1 = np.where(pr > 0, 2 * precision * recall / np.where(pr > 0, pr, 1.0), 0.0)
    weights = row / total
    accuracy = float(diag.sum() / total)
    return MetricSet(
        accuracy=accuracy,
        precision=precision, recall=recall, f1=f1,
        precision_macro=float(precision.mean()),
        recall_macro=float(recall.mean()),
        f1_macro=float(f1.mean()),
        precision_weighted=float((precision * weights).sum()),
        # support-weighted recall telescopes to trace/total; computing it
        # that way keeps the identity with accuracy bit-exact
        recall_weighted=accuracy,
        f1_weighted=float((f1 * weights).sum()),
    )


def evaluate(y_true, y_pred, n_classes: int):
    cm = confusion(y_true, y_pred, n_classes)
    return cm, metrics(cm)


# --- report assembly ----------------------------------------------------------

@dataclass(frozen=True)
class CellResult:
    """One (feature set x classifier) evaluation."""

    selector: str      # 'none' for the full feature set
    fraction: float    # 1.0 for the full set
    dimension: int
    classifier: str
    metricset: MetricSet
    cm: ConfusionMatrix


@dataclass
class EvalReport:
    cells: list
    classifier_table: str   # per-classifier metrics on the full feature set
    impact_tables: dict     # selector -> rendered table
    csv_text: str


def pct(x: float, decimals: int = 2) -> str:
    """Percent with fixed decimals, half-up rounding (102 -> '102.00')."""
    q = Decimal(1).scaleb(-decimals)
    return str(Decimal(repr(x * 100)).quantize(q, rounding=ROUND_HALF_UP))


def signed_pct_points(delta: float) -> str:
    """Impact column: percentage-point difference like '+0.11%' / '-0.23%'."""
    q = Decimal(repr(delta * 100)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
    sign = "+" if q >= 0 else "-"
    return f"{sign}{abs(q)}%"


def _render_table(headers, rows) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    def line(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    sep = "-" * (sum(widths) + 2 * (len(widths) - 1))
    return "\n".join([line(headers), sep] + [line(r) for r in rows]) + "\n"


def fraction_label(fraction: float) -> str:
    s = pct(fraction, 0)
    return f"{s}% (Full set)" if fraction == 1.0 else f"{s}%"


CSV_COLUMNS = ["feature_set", "selector", "fraction", "dimension", "classifier",
               "accuracy", "precision_macro", "recall_macro", "f1_macro",
               "precision_weighted", "recall_weighted", "f1_weighted"]


def report_csv(cells) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for c in cells:
        m = c.metricset
        w.writerow([fraction_label(c.fraction), c.selector, f"{c.fraction:.2f}",
                    c.dimension, c.classifier,
                    f"{m.accuracy:.6f}", f"{m.precision_macro:.6f}",
                    f"{m.recall_macro:.6f}", f"{m.f1_macro:.6f}",
                    f"{m.precision_weighted:.6f}", f"{m.recall_weighted:.6f}",
                    f"{m.f1_weighted:.6f}"])
    return buf.getvalue()


def classifier_table(cells, selector="none", fraction=1.0,
                     averaging="macro") -> str:
    """Per-classifier metric table for one fixed feature set."""
    rows = []
    for c in cells:
        if c.selector != selector or c.fraction != fraction:
            continue
        m = c.metricset
        if averaging == "macro":
            vals = (m.accuracy, m.recall_macro, m.precision_macro, m.f1_macro)
        else:
            vals = (m.accuracy, m.recall_weighted, m.precision_weighted,
                    m.f1_weighted)
        rows.append([c.classifier.upper()] + [pct(v) for v in vals])
    return _render_table(["Model", "Accuracy", "Recall", "Precision", "F1-score"],
                         rows)


def impact_table(cells, selector: str) -> tuple[str, str]:
    """Per-fraction best-classifier table with Baseline/signed impact column.

    Baseline = the full feature set's best classifier accuracy. Returns
    (rendered text, csv text).
    """
    full = [c for c in cells if c.selector == "none" and c.fraction == 1.0]
    if not full:
        raise ValueError("impact table needs full-feature baseline cells")
    base = max(full, key=lambda c: c.metricset.accuracy)  # ties: first in order
    fracs = sorted({c.fraction for c in cells if c.selector == selector},
                   reverse=True)
    rows = [[fraction_label(1.0), str(base.dimension), base.classifier.upper(),
             pct(base.metricset.accuracy), "Baseline"]]
    for frac in fracs:
        group = [c for c in cells if c.selector == selector and c.fraction == frac]
        best = max(group, key=lambda c: c.metricset.accuracy)
        rows.append([fraction_label(frac), str(best.dimension),
                     best.classifier.upper(), pct(best.metricset.accuracy),
                     signed_pct_points(best.metricset.accuracy
                                       - base.metricset.accuracy)])
    text = _render_table(
        ["Feature subset", "Dimension", "Best classifier", "Accuracy", "Impact"],
        rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["feature_subset", "dimension", "best_classifier", "accuracy",
                "impact"])
    for r in rows:
        w.writerow(r)
    return text, buf.getvalue()


def confusion_csv(cm: ConfusionMatrix, class_names) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["true\\pred"] + list(class_names))
    for i, name in enumerate(class_names):
        w.writerow([name] + [int(v) for v in cm.counts[i]])
    return buf.getvalue()


def build_report(cells, selectors=None) -> EvalReport:
    """Assemble the per-classifier table plus one impact table per selector."""
    if not cells:
        raise ValueError("no cells to report")
    if selectors is None:
        selectors = sorted({c.selector for c in cells if c.selector != "none"})
    impact = {}
    for sel in selectors:
        text, _ = impact_table(cells, sel)
        impact[sel] = text
    return EvalReport(list(cells), classifier_table(cells), impact,
                      report_csv(cells))
