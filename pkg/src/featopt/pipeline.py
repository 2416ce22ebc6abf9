"""Experiment stages: ingest -> split -> train -> select -> sweep -> report.

Every stage writes its outputs atomically (temp file + rename), embeds the
config hash, and is a no-op when its outputs already exist for the same
hash. All randomness flows from the master seed through named child
streams (see rng.hash64), so outputs are identical across reruns and
worker counts.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import classifiers as clf
from . import evaluation as ev
from . import feature_selection as fs
from .config import ExperimentConfig
from .dataset import SplitIndices, standardize_fit, stratified_split
from .pooling import pool_dataset
from .rng import Rng
from .tensor_io import (ManifestError, Tensor, TensorFormatError, load_manifest,
                        load_tensor, write_array)
from .tuning import default_search_space, random_search, trial_log_csv


class DataError(ValueError):
    exit_code = 3


class PrereqError(RuntimeError):
    exit_code = 4


def atomic_write_bytes(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def atomic_write_text(path: Path, text: str) -> None:
    atomic_write_bytes(path, text.encode())


def _write_json(path: Path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _read_json(path: Path):
    return json.loads(path.read_text())


def _check_stage(path: Path, cfg: ExperimentConfig, stage: str):
    """Returns the artifact JSON, failing with a named-stage error."""
    if not path.is_file():
        raise PrereqError(f"stage '{stage}' has not run (missing {path})")
    doc = _read_json(path)
    if doc.get("config_hash") != cfg.config_hash:
        raise PrereqError(
            f"config-hash mismatch for stage '{stage}': artifacts in "
            f"{path.parent} were produced by a different configuration")
    return doc


def _fresh(path: Path, cfg: ExperimentConfig) -> bool:
    """True when an artifact exists for this exact configuration."""
    if not path.is_file():
        return False
    try:
        return _read_json(path).get("config_hash") == cfg.config_hash
    except (json.JSONDecodeError, OSError):
        return False


class RunPaths:
    def __init__(self, out):
        self.root = Path(out)
        self.store = self.root / "store"
        self.split = self.root / "split" / "split.json"
        self.models = self.root / "models"
        self.rankings = self.root / "rankings"
        self.cells = self.root / "sweep" / "cells"
        self.report = self.root / "report"
        self.ledger = self.root / "run.json"


def _update_ledger(paths: RunPaths, cfg: ExperimentConfig, stage: str,
                   seconds: float, artifacts) -> None:
    doc = {"config_hash": cfg.config_hash, "version": __version__, "stages": {}}
    if paths.ledger.is_file():
        try:
            old = _read_json(paths.ledger)
            if old.get("config_hash") == cfg.config_hash:
                doc = old
        except json.JSONDecodeError:
            pass
    doc["stages"][stage] = {
        "seconds": round(seconds, 3),
        "artifacts": sorted(str(a.relative_to(paths.root)) for a in artifacts),
    }
    missing = [a for a in doc["stages"][stage]["artifacts"]
               if not (paths.root / a).exists()]
    if missing:
        raise RuntimeError(f"ledger lists missing artifacts: {missing}")
    _write_json(paths.ledger, doc)


# --- stages -------------------------------------------------------------------

def cmd_ingest(cfg: ExperimentConfig) -> RunPaths:
    paths = RunPaths(cfg.out)
    meta_path = paths.store / "store.json"
    if _fresh(meta_path, cfg):
        print(f"[ingest] up to date ({meta_path})")
        return paths
    started = time.perf_counter()
    try:
        manifest = load_manifest(cfg.manifest)
        X, y = pool_dataset(manifest)
    except (ManifestError, TensorFormatError, ValueError, OSError) as exc:
        raise DataError(str(exc)) from None
    feat_path = paths.store / "features.npy"
    label_path = paths.store / "labels.npy"
    paths.store.mkdir(parents=True, exist_ok=True)
    atomic_write_bytes(feat_path, write_array(Tensor.from_array(X)))
    atomic_write_bytes(label_path, write_array(Tensor.from_array(y)))
    _write_json(meta_path, {
        "config_hash": cfg.config_hash,
        "n": int(X.shape[0]), "d": int(X.shape[1]),
        "class_names": list(manifest.class_names),
        "sample_ids": [e.sample_id for e in manifest.entries],
    })
    print(f"[ingest] {X.shape[0]} samples x {X.shape[1]} features")
    _update_ledger(paths, cfg, "ingest", time.perf_counter() - started,
                   [feat_path, label_path, meta_path])
    return paths


def load_store(cfg: ExperimentConfig, paths: RunPaths):
    meta = _check_stage(paths.store / "store.json", cfg, "ingest")
    X = load_tensor(paths.store / "features.npy").data
    y = load_tensor(paths.store / "labels.npy").data
    return X, y, meta


def cmd_split(cfg: ExperimentConfig) -> SplitIndices:
    paths = RunPaths(cfg.out)
    X, y, _meta = load_store(cfg, paths)
    if _fresh(paths.split, cfg):
        print(f"[split] up to date ({paths.split})")
        doc = _read_json(paths.split)
        return SplitIndices(*(np.array(doc[k]) for k in ("train", "val", "test")))
    started = time.perf_counter()
    try:
        split = stratified_split(y, cfg.ratios, cfg.seed)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    _write_json(paths.split, {"config_hash": cfg.config_hash,
                              "seed": cfg.seed,
                              "ratios": list(cfg.ratios),
                              **split.as_dict()})
    print(f"[split] train/val/test = {len(split.train)}/{len(split.val)}"
          f"/{len(split.test)}")
    _update_ledger(paths, cfg, "split", time.perf_counter() - started,
                   [paths.split])
    return split


def load_split(cfg: ExperimentConfig, paths: RunPaths) -> SplitIndices:
    doc = _check_stage(paths.split, cfg, "split")
    return SplitIndices(*(np.array(doc[k]) for k in ("train", "val", "test")))


def _slices(X, y, split: SplitIndices):
    return ((X[split.train], y[split.train]), (X[split.val], y[split.val]),
            (X[split.test], y[split.test]))


def evaluate_cell(kind, X, y, split, budget, seed, standardize, n_classes,
                  columns=None):
    """Tune, refit, and test one (feature set, classifier) cell."""
    if columns is not None:
        X = fs.apply_subset(X, columns)
    (Xtr, ytr), (Xv, yv), (Xte, yte) = _slices(X, y, split)
    if standardize:
        scaler = standardize_fit(Xtr)
        Xtr, Xv, Xte = scaler.apply(Xtr), scaler.apply(Xv), scaler.apply(Xte)
    search = random_search(kind, default_search_space(kind), budget,
                           Xtr, ytr, Xv, yv, seed)
    final_seed = Rng(seed).spawn("final").seed
    model = clf.fit(kind, Xtr, ytr, search.best_params, seed=final_seed)
    pred = clf.predict(model, Xte)
    cm, ms = ev.evaluate(yte, pred, n_classes)
    return model, search, cm, ms


def _metrics_json(ms: ev.MetricSet, cm: ev.ConfusionMatrix) -> dict:
    return {
        "accuracy": ms.accuracy,
        "precision_macro": ms.precision_macro, "recall_macro": ms.recall_macro,
        "f1_macro": ms.f1_macro,
        "precision_weighted": ms.precision_weighted,
        "recall_weighted": ms.recall_weighted, "f1_weighted": ms.f1_weighted,
        "confusion": cm.counts.tolist(),
    }


def cmd_train(cfg: ExperimentConfig) -> None:
    paths = RunPaths(cfg.out)
    X, y, meta = load_store(cfg, paths)
    split = load_split(cfg, paths)
    K = len(meta["class_names"])
    started = time.perf_counter()
    artifacts = []
    for kind in cfg.classifiers:
        cell_path = paths.models / f"{kind}.json"
        model_path = paths.models / f"{kind}.model"
        trials_path = paths.models / f"{kind}.trials.csv"
        artifacts += [cell_path, model_path, trials_path]
        if _fresh(cell_path, cfg) and model_path.is_file():
            print(f"[train] {kind}: up to date")
            continue
        seed = Rng(cfg.seed).spawn("train", kind).seed
        model, search, cm, ms = evaluate_cell(
            kind, X, y, split, cfg.budget, seed,
            kind in cfg.standardize, K)
        atomic_write_bytes(model_path, clf.serialize(model))
        atomic_write_text(trials_path, trial_log_csv(search.records))
        _write_json(cell_path, {
            "config_hash": cfg.config_hash, "kind": kind,
            "selector": "none", "fraction": 1.0, "dimension": int(X.shape[1]),
            "seed": seed, "best_params": search.best_params,
            "best_trial": search.best_trial,
            "val_accuracy": search.best_accuracy,
            "metrics": _metrics_json(ms, cm),
        })
        print(f"[train] {kind}: val={search.best_accuracy:.4f} "
              f"test={ms.accuracy:.4f}")
    _update_ledger(paths, cfg, "train", time.perf_counter() - started, artifacts)


def cmd_select(cfg: ExperimentConfig) -> None:
    paths = RunPaths(cfg.out)
    X, y, meta = load_store(cfg, paths)
    split = load_split(cfg, paths)
    K = len(meta["class_names"])
    (Xtr, ytr), (Xv, yv), _ = _slices(X, y, split)
    started = time.perf_counter()
    artifacts = []
    for method in cfg.selectors:
        csv_path = paths.rankings / f"{method}.csv"
        meta_path = paths.rankings / f"{method}.json"
        artifacts += [csv_path, meta_path]
        if _fresh(meta_path, cfg) and csv_path.is_file():
            print(f"[select] {method}: up to date")
            continue
        seed = Rng(cfg.seed).spawn("select", method).seed
        extra = {}
        if method == "gbdt":
            ranking = fs.rank_by_gbdt(Xtr, ytr, seed=seed)
        elif method == "rf":
            ranking = fs.rank_by_rf(Xtr, ytr, seed=seed)
        else:
            scaler = standardize_fit(Xtr)
            lam, fit = fs.select_lasso_lambda(scaler.apply(Xtr), ytr,
                                              scaler.apply(Xv), yv, n_classes=K)
            ranking = fs.make_ranking("lasso", np.abs(fit.W).max(axis=0),
                                      converged=fit.converged)
            extra = {"lambda": lam, "converged": fit.converged}
        atomic_write_text(csv_path, fs.ranking_to_csv(ranking))
        _write_json(meta_path, {"config_hash": cfg.config_hash,
                                "method": method, "seed": seed, **extra})
        print(f"[select] {method}: top feature = {int(ranking.order[0])}")
    _update_ledger(paths, cfg, "select", time.perf_counter() - started, artifacts)


def _cell_name(selector: str, fraction: float, kind: str) -> str:
    return f"{selector}_{fraction:.2f}_{kind}"


def _sweep_cell_job(args):
    """Worker entry: computes one sweep cell and writes it atomically."""
    (cfg_dict, cell) = args
    cfg = ExperimentConfig(**cfg_dict)
    paths = RunPaths(cfg.out)
    X, y, meta = _worker_store(cfg, paths)
    split = load_split(cfg, paths)
    K = len(meta["class_names"])
    selector, fraction, kind = cell
    ranking = fs.ranking_from_csv((paths.rankings / f"{selector}.csv").read_text())
    columns = fs.select_top_fraction(ranking, fraction)
    seed = Rng(cfg.seed).spawn("sweep", selector, kind, f"{fraction:.6f}").seed
    _model, search, cm, ms = evaluate_cell(
        kind, X, y, split, cfg.budget, seed, kind in cfg.standardize, K,
        columns=columns)
    out = paths.cells / f"{_cell_name(selector, fraction, kind)}.json"
    _write_json(out, {
        "config_hash": cfg.config_hash, "kind": kind, "selector": selector,
        "fraction": fraction, "dimension": int(columns.size), "seed": seed,
        "best_params": search.best_params, "best_trial": search.best_trial,
        "val_accuracy": search.best_accuracy,
        "metrics": _metrics_json(ms, cm),
    })
    return str(out)


_STORE_CACHE: dict = {}


def _worker_store(cfg: ExperimentConfig, paths: RunPaths):
    key = str(paths.store)
    if key not in _STORE_CACHE:
        _STORE_CACHE[key] = load_store(cfg, paths)
    return _STORE_CACHE[key]


def _cfg_dict(cfg: ExperimentConfig) -> dict:
    return {"manifest": cfg.manifest, "seed": cfg.seed, "out": cfg.out,
            "jobs": cfg.jobs, "ratios": cfg.ratios,
            "classifiers": cfg.classifiers, "selectors": cfg.selectors,
            "fractions": cfg.fractions, "budget": cfg.budget,
            "standardize": cfg.standardize}


def sweep_grid(cfg: ExperimentConfig):
    """(selector, fraction, kind) cells; fraction 1.0 is covered by train."""
    return [(sel, frac, kind)
            for sel in cfg.selectors
            for frac in cfg.fractions if frac < 1.0
            for kind in cfg.classifiers]


def cmd_sweep(cfg: ExperimentConfig) -> None:
    paths = RunPaths(cfg.out)
    _check_stage(paths.store / "store.json", cfg, "ingest")
    load_split(cfg, paths)
    for kind in cfg.classifiers:
        _check_stage(paths.models / f"{kind}.json", cfg, "train")
    for sel in cfg.selectors:
        _check_stage(paths.rankings / f"{sel}.json", cfg, "select")
    started = time.perf_counter()
    grid = sweep_grid(cfg)
    pending = [cell for cell in grid
               if not _fresh(paths.cells / f"{_cell_name(*cell)}.json", cfg)]
    print(f"[sweep] {len(grid)} cells in grid, {len(pending)} to compute, "
          f"jobs={cfg.jobs}")
    paths.cells.mkdir(parents=True, exist_ok=True)
    jobs = [( _cfg_dict(cfg), cell) for cell in pending]
    if cfg.jobs == 1 or not jobs:
        for job in jobs:
            _sweep_cell_job(job)
    else:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            list(pool.map(_sweep_cell_job, jobs, chunksize=1))
    artifacts = [paths.cells / f"{_cell_name(*cell)}.json" for cell in grid]
    _update_ledger(paths, cfg, "sweep", time.perf_counter() - started, artifacts)


def _collect_cells(cfg: ExperimentConfig, paths: RunPaths):
    """Full-feature cells from train plus all sweep cells, in report order."""
    cells = []
    for kind in cfg.classifiers:
        doc = _check_stage(paths.models / f"{kind}.json", cfg, "train")
        cells.append(_cell_from_doc(doc))
    for sel, frac, kind in sweep_grid(cfg):
        doc = _check_stage(paths.cells / f"{_cell_name(sel, frac, kind)}.json",
                           cfg, "sweep")
        cells.append(_cell_from_doc(doc))
    return cells


def _cell_from_doc(doc) -> ev.CellResult:
    m = doc["metrics"]
    counts = np.array(m["confusion"], dtype=np.int64)
    ms = ev.metrics(ev.ConfusionMatrix(counts))
    return ev.CellResult(doc["selector"], float(doc["fraction"]),
                         int(doc["dimension"]), doc["kind"], ms,
                         ev.ConfusionMatrix(counts))


def cmd_report(cfg: ExperimentConfig) -> None:
    paths = RunPaths(cfg.out)
    cells = _collect_cells(cfg, paths)
    meta = _check_stage(paths.store / "store.json", cfg, "ingest")
    started = time.perf_counter()
    report = ev.build_report(cells, selectors=cfg.selectors)
    artifacts = []

    def emit(rel: str, text: str):
        p = paths.report / rel
        atomic_write_text(p, text)
        artifacts.append(p)

    emit("report.csv", report.csv_text)
    emit("classifier_table.txt", report.classifier_table)
    for sel in cfg.selectors:
        text, csv_text = ev.impact_table(cells, sel)
        emit(f"impact_{sel}.txt", text)
        emit(f"impact_{sel}.csv", csv_text)
    for cell in cells:
        name = _cell_name(cell.selector, cell.fraction, cell.classifier)
        emit(f"confusion/{name}.csv",
             ev.confusion_csv(cell.cm, meta["class_names"]))
    artifacts += render_figures(cells, cfg, paths.report / "figures")
    _update_ledger(paths, cfg, "report", time.perf_counter() - started, artifacts)
    print(f"[report] wrote {len(artifacts)} files under {paths.report}")


def render_figures(cells, cfg: ExperimentConfig, outdir: Path):
    """Accuracy-vs-fraction curves, full-set classifier bars, best-cell CM."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    full = [c for c in cells if c.selector == "none"]
    base = max(full, key=lambda c: c.metricset.accuracy)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for sel in cfg.selectors:
        fracs = sorted({c.fraction for c in cells if c.selector == sel})
        best = [max((c for c in cells if c.selector == sel and c.fraction == f),
                    key=lambda c: c.metricset.accuracy).metricset.accuracy
                for f in fracs]
        ax.plot([f * 100 for f in fracs], [a * 100 for a in best],
                marker="o", label=sel)
    ax.axhline(base.metricset.accuracy * 100, color="gray", linestyle="--",
               label=f"full set ({base.classifier.upper()})")
    ax.set_xlabel("Retained features (%)")
    ax.set_ylabel("Best test accuracy (%)")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    p = outdir / "accuracy_vs_fraction.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    written.append(p)

    fig, ax = plt.subplots(figsize=(7, 4))
    names = [c.classifier.upper() for c in full]
    accs = [c.metricset.accuracy * 100 for c in full]
    ax.bar(names, accs)
    ax.set_ylabel("Test accuracy (%)")
    ax.set_title("Full feature set")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    p = outdir / "classifier_accuracy.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    written.append(p)

    best = max(cells, key=lambda c: c.metricset.accuracy)
    fig, ax = plt.subplots(figsize=(5, 4.5))
    im = ax.imshow(best.cm.counts, cmap="Blues")
    for i in range(best.cm.counts.shape[0]):
        for j in range(best.cm.counts.shape[1]):
            ax.text(j, i, str(int(best.cm.counts[i, j])),
                    ha="center", va="center", fontsize=9)
    ax.set_xlabel("Predicted")
    ax.set_ylabel("True")
    ax.set_title(f"Best cell: {best.classifier.upper()} "
                 f"{best.selector}/{best.fraction:.0%}")
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    p = outdir / "confusion_best.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    written.append(p)
    return written


def cmd_all(cfg: ExperimentConfig) -> None:
    cmd_ingest(cfg)
    cmd_split(cfg)
    cmd_train(cfg)
    cmd_select(cfg)
    cmd_sweep(cfg)
    cmd_report(cfg)
