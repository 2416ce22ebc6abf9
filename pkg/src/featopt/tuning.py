"""Random-search hyperparameter optimization on validation accuracy.

Each trial's parameter point is drawn from a child stream keyed by
(seed, "trial", index), so a budget-20 search shares its first trial with a
budget-1 search at the same seed, and scheduling can never change which
points get evaluated.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import classifiers as clf
from .rng import Rng


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def sample(self, rng: Rng):
        return self.lo + rng.uniform() * (self.hi - self.lo)


@dataclass(frozen=True)
class LogUniform:
    lo: float
    hi: float

    def sample(self, rng: Rng):
        return float(np.exp(np.log(self.lo)
                            + rng.uniform() * (np.log(self.hi) - np.log(self.lo))))


@dataclass(frozen=True)
class IntRange:
    lo: int
    hi: int  # inclusive

    def sample(self, rng: Rng):
        return self.lo + rng.randint(self.hi - self.lo + 1)


@dataclass(frozen=True)
class Categorical:
    choices: tuple

    def sample(self, rng: Rng):
        return self.choices[rng.randint(len(self.choices))]


def _validated(dist):
    if isinstance(dist, (Uniform, LogUniform)) and not dist.lo < dist.hi:
        raise ValueError(f"need lo < hi, got {dist}")
    if isinstance(dist, IntRange) and dist.lo > dist.hi:
        raise ValueError(f"need lo <= hi, got {dist}")
    if isinstance(dist, Categorical) and not dist.choices:
        raise ValueError("categorical choices must be non-empty")
    return dist


class SearchSpace:
    """Ordered name -> distribution map; sampling follows declaration order."""

    def __init__(self, **dists):
        self.dists = {name: _validated(d) for name, d in dists.items()}

    def sample(self, rng: Rng) -> dict:
        return {name: d.sample(rng) for name, d in self.dists.items()}


def default_search_space(kind: str) -> SearchSpace:
    if kind == "lr":
        return SearchSpace(C=LogUniform(1e-3, 1e3))
    if kind == "knn":
        return SearchSpace(k=Categorical(tuple(range(1, 32, 2))),
                           metric=Categorical(("euclidean", "manhattan")))
    if kind == "svm":
        return SearchSpace(C=LogUniform(1e-2, 1e3),
                           kernel=Categorical(("linear", "rbf")),
                           gamma=LogUniform(1e-4, 1.0))
    if kind == "mlp":
        return SearchSpace(hidden=IntRange(32, 512), lr=LogUniform(1e-4, 1e-1))
    if kind in ("rf", "et"):
        return SearchSpace(trees=IntRange(100, 500),
                           max_depth=Categorical(tuple(range(8, 33)) + (None,)),
                           min_leaf=IntRange(1, 8))
    if kind == "gbdt":
        return SearchSpace(trees=IntRange(100, 500), leaves=IntRange(15, 63),
                           lr=LogUniform(1e-2, 0.3))
    raise ValueError(f"unknown classifier kind {kind!r}")


@dataclass
class TrialRecord:
    trial: int
    seed: int
    params: dict
    val_accuracy: float
    fit_seconds: float
    error: str | None = None


@dataclass
class SearchResult:
    best_params: dict
    best_trial: int
    best_accuracy: float
    records: list = field(default_factory=list)


def random_search(kind: str, space: SearchSpace, budget: int,
                  X_train, y_train, X_val, y_val, seed: int) -> SearchResult:
    """Sample `budget` points i.i.d.; best by validation accuracy, ties to the
    earliest trial. Fit failures score 0 with an error note and never abort."""
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    root = Rng(seed)
    records = []
    best = None
    for t in range(budget):
        trial_rng = root.spawn("trial", t)
        params = space.sample(trial_rng)
        fit_seed = trial_rng.spawn("fit").seed
        started = time.perf_counter()
        error = None
        try:
            model = clf.fit(kind, X_train, y_train, params, seed=fit_seed)
            acc = float((clf.predict(model, X_val) == np.asarray(y_val)).mean())
        except Exception as exc:  # recorded, not raised
            acc = 0.0
            error = f"{type(exc).__name__}: {exc}"
        rec = TrialRecord(t, fit_seed, params, acc, time.perf_counter() - started,
                          error)
        records.append(rec)
        if best is None or acc > best[0]:
            best = (acc, t, params)
    return SearchResult(best[2], best[1], best[0], records)


def trial_log_csv(records) -> str:
    """CSV: trial,seed,params_json,val_accuracy,fit_seconds."""
    lines = ["trial,seed,params_json,val_accuracy,fit_seconds"]
    for r in records:
        params = json.dumps(r.params, sort_keys=True)
        lines.append(f'{r.trial},{r.seed},"{params.replace(chr(34), chr(34) * 2)}",'
                     f"{r.val_accuracy:.6f},{r.fit_seconds:.3f}")
    return "\n".join(lines) + "\n"
