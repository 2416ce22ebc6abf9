"""Experiment configuration: flat key=value file with section headers.

Grammar (one statement per line):
    [section]          # section header
    key = value        # assignment within the current section
    # comment          # full-line comments and blank lines are skipped

Recognized sections/keys (defaults in parentheses):
    [data]    manifest                 path to the dataset manifest (required)
    [run]     seed                     master seed, required - no wall-clock default
              out                      output directory (may come from --out)
              jobs                     worker count for sweep cells (1)
    [split]   train, val, test         ratios (0.64, 0.16, 0.20)
    [sweep]   classifiers              csv list (lr,knn,svm,mlp,rf,et,gbdt)
              selectors                csv list (gbdt,rf,lasso)
              fractions                csv list (0.5,0.4,0.3,0.2,0.1,0.05)
              budget                   random-search trials per cell (30)
    [scaling] standardize              classifier kinds fed z-scored inputs
                                       (lr,knn,svm,mlp)

The config hash covers everything that influences outputs (seed, ratios,
grids, budget, scaling, manifest path); output directory and job count are
excluded so moving a run or changing parallelism never invalidates it.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .classifiers import KINDS
from .feature_selection import SELECTOR_METHODS


class ConfigError(ValueError):
    exit_code = 2


def parse_sections(text: str) -> dict:
    sections: dict = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if current is None:
            raise ConfigError(f"line {lineno}: assignment before any [section]")
        key, value = line.split("=", 1)
        sections[current][key.strip()] = value.split("#", 1)[0].strip()
    return sections


def _csv_list(value: str) -> list:
    return [v.strip() for v in value.split(",") if v.strip()]


@dataclass
class ExperimentConfig:
    manifest: str
    seed: int
    out: str
    jobs: int = 1
    ratios: tuple = (0.64, 0.16, 0.20)
    classifiers: list = field(default_factory=lambda: list(KINDS))
    selectors: list = field(default_factory=lambda: list(SELECTOR_METHODS))
    fractions: list = field(default_factory=lambda: [0.5, 0.4, 0.3, 0.2, 0.1, 0.05])
    budget: int = 30
    standardize: frozenset = frozenset({"lr", "knn", "svm", "mlp"})

    def validate(self) -> "ExperimentConfig":
        if self.seed is None:
            raise ConfigError("seed is required ([run] seed = N or --seed)")
        if not self.out:
            raise ConfigError("output directory is required ([run] out or --out)")
        if not (0 <= self.seed < 2 ** 64):
            raise ConfigError(f"seed must be a u64, got {self.seed}")
        bad = [k for k in self.classifiers if k not in KINDS]
        if bad or not self.classifiers:
            raise ConfigError(f"unknown classifiers {bad}; valid: {KINDS}")
        bad = [s for s in self.selectors if s not in SELECTOR_METHODS]
        if bad:
            raise ConfigError(f"unknown selectors {bad}; valid: {SELECTOR_METHODS}")
        for p in self.fractions:
            if not 0.0 < p <= 1.0:
                raise ConfigError(f"fractions must lie in (0, 1], got {p}")
        if self.budget < 1:
            raise ConfigError(f"budget must be >= 1, got {self.budget}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        bad = [k for k in self.standardize if k not in KINDS]
        if bad:
            raise ConfigError(f"unknown kinds in standardize: {bad}")
        r = self.ratios
        if min(r) <= 0 or abs(sum(r) - 1.0) > 1e-9:
            raise ConfigError(f"split ratios must be positive and sum to 1, got {r}")
        return self

    def hash_lines(self) -> list:
        return sorted([
            f"data.manifest={self.manifest}",
            f"run.seed={self.seed}",
            f"split.train={self.ratios[0]!r}",
            f"split.val={self.ratios[1]!r}",
            f"split.test={self.ratios[2]!r}",
            f"sweep.classifiers={','.join(self.classifiers)}",
            f"sweep.selectors={','.join(self.selectors)}",
            f"sweep.fractions={','.join(repr(f) for f in self.fractions)}",
            f"sweep.budget={self.budget}",
            f"scaling.standardize={','.join(sorted(self.standardize))}",
        ])

    @property
    def config_hash(self) -> str:
        payload = "\n".join(self.hash_lines()).encode()
        return hashlib.sha256(payload).hexdigest()


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Read a config file and apply CLI overrides (out, seed, jobs, fractions).

    A relative manifest path is resolved against the config file's directory,
    so runs behave the same from any working directory.
    """
    try:
        with open(path) as fh:
            sections = parse_sections(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    overrides = overrides or {}
    cfg_dir = Path(path).resolve().parent

    def get(section, key, default=None):
        return sections.get(section, {}).get(key, default)

    try:
        manifest = get("data", "manifest")
        if manifest is None:
            raise ConfigError("[data] manifest is required")
        if not Path(manifest).is_absolute():
            manifest = str((cfg_dir / manifest).resolve())
        seed = overrides.get("seed")
        if seed is None:
            raw = get("run", "seed")
            seed = int(raw) if raw is not None else None
        out = overrides.get("out") or get("run", "out")
        jobs = overrides.get("jobs")
        if jobs is None:
            jobs = int(get("run", "jobs", "1"))
        ratios = (float(get("split", "train", "0.64")),
                  float(get("split", "val", "0.16")),
                  float(get("split", "test", "0.20")))
        fractions_raw = overrides.get("fractions") or get(
            "sweep", "fractions", "0.5,0.4,0.3,0.2,0.1,0.05")
        cfg = ExperimentConfig(
            manifest=manifest, seed=seed, out=out, jobs=jobs, ratios=ratios,
            classifiers=_csv_list(get("sweep", "classifiers",
                                      ",".join(KINDS))),
            selectors=_csv_list(get("sweep", "selectors",
                                    ",".join(SELECTOR_METHODS))),
            fractions=[float(v) for v in _csv_list(str(fractions_raw))],
            budget=int(get("sweep", "budget", "30")),
            standardize=frozenset(_csv_list(get("scaling", "standardize",
                                                "lr,knn,svm,mlp"))),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid config value: {exc}") from None
    return cfg.validate()
