"""Run configuration: JSON file plus command-line overrides."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields

from .eval import CLASSIFIERS, HIDDEN_NODES, CellOptions
from .features import FEATURE_SETS
from .hmm import END_MODELS, MODES

DEFAULT_DATA = os.path.join("data", "letter.data.gz")
DATA_ENV = "OCRHMM_DATA"


class ConfigError(ValueError):
    def __init__(self, problems: dict):
        self.problems = problems
        super().__init__("; ".join(f"{k}: {v}" for k, v in problems.items()))


@dataclass
class RunConfig:
    data: str | None = None
    seed: int = 0
    ratios: tuple = (1 / 3, 1 / 3, 1 / 3)
    classifiers: tuple = ("knn", "pw", "nb")
    features: tuple = tuple(FEATURE_SETS)
    modes: tuple = MODES
    out: str = "results"
    parallel_cells: bool = False
    timings: bool = True
    archive_artifacts: bool = False
    # hyperparameter overrides
    knn_k_max: int = 18
    knn_patience: int = 6
    pw_h_lo: float | None = None
    pw_h_hi: float | None = None
    pw_kernel: str = "gaussian"
    nb_floor: float = 1e-3
    hidden_nodes: dict = field(default_factory=lambda: dict(HIDDEN_NODES))
    nn_max_epochs: int = 1000
    nn_patience: int = 6
    scg_sigma: float = 5e-5
    scg_lambda: float = 5e-7
    hmm_alpha: float = 0.0
    end_model: str = "marginal"
    standardize: bool = False

    def data_path(self):
        return self.data or os.environ.get(DATA_ENV) or DEFAULT_DATA

    def cells(self):
        return [(c, t) for c in self.classifiers for t in self.features]

    def cell_options(self) -> CellOptions:
        return CellOptions(
            knn_k_max=self.knn_k_max,
            knn_patience=self.knn_patience,
            pw_h_lo=self.pw_h_lo,
            pw_h_hi=self.pw_h_hi,
            pw_kernel=self.pw_kernel,
            nb_floor=self.nb_floor,
            hidden_nodes=dict(self.hidden_nodes),
            nn_max_epochs=self.nn_max_epochs,
            nn_patience=self.nn_patience,
            scg_sigma=self.scg_sigma,
            scg_lambda=self.scg_lambda,
            hmm_alpha=self.hmm_alpha,
            end_model=self.end_model,
            standardize=self.standardize,
            modes=tuple(self.modes),
            keep_artifacts=self.archive_artifacts,
        )

    def to_dict(self):
        doc = asdict(self)
        for k in ("ratios", "classifiers", "features", "modes"):
            doc[k] = list(doc[k])
        return doc

    def validate(self):
        bad = {}
        if len(self.ratios) != 3 or any(r < 0 for r in self.ratios):
            bad["ratios"] = "need three non-negative values"
        elif abs(sum(self.ratios) - 1.0) > 1e-9:
            bad["ratios"] = f"sum to {sum(self.ratios)}, not 1"
        unknown = [c for c in self.classifiers if c not in CLASSIFIERS]
        if unknown or not self.classifiers:
            bad["classifiers"] = f"unknown {unknown}" if unknown else "empty"
        unknown = [t for t in self.features if t not in FEATURE_SETS]
        if unknown or not self.features:
            bad["features"] = f"unknown {unknown}" if unknown else "empty"
        unknown = [m for m in self.modes if m not in MODES]
        if unknown:
            bad["modes"] = f"unknown {unknown}"
        if self.pw_kernel not in ("gaussian", "hypercube"):
            bad["pw_kernel"] = self.pw_kernel
        if self.end_model not in END_MODELS:
            bad["end_model"] = self.end_model
        if self.knn_k_max < 1:
            bad["knn_k_max"] = "must be >= 1"
        if self.hmm_alpha < 0:
            bad["hmm_alpha"] = "must be >= 0"
        for name in ("pw_h_lo", "pw_h_hi"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                bad[name] = "must be positive"
        if self.pw_h_lo is not None and self.pw_h_hi is not None and self.pw_h_lo >= self.pw_h_hi:
            bad["pw_h_lo"] = "must be below pw_h_hi"
        if any(t not in FEATURE_SETS or int(n) < 1 for t, n in self.hidden_nodes.items()):
            bad["hidden_nodes"] = "keys must be feature tags, values >= 1"
        if bad:
            raise ConfigError(bad)
        return self


_TUPLES = {"ratios": float, "classifiers": str, "features": str, "modes": int}


def from_dict(doc: dict, base: RunConfig | None = None) -> RunConfig:
    """Overlay ``doc`` on ``base``; unknown keys and malformed values raise ConfigError."""
    cfg = base or RunConfig()
    known = {f.name for f in fields(RunConfig)}
    bad = {k: "unknown key" for k in doc if k not in known}
    values = {}
    for k, v in doc.items():
        if k in bad:
            continue
        try:
            if k in _TUPLES:
                if isinstance(v, str):
                    v = [s for s in v.split(",") if s]
                v = tuple(_TUPLES[k](x.lower() if isinstance(x, str) and k != "ratios" else x) for x in v)
            elif k == "hidden_nodes":
                v = {**cfg.hidden_nodes, **{str(t): int(n) for t, n in dict(v).items()}}
            values[k] = v
        except (TypeError, ValueError) as exc:
            bad[k] = str(exc)
    merged = RunConfig(**{**asdict(cfg), **values})
    try:
        merged.validate()
    except ConfigError as exc:
        bad.update(exc.problems)
    if bad:
        raise ConfigError(bad)
    return merged


def load_config(path) -> RunConfig:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError({"<file>": f"invalid JSON: {exc}"}) from exc
    if not isinstance(doc, dict):
        raise ConfigError({"<file>": "top level must be an object"})
    return from_dict(doc)
