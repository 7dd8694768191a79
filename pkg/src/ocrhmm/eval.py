"""Classifier x feature-set grid: accuracies, HMM corrections, timings, reports."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import hmm
from .classifiers import knn, naive_bayes, network, parzen
from .classifiers.emissions import classify_argmax
from .dataset import GROUPS, LetterData, SplitAssignment, group_glyphs, group_words
from .features import FEATURE_SETS, GlyphFeatureCache, extract_features, standardize

logger = logging.getLogger(__name__)

CLASSIFIERS = ("knn", "nn", "pw", "nb")
DISPLAY = {"knn": "K-NN", "nn": "NN", "pw": "PW", "nb": "NB"}
# hidden nodes per feature set as used for the published grid; g/h are extensions
HIDDEN_NODES = {"a": 12, "b": 16, "c": 28, "d": 35, "e": 35, "f": 64, "g": 64, "h": 64}
PAPER_CELLS = {("nn", t) for t in "abcdef"} | {(c, t) for c in ("knn", "pw", "nb") for t in FEATURE_SETS}

COLUMNS = ("classifier", "features", "train_acc", "test_acc", "hmm1", "hmm2", "hmm3", "param", "train_time", "test_time")


class CellError(RuntimeError):
    pass


def letter_accuracy(predicted, truth) -> float:
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise ValueError(f"length mismatch: {predicted.shape} vs {truth.shape}")
    if predicted.size == 0:
        raise ValueError("empty sequences")
    return 100.0 * float(np.mean(predicted == truth))


def word_accuracy(predicted, truth, lengths) -> float:
    """Percentage of words whose letters are all correct."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    hits = []
    start = 0
    for n in lengths:
        hits.append(bool(np.all(predicted[start : start + n] == truth[start : start + n])))
        start += n
    return 100.0 * float(np.mean(hits))


@dataclass
class CellResult:
    classifier: str
    features: str
    train_accuracy: float
    test_accuracy: float
    hmm1: float
    hmm2: float
    hmm3: float
    param: float | None
    train_time: float
    test_time: float
    word_accuracy: dict = field(default_factory=dict)
    in_paper: bool = True
    artifacts: dict = field(default_factory=dict)

    @property
    def hmm(self):
        return {1: self.hmm1, 2: self.hmm2, 3: self.hmm3}

    def to_dict(self, with_artifacts=False):
        doc = asdict(self)
        if not with_artifacts:
            doc.pop("artifacts")
        return doc

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        doc.setdefault("artifacts", {})
        return cls(**doc)


@dataclass
class EvalReport:
    cells: list
    seed: int
    ratios: tuple

    def classifier_average(self, classifier):
        return _average([c for c in self.cells if c.classifier == classifier])

    def total_average(self):
        return _average(self.cells)


_AVERAGED = ("train_accuracy", "test_accuracy", "hmm1", "hmm2", "hmm3", "param", "train_time", "test_time")


def _average(cells):
    out = {}
    for name in _AVERAGED:
        vals = [getattr(c, name) for c in cells if getattr(c, name) is not None]
        out[name] = float(np.mean(vals)) if vals else None
    return out


class PreparedData:
    """Dataset + split with per-group glyph lists and cached feature matrices."""

    def __init__(self, data: LetterData, split: SplitAssignment):
        self.data = data
        self.split = split
        self.words = {name: group_words(data, split, name) for name in GROUPS}
        self.glyphs = {name: group_glyphs(self.words[name]) for name in GROUPS}
        self.cache = GlyphFeatureCache()
        self._features = {}

    def features(self, tag, group):
        key = (tag, group)
        if key not in self._features:
            self._features[key] = extract_features(self.glyphs[group], tag, self.cache)
        return self._features[key]

    def matrices(self, tag, standardized=False):
        rows = [self.features(tag, g).rows for g in GROUPS]
        if standardized:
            rows = list(standardize(*rows))
        labels = [self.features(tag, g).letters for g in GROUPS]
        return dict(zip(GROUPS, rows)), dict(zip(GROUPS, labels))


@dataclass
class CellOptions:
    knn_k_max: int = knn.K_MAX
    knn_patience: int = knn.PATIENCE
    pw_h_lo: float | None = None
    pw_h_hi: float | None = None
    pw_kernel: str = "gaussian"
    nb_floor: float = naive_bayes.BANDWIDTH_FLOOR
    hidden_nodes: dict = field(default_factory=lambda: dict(HIDDEN_NODES))
    nn_max_epochs: int = network.MAX_EPOCHS
    nn_patience: int = network.PATIENCE
    scg_sigma: float = 5e-5
    scg_lambda: float = 5e-7
    hmm_alpha: float = 0.0
    end_model: str = "marginal"
    standardize: bool = False
    modes: tuple = (1, 2, 3)
    keep_artifacts: bool = False


def _train(classifier, x, y, seed, opts):
    if classifier == "knn":
        model = knn.train_knn(x["train"], y["train"], x["validation"], y["validation"], opts.knn_k_max, opts.knn_patience)
        return model, float(model.k)
    if classifier == "pw":
        model = parzen.train_parzen(
            x["train"], y["train"], x["validation"], y["validation"], opts.pw_h_lo, opts.pw_h_hi, opts.pw_kernel
        )
        return model, model.bandwidth_h
    if classifier == "nb":
        return naive_bayes.train_naive_bayes(x["train"], y["train"], opts.nb_floor), None
    if classifier == "nn":
        raise AssertionError("handled by caller")
    raise ValueError(f"unknown classifier {classifier!r}")


def _scores(classifier, model, x, train=False):
    if classifier == "knn":
        return knn.knn_scores(model, x, exclude_self=train)
    if classifier == "pw":
        return parzen.parzen_scores(model, x, exclude_self=train)
    if classifier == "nb":
        return naive_bayes.nb_scores(model, x)
    return network.nn_scores(model, x)


def _emissions_from(classifier, model, x, scores):
    if classifier == "knn":
        from .classifiers.emissions import normalize_emissions

        return normalize_emissions(scores)
    if classifier == "pw":
        return parzen.parzen_emissions(model, x)
    if classifier == "nb":
        return naive_bayes.nb_emissions(model, x)
    from .classifiers.emissions import normalize_emissions

    return normalize_emissions(scores)


def run_cell(classifier: str, tag: str, prepared: PreparedData, seed: int = 0, options: CellOptions | None = None) -> CellResult:
    """Train, test, and HMM-correct one classifier on one feature set."""
    opts = options or CellOptions()
    try:
        x, y = prepared.matrices(tag, opts.standardize)
        t0 = time.perf_counter()
        if classifier == "nn":
            model = network.train_neural_oaa(
                x["train"], y["train"], x["validation"], y["validation"],
                opts.hidden_nodes.get(tag, 64), seed=seed,
                max_epochs=opts.nn_max_epochs, patience=opts.nn_patience,
                sigma=opts.scg_sigma, lam=opts.scg_lambda,
            )
            param = model.training_epochs
        else:
            model, param = _train(classifier, x, y, seed, opts)
        train_time = (time.perf_counter() - t0) / 60.0

        t0 = time.perf_counter()
        test_scores = _scores(classifier, model, x["test"])
        emissions = _emissions_from(classifier, model, x["test"], test_scores)
        test_time = (time.perf_counter() - t0) / 60.0

        train_pred = classify_argmax(_scores(classifier, model, x["train"], train=True))
        test_pred = classify_argmax(test_scores)
        truth = y["test"]
        lengths = [len(w) for w in prepared.words["test"]]
        hmm_model = hmm.fit_hmm(prepared.words["train"], opts.hmm_alpha, opts.end_model)
        acc = {}
        words = {"base": word_accuracy(test_pred, truth, lengths)}
        decoded_all = {}
        for mode in (1, 2, 3):
            if mode not in opts.modes:
                acc[mode] = None
                continue
            decoded = hmm.flatten(hmm.correct_words(hmm_model, emissions, lengths, mode))
            decoded_all[mode] = decoded
            acc[mode] = letter_accuracy(decoded, truth)
            words[f"hmm{mode}"] = word_accuracy(decoded, truth, lengths)
    except Exception as exc:
        raise CellError(f"cell ({classifier}, {tag}) failed: {exc}") from exc

    artifacts = {}
    if opts.keep_artifacts:
        artifacts = {
            "test_prediction": test_pred.tolist(),
            "decoded": {str(m): d.tolist() for m, d in decoded_all.items()},
            "emissions": emissions.tolist(),
            "hmm": json.loads(hmm_model.to_json()),
        }
    result = CellResult(
        classifier=classifier,
        features=tag,
        train_accuracy=letter_accuracy(train_pred, y["train"]),
        test_accuracy=letter_accuracy(test_pred, truth),
        hmm1=acc[1],
        hmm2=acc[2],
        hmm3=acc[3],
        param=param,
        train_time=train_time,
        test_time=test_time,
        word_accuracy=words,
        in_paper=(classifier, tag) in PAPER_CELLS,
        artifacts=artifacts,
    )
    logger.info(
        "%s/%s: train %.2f test %.2f hmm %s param %s",
        classifier, tag, result.train_accuracy, result.test_accuracy,
        [None if v is None else round(v, 2) for v in (result.hmm1, result.hmm2, result.hmm3)], param,
    )
    return result


# -- rendering -----------------------------------------------------------------


def _fmt(value, digits=2):
    if value is None:
        return "-"
    return f"{value:.{digits}f}"


def _param(classifier, value):
    if value is None:
        return "-"
    if classifier == "knn":
        return f"{value:.0f}" if float(value).is_integer() else f"{value:.1f}"
    if classifier == "pw":
        return f"{value:.4f}"
    return f"{value:.2f}"


def _row(label, features, stats, classifier, timings):
    return [
        label,
        features,
        _fmt(stats["train_accuracy"]),
        _fmt(stats["test_accuracy"]),
        _fmt(stats["hmm1"]),
        _fmt(stats["hmm2"]),
        _fmt(stats["hmm3"]),
        _param(classifier, stats["param"]),
        _fmt(stats["train_time"]) if timings else "-",
        _fmt(stats["test_time"]) if timings else "-",
    ]


def report_rows(report: EvalReport, timings=True):
    rows = []
    order = [c for c in CLASSIFIERS if any(cell.classifier == c for cell in report.cells)]
    for clf in order:
        cells = [c for c in report.cells if c.classifier == clf]
        for c in cells:
            rows.append(_row(DISPLAY[clf], c.features, c.to_dict(), clf, timings))
        rows.append(_row(f"{DISPLAY[clf]} average", "", report.classifier_average(clf), clf, timings))
    if report.cells:
        rows.append(_row("Total average", "", report.total_average(), "", timings))
    return rows


def render_report(report: EvalReport, fmt="csv", timings=True) -> str:
    """The grid as CSV or a markdown table, one row per cell plus average rows."""
    rows = report_rows(report, timings)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        writer.writerows(rows)
        return buf.getvalue()
    if fmt == "markdown":
        lines = ["| " + " | ".join(COLUMNS) + " |", "|" + "---|" * len(COLUMNS)]
        lines += ["| " + " | ".join(r) + " |" for r in rows]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def report_to_json(report: EvalReport, with_artifacts=False) -> str:
    doc = {
        "seed": report.seed,
        "ratios": list(report.ratios),
        "cells": [c.to_dict(with_artifacts) for c in report.cells],
    }
    return json.dumps(doc, indent=1)


def report_from_json(text) -> EvalReport:
    doc = json.loads(text)
    return EvalReport([CellResult.from_dict(c) for c in doc["cells"]], doc["seed"], tuple(doc["ratios"]))
