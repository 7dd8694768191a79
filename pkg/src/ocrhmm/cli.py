"""Command-line front end: ingest, split, features, run, report."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from . import __version__, _accel
from .config import ConfigError, RunConfig, from_dict, load_config
from .dataset import GROUPS, DatasetError, SplitAssignment, load_dataset, split_dataset
from .eval import CellError, EvalReport, PreparedData, render_report, report_from_json, report_to_json, run_cell
from .features import write_feature_csv

logger = logging.getLogger("ocrhmm")

EXIT_OK, EXIT_CELLS, EXIT_DATA, EXIT_CONFIG = 0, 1, 2, 3
FETCH_HINT = "fetch it with: python3 scripts/fetch_letter_data.py --out data/letter.data.gz"


def _parser():
    p = argparse.ArgumentParser(prog="ocrhmm", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_help):
        sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--data", help="letter data file (.gz ok); else $OCRHMM_DATA or data/letter.data.gz")
        sp.add_argument("--out", help=out_help)
        return sp

    common(sub.add_parser("ingest", help="parse the dataset and print its shape"), "write the summary JSON here")
    sp = common(sub.add_parser("split", help="write a word-level split manifest"), "manifest path")
    _split_flags(sp)
    sp = common(sub.add_parser("features", help="write feature CSVs per set and group"), "output directory")
    _split_flags(sp)
    sp.add_argument("--features", help="comma-separated feature sets")
    sp.add_argument("--split-file", help="reuse a split manifest instead of recomputing")
    sp = common(sub.add_parser("run", help="full grid: train, test, correct, report"), "output directory")
    _split_flags(sp)
    sp.add_argument("--classifiers", help="comma-separated: knn,pw,nb,nn")
    sp.add_argument("--features", help="comma-separated feature sets a..h")
    sp.add_argument("--modes", help="comma-separated HMM modes 1,2,3")
    sp.add_argument("--parallel-cells", action="store_true", default=None, help="run cells concurrently (timings unreliable)")
    sp.add_argument("--no-timings", action="store_true", default=None, help="blank the time columns")
    sp.add_argument("--archive-artifacts", action="store_true", default=None, help="keep predictions, emissions, HMMs in the archive")
    sp = sub.add_parser("report", help="re-render a report from a JSON archive")
    sp.add_argument("archive")
    sp.add_argument("--format", choices=("csv", "markdown"), default="markdown")
    sp.add_argument("--no-timings", action="store_true")
    return p


def _split_flags(sp):
    sp.add_argument("--seed", type=int)
    sp.add_argument("--ratios", help="three comma-separated fractions, e.g. 0.7,0.15,0.15")


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {}
    for name in ("data", "seed", "ratios", "classifiers", "features", "modes", "out", "parallel_cells", "archive_artifacts"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "no_timings", None):
        overrides["timings"] = False
    return from_dict(overrides, cfg) if overrides else cfg.validate()


def _load(cfg):
    path = cfg.data_path()
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    return load_dataset(path)


def _split(cfg, data):
    return split_dataset(data.words, tuple(cfg.ratios), cfg.seed)


def cmd_ingest(cfg, args):
    data = _load(cfg)
    summary = {
        "path": cfg.data_path(),
        "glyphs": len(data.glyphs),
        "words": len(data.words),
        "spellings": len(data.spellings()),
        "folds": sorted(int(f) for f in data.folds()),
    }
    text = json.dumps(summary, indent=1)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK


def cmd_split(cfg, args):
    data = _load(cfg)
    split = _split(cfg, data)
    text = split.to_json()
    out = args.out or os.path.join(cfg.out, "split.json")
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    with open(out, "w") as fh:
        fh.write(text)
    print(f"wrote {out}: {split.glyph_counts}")
    return EXIT_OK


def cmd_features(cfg, args):
    data = _load(cfg)
    if args.split_file:
        with open(args.split_file) as fh:
            split = SplitAssignment.from_json(fh.read())
    else:
        split = _split(cfg, data)
    out = args.out or os.path.join(cfg.out, "features")
    os.makedirs(out, exist_ok=True)
    prepared = PreparedData(data, split)
    for tag in cfg.features:
        for group in GROUPS:
            path = os.path.join(out, f"{tag}_{group}.csv")
            with open(path, "w", newline="") as fh:
                write_feature_csv(prepared.features(tag, group), prepared.glyphs[group], fh)
            print(f"wrote {path}")
    return EXIT_OK


def _word_strings(letters, lengths):
    words, start = [], 0
    for n in lengths:
        words.append("".join(chr(97 + int(c)) for c in letters[start : start + n]))
        start += n
    return words


def write_decode_csv(path, cell, prepared):
    """One row per (word, mode): truth, base prediction, decoded spelling."""
    words = prepared.words["test"]
    lengths = [len(w) for w in words]
    base = _word_strings(cell.artifacts["test_prediction"], lengths)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["word_index", "truth", "base_prediction", "decoded", "mode"])
        for mode, letters in sorted(cell.artifacts["decoded"].items()):
            for i, dec in enumerate(_word_strings(letters, lengths)):
                w.writerow([i, words[i].text, base[i], dec, mode])


def execute(cfg: RunConfig, stderr=None):
    """Run the configured grid; returns (report, failed cells, prepared data)."""
    stderr = stderr or sys.stderr
    data = _load(cfg)
    split = _split(cfg, data)
    prepared = PreparedData(data, split)
    for tag in cfg.features:
        for group in GROUPS:
            prepared.features(tag, group)
    options = cfg.cell_options()
    cells = cfg.cells()

    def one(cell):
        try:
            return run_cell(cell[0], cell[1], prepared, cfg.seed, options)
        except CellError as exc:
            print(f"FAILED {cell[0]}/{cell[1]}: {exc}", file=stderr)
            return None

    if cfg.parallel_cells and len(cells) > 1:
        logger.warning("running cells in parallel: timings are unreliable")
        with ThreadPoolExecutor() as pool:
            results = list(pool.map(one, cells))
    else:
        results = [one(c) for c in cells]
    failed = [c for c, r in zip(cells, results) if r is None]
    report = EvalReport([r for r in results if r is not None], cfg.seed, tuple(cfg.ratios))
    return report, failed, prepared


def cmd_run(cfg, args, stderr=None):
    stderr = stderr or sys.stderr
    report, failed, prepared = execute(cfg, stderr)
    os.makedirs(cfg.out, exist_ok=True)
    timings = cfg.timings and not cfg.parallel_cells
    files = {"report.csv": render_report(report, "csv", timings), "report.md": render_report(report, "markdown", timings)}
    archive = json.loads(report_to_json(report, cfg.archive_artifacts))
    archive["config"] = cfg.to_dict()
    archive["split"] = json.loads(prepared.split.to_json())
    files["archive.json"] = json.dumps(archive, indent=1)
    manifest = {
        "version": __version__,
        "backend": _accel.backend_name(),
        "config": cfg.to_dict(),
        "split_glyph_counts": prepared.split.glyph_counts,
        "cells": [f"{c}/{t}" for c, t in cfg.cells()],
        "failed": [f"{c}/{t}" for c, t in failed],
        "timings_reliable": timings,
        "files": sorted(files),
    }
    files["manifest.json"] = json.dumps(manifest, indent=1)
    for name, text in files.items():
        with open(os.path.join(cfg.out, name), "w", newline="") as fh:
            fh.write(text)
    if cfg.archive_artifacts:
        for cell in report.cells:
            write_decode_csv(os.path.join(cfg.out, f"decode_{cell.classifier}_{cell.features}.csv"), cell, prepared)
    print(files["report.md"], end="")
    if failed:
        print(f"{len(failed)} of {len(cfg.cells())} cells failed", file=stderr)
        return EXIT_CELLS
    return EXIT_OK


def cmd_report(args):
    with open(args.archive) as fh:
        report = report_from_json(fh.read())
    print(render_report(report, args.format, not args.no_timings), end="")
    return EXIT_OK


def main(argv=None):
    args = _parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "report":
        return cmd_report(args)
    try:
        cfg = _config(args)
    except ConfigError as exc:
        print("invalid configuration:", file=sys.stderr)
        for key, problem in exc.problems.items():
            print(f"  {key}: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        handler = {"ingest": cmd_ingest, "split": cmd_split, "features": cmd_features, "run": cmd_run}[args.command]
        return handler(cfg, args)
    except FileNotFoundError as exc:
        print(f"dataset not found: {exc.filename or exc}\n{FETCH_HINT}", file=sys.stderr)
        return EXIT_DATA
    except DatasetError as exc:
        print(f"malformed dataset: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
