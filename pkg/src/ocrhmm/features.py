"""Feature vectors for the eight feature sets ``a`` .. ``h``.

Scalar statistics always come from the original bitmap.  Sets ``e``, ``g``
and ``h`` use the deslanted (rotated) pixels, which are computed once per
glyph and cached.
"""

from __future__ import annotations

import csv
import logging
import threading
from dataclasses import dataclass

import numpy as np

from . import imageops
from .dataset import ALPHABET, Glyph

logger = logging.getLogger(__name__)

SCALAR_NAMES = (
    "centroid_x",
    "centroid_y",
    "eccentricity",
    "hole_count",
    "object_count",
    "quadrant_tl",
    "quadrant_tr",
    "quadrant_bl",
    "quadrant_br",
    "perimeter",
    "major_axis",
    "minor_axis",
    "orientation",
)
_ORIENT = SCALAR_NAMES.index("orientation")

DIMENSIONS = {"a": 3, "b": 5, "c": 9, "d": 13, "e": 141, "f": 128, "g": 128, "h": 129}
FEATURE_SETS = tuple(DIMENSIONS)


@dataclass(frozen=True)
class FeatureSetId:
    tag: str

    def __post_init__(self):
        if self.tag not in DIMENSIONS:
            raise ValueError(f"unknown feature set {self.tag!r}")

    @property
    def dimension(self):
        return DIMENSIONS[self.tag]


@dataclass
class FeatureMatrix:
    set: FeatureSetId
    rows: np.ndarray  # (N, D) float64
    glyph_ids: np.ndarray
    letters: np.ndarray

    def __len__(self):
        return self.rows.shape[0]

    @property
    def dimension(self):
        return self.rows.shape[1]


def scalar_table(stack):
    """The 13 scalar statistics for an ``(N, 16, 8)`` stack of original bitmaps."""
    cx, cy, orient, major, minor, ecc = imageops.ellipse_stats_batch(stack)
    table = np.column_stack(
        [
            cx,
            cy,
            ecc,
            imageops.count_holes_batch(stack),
            imageops.connected_objects_batch(stack, 8),
            imageops.quadrant_counts_batch(stack),
            imageops.perimeter_batch(stack),
            major,
            minor,
            np.mod(orient, 180.0),
        ]
    ).astype(np.float64)
    return table


class GlyphFeatureCache:
    """Write-once per-glyph store of scalar rows and rotated pixels."""

    def __init__(self):
        self._lock = threading.Lock()
        self._scalars = {}
        self._rotated = {}

    def __len__(self):
        return len(self._scalars)

    def fill(self, glyphs):
        missing = [g for g in glyphs if g.id not in self._scalars]
        if not missing:
            return
        stack = np.stack([g.bitmap for g in missing])
        scalars = scalar_table(stack)
        _, _, orient, *_ = imageops.ellipse_stats_batch(stack)
        rotated = imageops.rotate_upright_batch(stack, np.nan_to_num(orient, nan=90.0))
        with self._lock:
            for g, row, rot in zip(missing, scalars, rotated):
                self._scalars.setdefault(g.id, row)
                self._rotated.setdefault(g.id, rot.reshape(-1))

    def scalars(self, glyphs):
        self.fill(glyphs)
        return np.stack([self._scalars[g.id] for g in glyphs])

    def rotated(self, glyphs):
        self.fill(glyphs)
        return np.stack([self._rotated[g.id] for g in glyphs])


def extract_features(glyphs: list[Glyph], tag: str, cache: GlyphFeatureCache | None = None) -> FeatureMatrix:
    fid = FeatureSetId(tag)
    n = len(glyphs)
    ids = np.array([g.id for g in glyphs], dtype=np.int64)
    letters = np.array([g.letter for g in glyphs], dtype=np.int64)
    if n == 0:
        return FeatureMatrix(fid, np.zeros((0, fid.dimension)), ids, letters)
    raw = np.stack([g.pixels for g in glyphs]).astype(np.float64)
    if tag == "f":
        rows = raw
    else:
        if cache is None:
            cache = GlyphFeatureCache()
        scalars = cache.scalars(glyphs)
        if tag in "abcd":
            rows = scalars[:, : fid.dimension]
        elif tag == "e":
            rows = np.hstack([scalars, cache.rotated(glyphs)])
        elif tag == "g":
            rows = cache.rotated(glyphs).astype(np.float64)
        else:
            rows = np.hstack([cache.rotated(glyphs), scalars[:, _ORIENT : _ORIENT + 1]])
        rows = np.asarray(rows, dtype=np.float64)
    empty = raw.sum(axis=1) == 0
    if empty.any():
        logger.warning("%d empty glyph(s) replaced by zero rows: %s", empty.sum(), ids[empty][:10].tolist())
        rows = rows.copy()
        rows[empty] = 0.0
    return FeatureMatrix(fid, np.ascontiguousarray(rows), ids, letters)


def standardize(train: np.ndarray, *others: np.ndarray):
    """Z-score columns with statistics of ``train``; constant columns are only centred."""
    mean = train.mean(axis=0)
    std = train.std(axis=0)
    std[std == 0] = 1.0
    return tuple((m - mean) / std for m in (train, *others))


def feature_header(dimension):
    return ["glyph_id", "letter", "word_id"] + [f"f{i}" for i in range(1, dimension + 1)]


def write_feature_csv(matrix: FeatureMatrix, glyphs, stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(feature_header(matrix.dimension))
    for g, row in zip(glyphs, matrix.rows):
        writer.writerow([g.id, ALPHABET[g.letter], g.word_id] + [repr(float(v)) for v in row])
