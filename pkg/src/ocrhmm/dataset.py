"""Reading the OCR letter file, grouping letters into words, splitting.

The letter file has one tab-separated record per glyph::

    id  letter  next_id  word_id  position  fold  p_0 ... p_127

``next_id`` is ``-1`` on the last letter of a word and pixels are stored
row-major for a 16 row x 8 column bitmap.
"""

from __future__ import annotations

import gzip
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

ALPHABET = "abcdefghijklmnopqrstuvwxyz"
N_LETTERS = 26
ROWS, COLS = 16, 8
N_PIXELS = ROWS * COLS
N_FIELDS = 6 + N_PIXELS
GROUPS = ("train", "validation", "test")


class DatasetError(ValueError):
    """Malformed record in a letter file."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class StructureError(ValueError):
    """Glyphs do not form consistent words."""


@dataclass(frozen=True, eq=False)
class Glyph:
    id: int
    letter: int
    next_id: int | None
    word_id: int
    position: int
    fold: int
    bitmap: np.ndarray  # (16, 8) uint8, rows top to bottom

    @property
    def char(self):
        return ALPHABET[self.letter]

    @property
    def pixels(self):
        return self.bitmap.reshape(-1)

    def same_as(self, other):
        return (
            self.id == other.id
            and self.letter == other.letter
            and self.next_id == other.next_id
            and self.word_id == other.word_id
            and self.position == other.position
            and self.fold == other.fold
            and np.array_equal(self.bitmap, other.bitmap)
        )


@dataclass(frozen=True, eq=False)
class WordSequence:
    word_id: int
    glyphs: tuple
    fold: int

    def __len__(self):
        return len(self.glyphs)

    @property
    def letters(self):
        return [g.letter for g in self.glyphs]

    @property
    def text(self):
        return "".join(g.char for g in self.glyphs)


@dataclass
class LetterData:
    """Parsed letter file: glyphs in file order plus the assembled words."""

    glyphs: list
    words: list

    def __len__(self):
        return len(self.glyphs)

    @property
    def pixels(self):
        if not self.glyphs:
            return np.zeros((0, N_PIXELS), dtype=np.uint8)
        return np.stack([g.pixels for g in self.glyphs])

    @property
    def letters(self):
        return np.array([g.letter for g in self.glyphs], dtype=np.int64)

    def spellings(self):
        return {w.text for w in self.words}

    def folds(self):
        return sorted({g.fold for g in self.glyphs})

    def word(self, word_id):
        return self._by_id[word_id]

    @property
    def _by_id(self):
        lookup = self.__dict__.get("_word_lookup")
        if lookup is None:
            lookup = {w.word_id: w for w in self.words}
            self.__dict__["_word_lookup"] = lookup
        return lookup


def open_text(path):
    """Open a letter file for reading, transparently handling gzip."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"\x1f\x8b":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="ascii")
    return open(path, "r", encoding="ascii")


def _parse_int(text, name, lineno):
    try:
        return int(text)
    except ValueError:
        raise DatasetError(f"{name} is not an integer: {text!r}", lineno) from None


_BINARY = frozenset("01")


def parse_record(line: str, lineno: int | None = None) -> Glyph:
    fields = line.rstrip("\r\n").split("\t")
    # the public file ends every record with a tab
    if fields and fields[-1] == "":
        fields.pop()
    if len(fields) != N_FIELDS:
        raise DatasetError(f"expected {N_FIELDS} fields, got {len(fields)}", lineno)
    letter = fields[1]
    if len(letter) != 1 or letter not in ALPHABET:
        raise DatasetError(f"letter outside a-z: {letter!r}", lineno)
    gid = _parse_int(fields[0], "id", lineno)
    next_id = _parse_int(fields[2], "next_id", lineno)
    word_id = _parse_int(fields[3], "word_id", lineno)
    position = _parse_int(fields[4], "position", lineno)
    fold = _parse_int(fields[5], "fold", lineno)
    if not 0 <= fold <= 9:
        raise DatasetError(f"fold outside 0-9: {fold}", lineno)
    if position < 1:
        raise DatasetError(f"position must be >= 1, got {position}", lineno)
    pix = fields[6:]
    for j, value in enumerate(pix):
        if value not in _BINARY:
            raise DatasetError(f"pixel {j} is not binary: {value!r}", lineno)
    bitmap = np.fromiter((v == "1" for v in pix), dtype=np.uint8, count=N_PIXELS)
    return Glyph(
        id=gid,
        letter=ALPHABET.index(letter),
        next_id=None if next_id == -1 else next_id,
        word_id=word_id,
        position=position,
        fold=fold,
        bitmap=bitmap.reshape(ROWS, COLS),
    )


def parse_dataset(source: IO[str] | Iterable[str]) -> LetterData:
    """Parse a letter stream into glyphs (file order) and words."""
    glyphs = []
    for lineno, line in enumerate(source, start=1):
        if not line.strip():
            continue
        glyphs.append(parse_record(line, lineno))
    return LetterData(glyphs=glyphs, words=assemble_words(glyphs))


def load_dataset(path) -> LetterData:
    with open_text(path) as fh:
        return parse_dataset(fh)


def assemble_words(glyphs: Sequence[Glyph]) -> list:
    """Group consecutive glyphs sharing a word id; ``next_id == -1`` closes a word."""
    words = []
    current = []

    def close():
        first = current[0]
        for prev, g in zip(current, current[1:]):
            if g.position != prev.position + 1:
                raise StructureError(
                    f"word {first.word_id}: position {g.position} follows {prev.position}"
                )
            if g.fold != first.fold:
                raise StructureError(f"word {first.word_id}: glyphs span folds")
        words.append(WordSequence(first.word_id, tuple(current), first.fold))
        current.clear()

    for g in glyphs:
        if current and g.word_id != current[0].word_id:
            close()
        current.append(g)
        if g.next_id is None:
            close()
    if current:
        close()
    return words


def format_record(g: Glyph) -> str:
    head = [
        str(g.id),
        ALPHABET[g.letter],
        str(-1 if g.next_id is None else g.next_id),
        str(g.word_id),
        str(g.position),
        str(g.fold),
    ]
    return "\t".join(head + ["1" if p else "0" for p in g.pixels]) + "\t\n"


def write_dataset(glyphs: Iterable[Glyph], stream: IO[str]) -> None:
    for g in glyphs:
        stream.write(format_record(g))


# -- splitting ---------------------------------------------------------------


@dataclass
class SplitAssignment:
    train: tuple
    validation: tuple
    test: tuple
    seed: int
    ratios: tuple
    glyph_counts: dict = field(default_factory=dict)
    whole_folds: dict = field(default_factory=dict)

    def group(self, name):
        return getattr(self, name)

    def to_json(self):
        doc = {
            "seed": self.seed,
            "ratios": list(self.ratios),
            "glyph_counts": self.glyph_counts,
            "whole_folds": self.whole_folds,
        }
        for name in GROUPS:
            doc[name] = list(self.group(name))
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        return cls(
            train=tuple(doc["train"]),
            validation=tuple(doc["validation"]),
            test=tuple(doc["test"]),
            seed=doc["seed"],
            ratios=tuple(doc["ratios"]),
            glyph_counts=doc.get("glyph_counts", {}),
            whole_folds=doc.get("whole_folds", {}),
        )


def split_dataset(words: Sequence[WordSequence], ratios=(1 / 3, 1 / 3, 1 / 3), seed=0) -> SplitAssignment:
    """Word-preserving train/validation/test split.

    Whole folds, visited in a seeded random order, go to the group with the
    largest remaining deficit they fit into.  Words of folds that fit nowhere
    are shuffled and handed one at a time to the group with the largest
    relative deficit.  Groups list word ids in input order.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3:
        raise ValueError("need three ratios")
    if any(r < 0 for r in ratios):
        raise ValueError(f"negative split ratio in {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")

    rng = np.random.default_rng(seed)
    by_fold = {}
    for w in words:
        by_fold.setdefault(w.fold, []).append(w)
    folds = sorted(by_fold)
    fold_size = {f: sum(len(w) for w in by_fold[f]) for f in folds}
    total = sum(fold_size.values())
    target = np.array([r * total for r in ratios])
    filled = np.zeros(3)
    group_of = {}
    whole = {name: [] for name in GROUPS}

    leftover = []
    for f in (folds[i] for i in rng.permutation(len(folds))):
        deficit = target - filled
        fits = [g for g in range(3) if fold_size[f] <= deficit[g] + 1e-9]
        if not fits:
            leftover.append(f)
            continue
        g = max(fits, key=lambda i: (deficit[i], -i))
        filled[g] += fold_size[f]
        whole[GROUPS[g]].append(int(f))
        for w in by_fold[f]:
            group_of[w.word_id] = g

    rest = [w for f in sorted(leftover) for w in by_fold[f]]
    for i in rng.permutation(len(rest)):
        w = rest[i]
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.where(target > 0, (target - filled) / target, -np.inf)
        g = int(np.argmax(rel))
        filled[g] += len(w)
        group_of[w.word_id] = g

    members = {name: [] for name in GROUPS}
    for w in words:
        members[GROUPS[group_of[w.word_id]]].append(w.word_id)
    counts = {GROUPS[g]: int(filled[g]) for g in range(3)}
    logger.info("split glyph counts %s (seed %d)", counts, seed)
    return SplitAssignment(
        train=tuple(members["train"]),
        validation=tuple(members["validation"]),
        test=tuple(members["test"]),
        seed=int(seed),
        ratios=ratios,
        glyph_counts=counts,
        whole_folds=whole,
    )


def group_words(data: LetterData, split: SplitAssignment, name: str) -> list:
    return [data.word(wid) for wid in split.group(name)]


def group_glyphs(words: Iterable[WordSequence]) -> list:
    return [g for w in words for g in w.glyphs]
