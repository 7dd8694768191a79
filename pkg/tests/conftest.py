import os
from pathlib import Path

import numpy as np
import pytest

from ocrhmm.dataset import ALPHABET, Glyph, LetterData, assemble_words, load_dataset

ROOT = Path(__file__).resolve().parents[1]
DATA = Path(os.environ.get("OCRHMM_DATA", ROOT / "data" / "letter.data.gz"))


def pytest_collection_modifyitems(config, items):
    if os.environ.get("OCRHMM_LONG") == "1":
        return
    skip = pytest.mark.skip(reason="long-running; set OCRHMM_LONG=1")
    for item in items:
        if "longrun" in item.keywords:
            item.add_marker(skip)


def make_glyphs(words, seed=0, next_id_start=1, noise=None):
    """Glyphs for ``[(text, fold), ...]``; ids run from ``next_id_start``.

    Bitmaps are random, or with ``noise`` set, a fixed per-letter template
    with that fraction of pixels flipped.
    """
    rng = np.random.default_rng(seed)
    templates = np.random.default_rng(99).random((26, 16, 8)) < 0.3
    glyphs = []
    gid = next_id_start
    for wid, (text, fold) in enumerate(words, start=1):
        for pos, ch in enumerate(text, start=1):
            last = pos == len(text)
            glyphs.append(
                Glyph(
                    id=gid,
                    letter=ALPHABET.index(ch),
                    next_id=None if last else gid + 1,
                    word_id=wid,
                    position=pos,
                    fold=fold,
                    bitmap=_bitmap(rng, templates, ch, noise),
                )
            )
            gid += 1
    return glyphs


def _bitmap(rng, templates, ch, noise):
    if noise is None:
        return (rng.random((16, 8)) < 0.3).astype(np.uint8)
    flip = rng.random((16, 8)) < noise
    return (templates[ALPHABET.index(ch)] ^ flip).astype(np.uint8)


# every letter appears; a few spellings repeat as in the real corpus
SPELLINGS = ("quick", "brown", "fox", "jumps", "over", "the", "lazy", "dog", "vexed", "wizard", "a")


def synthetic_words(n=90):
    return [(SPELLINGS[i % len(SPELLINGS)], i % 10) for i in range(n)]


def make_data(words, seed=0, noise=None):
    glyphs = make_glyphs(words, seed, noise=noise)
    return LetterData(glyphs=glyphs, words=assemble_words(glyphs))


@pytest.fixture(scope="session")
def full_data():
    if not DATA.exists():
        pytest.skip(f"{DATA} missing; run scripts/fetch_letter_data.py")
    return load_dataset(DATA)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def letter_file(tmp_path):
    from ocrhmm.dataset import write_dataset

    path = tmp_path / "letters.data"
    with open(path, "w") as fh:
        write_dataset(make_glyphs(synthetic_words(), seed=5, noise=0.08), fh)
    return path


def random_bitmaps(rng, n, density=0.35):
    return (rng.random((n, 16, 8)) < density).astype(np.uint8)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE, key=lambda n: (int(str(n).rstrip("b")), str(n))):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number!s:>3}: {'PASS' if passed else 'FAIL'}  {detail}")
