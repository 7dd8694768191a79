#!/usr/bin/env python
"""Build ``data/letter.data.gz`` in the public tab-separated layout.

The original download host for the OCR letter corpus is often unreachable.
The same corpus (6877 words, 52152 letters, 10 folds) ships as a pickle in
the ``pystruct`` 0.3.1 source distribution on PyPI; this script downloads
that archive, checks its hash and rewrites the corpus as a letter file with
sequential glyph ids and word ids.

    python scripts/fetch_letter_data.py [--out data/letter.data.gz]
    python scripts/fetch_letter_data.py --from-sdist pystruct-0.3.1.tar.gz
"""

import argparse
import gzip
import hashlib
import io
import pickle
import sys
import tarfile
import urllib.request
from pathlib import Path

import numpy as np

from ocrhmm.dataset import Glyph, ROWS, COLS, write_dataset

SDIST_URL = (
    "https://files.pythonhosted.org/packages/da/45/"
    "f689ba996b6ee626f38cdf13cadc5d85a99eb0f3b9bac9846c9fdd8a7c23/pystruct-0.3.1.tar.gz"
)
SDIST_SHA256 = "e16f30cf7a07877c609115f059c673fbef2efdb34e6decafe8814705929754ce"
MEMBER = "pystruct-0.3.1/pystruct/datasets/letters.pickle"


def read_sdist(blob):
    digest = hashlib.sha256(blob).hexdigest()
    if digest != SDIST_SHA256:
        sys.exit(f"sha256 mismatch: {digest}")
    with tarfile.open(fileobj=io.BytesIO(blob), mode="r:gz") as tar:
        raw = tar.extractfile(MEMBER).read()
    return pickle.loads(raw, encoding="latin1")


def to_glyphs(corpus):
    glyphs = []
    gid = 1
    for word_index, (labels, pixels, fold) in enumerate(
        zip(corpus["labels"], corpus["data"], corpus["folds"]), start=1
    ):
        n = len(labels)
        for pos in range(n):
            bitmap = np.asarray(pixels[pos], dtype=np.uint8).reshape(ROWS, COLS)
            glyphs.append(
                Glyph(
                    id=gid,
                    letter=int(labels[pos]),
                    next_id=gid + 1 if pos < n - 1 else None,
                    word_id=word_index,
                    position=pos + 1,
                    fold=int(fold),
                    bitmap=bitmap,
                )
            )
            gid += 1
    return glyphs


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="data/letter.data.gz")
    ap.add_argument("--from-sdist", help="use a local copy of the pystruct sdist")
    args = ap.parse_args(argv)

    if args.from_sdist:
        blob = Path(args.from_sdist).read_bytes()
    else:
        print(f"downloading {SDIST_URL}", file=sys.stderr)
        with urllib.request.urlopen(SDIST_URL, timeout=120) as resp:
            blob = resp.read()
    glyphs = to_glyphs(read_sdist(blob))

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    # mtime=0 keeps the archive byte-stable across rebuilds
    with open(out, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as gz:
        with io.TextIOWrapper(gz, encoding="ascii", newline="\n") as text:
            write_dataset(glyphs, text)
    print(f"wrote {len(glyphs)} glyphs to {out}", file=sys.stderr)


if __name__ == "__main__":
    main()
