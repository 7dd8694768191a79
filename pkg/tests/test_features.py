import io
import logging

import numpy as np
import pytest

from ocrhmm import imageops
from ocrhmm.dataset import Glyph
from ocrhmm.features import (
    DIMENSIONS,
    SCALAR_NAMES,
    FeatureSetId,
    GlyphFeatureCache,
    extract_features,
    scalar_table,
    standardize,
    write_feature_csv,
)

from conftest import make_glyphs


def _glyph(bitmap, gid=1):
    return Glyph(gid, 0, None, 1, 1, 0, bitmap.astype(np.uint8))


def test_dimensions():
    glyphs = make_glyphs([("hello", 0)])
    for tag, dim in DIMENSIONS.items():
        m = extract_features(glyphs, tag)
        assert m.rows.shape == (5, dim) and m.set.dimension == dim
    assert DIMENSIONS["e"] == 141


def test_unknown_set():
    with pytest.raises(ValueError):
        FeatureSetId("z")


def test_set_f_is_raw_pixels():
    glyphs = make_glyphs([("abc", 0)], seed=9)
    m = extract_features(glyphs, "f")
    np.testing.assert_array_equal(m.rows, np.stack([g.bitmap.ravel() for g in glyphs]))


def test_set_b_on_ring():
    b = np.zeros((16, 8))
    b[6:9, 2:5] = 1
    b[7, 3] = 0
    row = extract_features([_glyph(b)], "b").rows[0]
    s = imageops.ellipse_stats(b)
    assert list(row) == [s.centroid_x, s.centroid_y, s.eccentricity, 1, 1]


def test_nested_prefixes_and_deslanted_sets():
    glyphs = make_glyphs([("words", 1)], seed=2)
    d = extract_features(glyphs, "d").rows
    for tag in "abc":
        np.testing.assert_array_equal(extract_features(glyphs, tag).rows, d[:, : DIMENSIONS[tag]])
    cache = GlyphFeatureCache()
    g = extract_features(glyphs, "g", cache).rows
    e = extract_features(glyphs, "e", cache).rows
    h = extract_features(glyphs, "h", cache).rows
    np.testing.assert_array_equal(e[:, :13], scalar_table(np.stack([x.bitmap for x in glyphs])))
    np.testing.assert_array_equal(e[:, 13:], g)
    np.testing.assert_array_equal(h[:, :128], g)
    orient = h[:, 128]
    assert np.all((orient >= 0) & (orient < 180))
    for x, row in zip(glyphs, g):
        s = imageops.ellipse_stats(x.bitmap)
        np.testing.assert_array_equal(row, imageops.rotate_upright(x.bitmap, s.orientation).ravel())


def test_scalar_order():
    assert SCALAR_NAMES[:5] == ("centroid_x", "centroid_y", "eccentricity", "hole_count", "object_count")
    assert len(SCALAR_NAMES) == 13


def test_empty_glyph_becomes_zero_row(caplog):
    glyphs = [_glyph(np.zeros((16, 8))), *make_glyphs([("a", 0)], next_id_start=2)]
    with caplog.at_level(logging.WARNING):
        m = extract_features(glyphs, "e")
    assert not m.rows[0].any() and np.isfinite(m.rows).all()
    assert "empty glyph" in caplog.text


def test_standardize_uses_train_statistics():
    train = np.array([[0.0, 5.0], [2.0, 5.0]])
    test = np.array([[4.0, 6.0]])
    a, b = standardize(train, test)
    np.testing.assert_allclose(a, [[-1, 0], [1, 0]])
    np.testing.assert_allclose(b, [[3, 1]])


def test_feature_csv():
    glyphs = make_glyphs([("ab", 0)])
    buf = io.StringIO()
    write_feature_csv(extract_features(glyphs, "a"), glyphs, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "glyph_id,letter,word_id,f1,f2,f3"
    assert lines[1].startswith("1,a,1,")
