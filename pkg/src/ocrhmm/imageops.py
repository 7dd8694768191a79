"""Binary glyph analysis: moments, ellipse, deslanting, topology, counts.

Coordinates follow the image: ``x`` is the column (1..8), ``y`` the row
(1..16) growing downwards.  Orientation is reported in the mathematical
sense (counter-clockwise from the horizontal), so ``y`` is flipped before
the angle is taken.  Axis lengths are ``4 * sqrt(eigenvalue)`` of the pixel
coordinate covariance.

All functions take a single ``(16, 8)`` bitmap; the ``*_batch`` variants
take an ``(N, 16, 8)`` stack and are what feature extraction uses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

ROWS, COLS = 16, 8


class EmptyRegionError(ValueError):
    pass


@dataclass(frozen=True)
class EllipseStats:
    centroid_x: float
    centroid_y: float
    orientation: float  # degrees in (-90, 90]
    major_axis: float
    minor_axis: float
    eccentricity: float


@dataclass(frozen=True)
class RegionStats:
    object_count: int
    hole_count: int
    perimeter: int
    quadrant_counts: tuple
    active_pixels: int


def _as_stack(bitmaps):
    arr = np.asarray(bitmaps)
    if arr.ndim == 2:
        arr = arr[None]
    return (arr != 0).astype(np.uint8)


def raw_moments_batch(stack):
    """Integer sums ``n, Sx, Sy, Sxx, Syy, Sxy`` per bitmap."""
    stack = _as_stack(stack).astype(np.int64)
    rows, cols = stack.shape[1:]
    y = np.arange(1, rows + 1)[:, None]
    x = np.arange(1, cols + 1)[None, :]
    n = stack.sum(axis=(1, 2))
    sx = (stack * x).sum(axis=(1, 2))
    sy = (stack * y).sum(axis=(1, 2))
    sxx = (stack * x * x).sum(axis=(1, 2))
    syy = (stack * y * y).sum(axis=(1, 2))
    sxy = (stack * x * y).sum(axis=(1, 2))
    return n, sx, sy, sxx, syy, sxy


def central_moments_batch(stack):
    """Centroid and normalised central moments ``mu20, mu02, mu11``.

    Each value is a single division of exact integers, e.g.
    ``mu20 = (n*Sxx - Sx**2) / n**2``, so it is the correctly rounded
    value of the exact rational moment.  Empty bitmaps give NaN.
    """
    n, sx, sy, sxx, syy, sxy = raw_moments_batch(stack)
    n2 = n * n
    with np.errstate(invalid="ignore", divide="ignore"):
        cx = sx / n
        cy = sy / n
        mu20 = (n * sxx - sx * sx) / n2
        mu02 = (n * syy - sy * sy) / n2
        mu11 = (n * sxy - sx * sy) / n2
    return n, cx, cy, mu20, mu02, mu11


def ellipse_from_moments(cx, cy, mu20, mu02, mu11):
    """Ellipse statistics from (arrays of) central moments."""
    mu20, mu02, mu11 = np.asarray(mu20), np.asarray(mu02), np.asarray(mu11)
    # flip y to mathematical orientation
    two_mu11 = -2.0 * mu11
    spread = mu20 - mu02
    orient = 0.5 * np.degrees(np.arctan2(two_mu11, spread))
    orient = np.where((two_mu11 == 0) & (spread == 0), 0.0, orient)
    orient = np.where(orient <= -90.0, orient + 180.0, orient) + 0.0  # no -0.0
    mean = 0.5 * (mu20 + mu02)
    root = np.sqrt(0.25 * spread * spread + mu11 * mu11)
    lam1 = mean + root
    lam2 = np.maximum(mean - root, 0.0)
    major = 4.0 * np.sqrt(lam1)
    minor = 4.0 * np.sqrt(lam2)
    with np.errstate(invalid="ignore", divide="ignore"):
        ecc = np.where(lam1 > 0, np.sqrt(np.clip(1.0 - lam2 / lam1, 0.0, 1.0)), 0.0)
    return orient, major, minor, ecc


def ellipse_stats_batch(stack):
    """Arrays ``(cx, cy, orientation, major, minor, eccentricity)``; NaN for empty glyphs."""
    n, cx, cy, mu20, mu02, mu11 = central_moments_batch(stack)
    orient, major, minor, ecc = ellipse_from_moments(cx, cy, mu20, mu02, mu11)
    return cx, cy, orient, major, minor, ecc


def ellipse_stats(bitmap) -> EllipseStats:
    stack = _as_stack(bitmap)
    if not stack.any():
        raise EmptyRegionError("bitmap has no active pixels")
    vals = [float(v[0]) for v in ellipse_stats_batch(stack)]
    return EllipseStats(*vals)


def rotate_upright_batch(stack, orientations):
    """Rotate each bitmap by ``90 - orientation`` degrees about its centroid.

    Inverse mapping with nearest-neighbour sampling; source pixels outside
    the frame read as background.  Empty bitmaps pass through unchanged.
    """
    stack = _as_stack(stack)
    n, rows, cols = stack.shape
    out = np.zeros_like(stack)
    counts, cx, cy, *_ = central_moments_batch(stack)
    theta = np.radians(90.0 - np.asarray(orientations, dtype=np.float64))
    theta = np.broadcast_to(theta, (n,))
    yy, xx = np.mgrid[1 : rows + 1, 1 : cols + 1]
    for k in range(n):
        if counts[k] == 0 or theta[k] == 0.0:
            out[k] = stack[k]
            continue
        c, s = np.cos(theta[k]), np.sin(theta[k])
        dx = xx - cx[k]
        dy = cy[k] - yy  # mathematical (upward) offset
        sx = cx[k] + c * dx + s * dy
        sy = cy[k] - (-s * dx + c * dy)
        # snap away float noise so exact half-pixel positions round the same way
        sx = np.floor(np.round(sx, 9) + 0.5).astype(np.int64)
        sy = np.floor(np.round(sy, 9) + 0.5).astype(np.int64)
        ok = (sx >= 1) & (sx <= cols) & (sy >= 1) & (sy <= rows)
        plane = np.zeros((rows, cols), dtype=np.uint8)
        plane[ok] = stack[k][sy[ok] - 1, sx[ok] - 1]
        out[k] = plane
    return out


def rotate_upright(bitmap, orientation: float):
    return rotate_upright_batch(bitmap, [orientation])[0]


def deslant_batch(stack):
    """Rotate every glyph so its major axis points up."""
    _, _, orient, *_ = ellipse_stats_batch(stack)
    return rotate_upright_batch(stack, np.nan_to_num(orient, nan=90.0))


def connected_objects_batch(stack, connectivity=8):
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    return kernels.count_components(np.ascontiguousarray(_as_stack(stack)), connectivity)


def connected_objects(bitmap, connectivity=8) -> int:
    return int(connected_objects_batch(bitmap, connectivity)[0])


def count_holes_batch(stack):
    stack = _as_stack(stack)
    padded = np.pad(stack, ((0, 0), (1, 1), (1, 1)), constant_values=0)
    background = np.ascontiguousarray(1 - padded)
    return kernels.count_components(background, 4) - 1


def count_holes(bitmap) -> int:
    return int(count_holes_batch(bitmap)[0])


def perimeter_batch(stack):
    """Unit edges between foreground and 4-neighbour background (frame counts as background)."""
    stack = _as_stack(stack).astype(np.int64)
    p = np.pad(stack, ((0, 0), (1, 1), (1, 1)), constant_values=0)
    core = p[:, 1:-1, 1:-1]
    edges = 0
    for nb in (p[:, :-2, 1:-1], p[:, 2:, 1:-1], p[:, 1:-1, :-2], p[:, 1:-1, 2:]):
        edges = edges + (core * (1 - nb)).sum(axis=(1, 2))
    return edges


def perimeter_length(bitmap) -> int:
    return int(perimeter_batch(bitmap)[0])


def quadrant_counts_batch(stack):
    """``(N, 4)`` active-pixel counts: top-left, top-right, bottom-left, bottom-right."""
    stack = _as_stack(stack).astype(np.int64)
    rows, cols = stack.shape[1:]
    hr, hc = rows // 2, cols // 2
    return np.stack(
        [
            stack[:, :hr, :hc].sum(axis=(1, 2)),
            stack[:, :hr, hc:].sum(axis=(1, 2)),
            stack[:, hr:, :hc].sum(axis=(1, 2)),
            stack[:, hr:, hc:].sum(axis=(1, 2)),
        ],
        axis=1,
    )


def quadrant_counts(bitmap) -> tuple:
    return tuple(int(v) for v in quadrant_counts_batch(bitmap)[0])


def region_stats(bitmap) -> RegionStats:
    stack = _as_stack(bitmap)
    return RegionStats(
        object_count=connected_objects(stack),
        hole_count=count_holes(stack),
        perimeter=perimeter_length(stack),
        quadrant_counts=quadrant_counts(stack),
        active_pixels=int(stack.sum()),
    )


def render(bitmap) -> str:
    """Rows of ``.``/``#``, handy when writing fixtures."""
    arr = np.asarray(bitmap).reshape(ROWS, -1) if np.asarray(bitmap).ndim == 1 else np.asarray(bitmap)
    return "\n".join("".join("#" if v else "." for v in row) for row in arr)


def parse_render(text) -> np.ndarray:
    rows = [line.strip() for line in text.strip().splitlines()]
    return np.array([[1 if ch == "#" else 0 for ch in row] for row in rows], dtype=np.uint8)
