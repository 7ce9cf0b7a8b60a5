"""Grids, masks, label masks, images and the primitives built on them.

Representations are plain numpy arrays:

* grid: 2D float64 array, finite
* mask: 2D bool array
* label mask: 2D uint8 array with 0 for background and class ids up to 254
* image: (rows, cols, 3) float64 array with channels in [0, 1]

The ``as_*`` helpers validate and normalise inputs; every other function in the
package assumes its arguments already passed through one of them.
"""

from __future__ import annotations

import numpy as np

MAX_CLASS_ID = 254
REC709 = np.array([0.2126, 0.7152, 0.0722])


class ShapeMismatch(ValueError):
    pass


def as_grid(values) -> np.ndarray:
    grid = np.asarray(values, dtype=np.float64)
    if grid.ndim != 2 or grid.shape[0] < 1 or grid.shape[1] < 1:
        raise ValueError(f"grid must be 2D with at least one row and column, got {grid.shape}")
    if not np.all(np.isfinite(grid)):
        raise ValueError("grid values must be finite")
    return grid


def as_mask(bits) -> np.ndarray:
    mask = np.asarray(bits)
    if mask.ndim != 2:
        raise ValueError(f"mask must be 2D, got {mask.shape}")
    return mask.astype(bool)


def as_labels(labels) -> np.ndarray:
    arr = np.asarray(labels)
    if arr.ndim != 2:
        raise ValueError(f"label mask must be 2D, got {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() > MAX_CLASS_ID):
        raise ValueError(f"labels must lie in [0, {MAX_CLASS_ID}]")
    return arr.astype(np.uint8)


def as_image(pixels) -> np.ndarray:
    img = np.asarray(pixels, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"image must have shape (rows, cols, 3), got {img.shape}")
    if not np.all(np.isfinite(img)) or img.min(initial=0.0) < 0.0 or img.max(initial=0.0) > 1.0:
        raise ValueError("image channels must be finite and within [0, 1]")
    return img


def check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[:2] != b.shape[:2]:
        raise ShapeMismatch(f"shape mismatch: {a.shape[:2]} vs {b.shape[:2]}")


def mask_iou(a, b) -> float:
    """Intersection over union of two same-shape masks.

    Two empty masks agree perfectly and score 1.0.
    """
    a = as_mask(a)
    b = as_mask(b)
    check_same_shape(a, b)
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def luminance(img) -> np.ndarray:
    """Rec. 709 relative luminance per pixel."""
    img = as_image(img)
    return np.clip(img @ REC709, 0.0, 1.0)


def _bilinear_axis(src: int, dst: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Half-pixel centres: output i samples source coordinate (i + 0.5) * src / dst - 0.5.
    x = (np.arange(dst) + 0.5) * (src / dst) - 0.5
    x = np.clip(x, 0.0, src - 1)
    lo = np.floor(x).astype(np.int64)
    hi = np.minimum(lo + 1, src - 1)
    return lo, hi, x - lo


def resize_bilinear(arr: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Bilinear resize of the two leading axes with half-pixel alignment and edge clamping."""
    arr = np.asarray(arr, dtype=np.float64)
    r0, r1, fr = _bilinear_axis(arr.shape[0], rows)
    c0, c1, fc = _bilinear_axis(arr.shape[1], cols)
    extra = (1,) * (arr.ndim - 2)
    fr = fr.reshape((-1, 1) + extra)
    fc = fc.reshape((1, -1) + extra)
    top = arr[r0][:, c0] * (1 - fc) + arr[r0][:, c1] * fc
    bottom = arr[r1][:, c0] * (1 - fc) + arr[r1][:, c1] * fc
    return top * (1 - fr) + bottom * fr


def resize_nearest(arr: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Nearest-neighbour resize of the two leading axes (preserves dtype and binarity)."""
    arr = np.asarray(arr)
    ri = np.minimum(((np.arange(rows) + 0.5) * arr.shape[0] / rows).astype(np.int64), arr.shape[0] - 1)
    ci = np.minimum(((np.arange(cols) + 0.5) * arr.shape[1] / cols).astype(np.int64), arr.shape[1] - 1)
    return arr[ri][:, ci]
