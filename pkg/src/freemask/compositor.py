"""Paste foreground assets into scenes with occlusion-overwrite label semantics."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .grid import MAX_CLASS_ID, as_image, as_labels, as_mask, check_same_shape, luminance, resize_bilinear, resize_nearest
from .placement import PlacementParams

DEFAULT_TARGET_FRACTION = 0.1
COVERAGE_WARN = 0.9


class CoverageWarning(UserWarning):
    """A paste hid (almost) all of an existing object."""


@dataclass(frozen=True)
class ForegroundAsset:
    image: np.ndarray
    mask: np.ndarray
    class_id: int

    def __post_init__(self):
        img, mask = as_image(self.image), as_mask(self.mask)
        check_same_shape(img, mask)
        if not mask.any():
            raise ValueError("foreground mask is empty")
        if not 1 <= self.class_id <= MAX_CLASS_ID:
            raise ValueError(f"class_id must be in [1, {MAX_CLASS_ID}], got {self.class_id}")
        object.__setattr__(self, "image", img)
        object.__setattr__(self, "mask", mask)


@dataclass(frozen=True)
class Scene:
    image: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        img, labels = as_image(self.image), as_labels(self.labels)
        check_same_shape(img, labels)
        object.__setattr__(self, "image", img)
        object.__setattr__(self, "labels", labels)

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    @classmethod
    def blank(cls, image) -> "Scene":
        img = as_image(image)
        return cls(img, np.zeros(img.shape[:2], dtype=np.uint8))


def _round(x: float) -> int:
    return int(math.floor(x + 0.5))


def box_pixels(p: PlacementParams, rows: int, cols: int) -> tuple[int, int, int, int]:
    """Pixel box ``(top, left, height, width)``; may extend past the scene bounds."""
    left = _round((p.cx - p.w / 2) * cols)
    right = _round((p.cx + p.w / 2) * cols)
    top = _round((p.cy - p.h / 2) * rows)
    bottom = _round((p.cy + p.h / 2) * rows)
    return top, left, max(1, bottom - top), max(1, right - left)


def placed_layers(asset: ForegroundAsset, p: PlacementParams, shape: tuple[int, int]):
    """Scene-sized (mask, rgb) of the asset scaled into ``p`` and clipped to the scene."""
    rows, cols = shape
    top, left, bh, bw = box_pixels(p, rows, cols)
    r0, r1 = max(top, 0), min(top + bh, rows)
    c0, c1 = max(left, 0), min(left + bw, cols)
    mask = np.zeros(shape, dtype=bool)
    rgb = np.zeros(shape + (3,))
    if r0 >= r1 or c0 >= c1:
        raise ValueError(f"placement {p} lies entirely outside the {rows}x{cols} scene")
    small_mask = resize_nearest(asset.mask, bh, bw)
    small_img = np.clip(resize_bilinear(asset.image, bh, bw), 0.0, 1.0)
    mask[r0:r1, c0:c1] = small_mask[r0 - top : r1 - top, c0 - left : c1 - left]
    rgb[r0:r1, c0:c1] = small_img[r0 - top : r1 - top, c0 - left : c1 - left]
    return mask, rgb


def place(scene: Scene, asset: ForegroundAsset, p: PlacementParams) -> Scene:
    """Return a new scene with the asset pasted; covered pixels take the asset's class."""
    mask, rgb = placed_layers(asset, p, scene.shape)
    if not mask.any():
        raise ValueError(f"no foreground pixel of the asset survives clipping at {p}")
    for c in np.unique(scene.labels[mask]):
        if c == 0 or c == asset.class_id:
            continue
        covered = np.count_nonzero(scene.labels[mask] == c) / np.count_nonzero(scene.labels == c)
        if covered >= COVERAGE_WARN:
            warnings.warn(f"paste of class {asset.class_id} covers {covered:.0%} of class {c}", CoverageWarning)
    image = scene.image.copy()
    labels = scene.labels.copy()
    image[mask] = rgb[mask]
    labels[mask] = asset.class_id
    return Scene(image, labels)


def harmonize_luminance(asset: ForegroundAsset, scene: Scene) -> tuple[ForegroundAsset, bool]:
    """Scale asset RGB so its masked mean luminance matches the scene mean.

    Returns ``(asset, flagged)``; a zero mean on either side leaves the asset unchanged
    and sets ``flagged``.
    """
    fg = float(luminance(asset.image)[asset.mask].mean())
    bg = float(luminance(scene.image).mean())
    if fg == 0.0 or bg == 0.0:
        return asset, True
    scaled = np.clip(asset.image * (bg / fg), 0.0, 1.0)
    return ForegroundAsset(scaled, asset.mask, asset.class_id), False


def size_ratio_from_areas(placed_area: float, scene_area: float, target_fraction: float = DEFAULT_TARGET_FRACTION) -> float:
    if placed_area <= 0:
        return math.inf
    return abs(math.log(placed_area / (target_fraction * scene_area)))


def size_ratio(asset: ForegroundAsset, p: PlacementParams, scene: Scene, target_fraction: float = DEFAULT_TARGET_FRACTION) -> float:
    mask, _ = placed_layers(asset, p, scene.shape)
    return size_ratio_from_areas(np.count_nonzero(mask), mask.size, target_fraction)


def lighting_diff(asset: ForegroundAsset, scene: Scene) -> float:
    fg = float(luminance(asset.image)[asset.mask].mean())
    return abs(fg - float(luminance(scene.image).mean()))
