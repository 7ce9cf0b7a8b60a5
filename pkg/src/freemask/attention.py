"""Cross-attention maps: computation, fusion, binarization and threshold selection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grid import as_grid, as_mask, check_same_shape, mask_iou, resize_bilinear

DEFAULT_TAU_GRID = tuple(round(0.05 * k, 2) for k in range(1, 20))


@dataclass(frozen=True)
class AttentionMap:
    """Non-negative scores of shape (rows, cols, token_count)."""

    scores: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        if s.ndim != 3 or min(s.shape) < 1:
            raise ValueError(f"attention scores must have shape (rows, cols, L>=1), got {s.shape}")
        if not np.all(np.isfinite(s)) or s.min() < 0:
            raise ValueError("attention scores must be finite and non-negative")
        object.__setattr__(self, "scores", s)

    @property
    def rows(self) -> int:
        return self.scores.shape[0]

    @property
    def cols(self) -> int:
        return self.scores.shape[1]

    @property
    def token_count(self) -> int:
        return self.scores.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.scores.shape

    def token(self, k: int) -> np.ndarray:
        return self.scores[:, :, k]


@dataclass(frozen=True)
class AttentionInputs:
    """Latent ``z`` (rows*cols x C), text embeddings ``x`` (L x d) and the two projections.

    ``w_q`` is C x d and ``w_k`` is d x d, so query-key products are (rows*cols) x L.
    ``scale`` is the feature dimensionality dividing the logits under a square root.
    """

    z: np.ndarray
    x: np.ndarray
    w_q: np.ndarray
    w_k: np.ndarray
    rows: int
    cols: int
    scale: float | None = None


def _softmax_last(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def compute_cross_attention(inputs: AttentionInputs) -> AttentionMap:
    z = np.atleast_2d(np.asarray(inputs.z, dtype=np.float64))
    x = np.atleast_2d(np.asarray(inputs.x, dtype=np.float64))
    w_q = np.atleast_2d(np.asarray(inputs.w_q, dtype=np.float64))
    w_k = np.atleast_2d(np.asarray(inputs.w_k, dtype=np.float64))
    d = x.shape[1] if inputs.scale is None else inputs.scale
    if d <= 0:
        raise ValueError("scale d must be positive")
    if z.shape[0] != inputs.rows * inputs.cols:
        raise ValueError(f"latent has {z.shape[0]} rows, expected {inputs.rows * inputs.cols}")
    if w_q.shape[0] != z.shape[1] or w_k.shape[0] != x.shape[1] or w_q.shape[1] != w_k.shape[1]:
        raise ValueError(
            f"projection shapes do not compose: z{z.shape} w_q{w_q.shape} x{x.shape} w_k{w_k.shape}"
        )
    q = z @ w_q
    k = x @ w_k
    probs = _softmax_last(q @ k.T / np.sqrt(d))
    return AttentionMap(probs.reshape(inputs.rows, inputs.cols, x.shape[0]))


def aggregate_maps(maps: Sequence[AttentionMap]) -> AttentionMap:
    """Element-wise mean, dividing by the number of maps actually supplied."""
    if len(maps) == 0:
        raise ValueError("cannot aggregate an empty list of maps")
    shape = maps[0].shape
    for m in maps[1:]:
        if m.shape != shape:
            raise ValueError(f"shape mismatch in aggregation: {m.shape} vs {shape}")
    total = np.zeros(shape)
    for m in maps:
        total += m.scores
    return AttentionMap(total / len(maps))


def upsample_to(amap: AttentionMap, rows: int, cols: int) -> AttentionMap:
    if rows < amap.rows or cols < amap.cols:
        raise ValueError(f"cannot downsample {amap.rows}x{amap.cols} to {rows}x{cols}")
    if (rows, cols) == (amap.rows, amap.cols):
        return amap
    return AttentionMap(resize_bilinear(amap.scores, rows, cols))


def fuse_resolutions(maps: Sequence[AttentionMap]) -> AttentionMap:
    """Upsample raw scores to the finest resolution present, then average."""
    if len(maps) == 0:
        raise ValueError("cannot fuse an empty list of maps")
    rows = max(m.rows for m in maps)
    cols = max(m.cols for m in maps)
    return aggregate_maps([upsample_to(m, rows, cols) for m in maps])


def binarize(token_grid, tau: float) -> np.ndarray:
    if not np.isfinite(tau):
        raise ValueError("threshold must be finite")
    return as_grid(token_grid) >= tau


def select_threshold(token_grid, reference, tau_grid: Sequence[float] = DEFAULT_TAU_GRID):
    """Return ``(tau_star, mask, iou)`` maximizing IoU against ``reference``.

    Ties go to the smallest threshold, i.e. the most inclusive mask.
    """
    grid = as_grid(token_grid)
    ref = as_mask(reference)
    check_same_shape(grid, ref)
    if len(tau_grid) == 0:
        raise ValueError("threshold grid is empty")
    best = None
    for tau in sorted(float(t) for t in tau_grid):
        mask = grid >= tau
        iou = mask_iou(mask, ref)
        if best is None or iou > best[2]:
            best = (tau, mask, iou)
    return best
