"""Foreground placement: box parameterization, loss family, search and weight balancing.

Placements are ``(cx, cy, w, h)`` in coordinates normalized to the background
extent. The learned placement network of the original pipeline is replaced by
direct derivative-free minimization of the composite loss.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .grid import ShapeMismatch, luminance

PLAUSIBILITY_FLOOR = 0.01
MIN_STEP = 1e-4


@dataclass(frozen=True)
class PlacementParams:
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"placement sizes must be positive, got w={self.w}, h={self.h}")

    def as_array(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.w, self.h], dtype=np.float64)

    @classmethod
    def from_array(cls, v) -> "PlacementParams":
        return cls(*(float(x) for x in v))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LossWeights:
    lambda_iou: float = 1.0
    lambda_center: float = 1.0
    lambda_ar: float = 1.0
    lambda1: float = 1.0 / 3.0
    lambda2: float = 1.0 / 3.0
    lambda3: float = 1.0 / 3.0

    def __post_init__(self):
        vals = (self.lambda_iou, self.lambda_center, self.lambda_ar, self.lambda1, self.lambda2, self.lambda3)
        if any(v < 0 for v in vals):
            raise ValueError("loss weights must be non-negative")
        if abs(self.lambda1 + self.lambda2 + self.lambda3 - 1.0) > 1e-9:
            raise ValueError("outer weights lambda1..lambda3 must sum to 1")

    @property
    def outer(self) -> tuple[float, float, float]:
        return (self.lambda1, self.lambda2, self.lambda3)

    def with_outer(self, outer: Sequence[float]) -> "LossWeights":
        l1, l2, l3 = outer
        return replace(self, lambda1=l1, lambda2=l2, lambda3=l3)


def _edges(p: PlacementParams) -> tuple[float, float, float, float]:
    return p.cx - p.w / 2, p.cx + p.w / 2, p.cy - p.h / 2, p.cy + p.h / 2


def box_iou(p: PlacementParams, q: PlacementParams) -> float:
    # Areas from the same edge arithmetic as the overlap, so identical boxes score exactly 1.
    px0, px1, py0, py1 = _edges(p)
    qx0, qx1, qy0, qy1 = _edges(q)
    inter = max(0.0, min(px1, qx1) - max(px0, qx0)) * max(0.0, min(py1, qy1) - max(py0, qy0))
    union = (px1 - px0) * (py1 - py0) + (qx1 - qx0) * (qy1 - qy0) - inter
    return inter / union


def spatial_loss(p: PlacementParams, p_true: PlacementParams, weights: LossWeights, mode: str = "corrected") -> float:
    """Overlap + relative centre error + aspect-ratio angle error.

    ``mode="paper-literal"`` keeps the printed ``1 - (centre error)`` term, which
    equals ``lambda_center`` at the ground truth and decreases as the centre drifts.
    ``mode="corrected"`` penalizes the centre error directly.
    """
    if p_true.cx == 0 or p_true.cy == 0:
        raise ValueError("relative centre error is undefined for a zero true centre coordinate")
    centre = abs(p.cx - p_true.cx) / p_true.cx + abs(p.cy - p_true.cy) / p_true.cy
    if mode == "corrected":
        centre_term = centre
    elif mode == "paper-literal":
        centre_term = 1.0 - centre
    else:
        raise ValueError(f"unknown spatial loss mode {mode!r}")
    ar = abs(math.atan(p.w / p.h) - math.atan(p_true.w / p_true.h))
    return (
        weights.lambda_iou * (1.0 - box_iou(p, p_true))
        + weights.lambda_center * centre_term
        + weights.lambda_ar * ar
    )


def _as_features(f) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    return f[:, :, None] if f.ndim == 2 else f


def semantic_loss(f_out, f_com) -> float:
    """Sum over pixels of squared feature-vector distance."""
    a, b = _as_features(f_out), _as_features(f_com)
    if a.shape != b.shape:
        raise ShapeMismatch(f"feature maps differ in shape: {a.shape} vs {b.shape}")
    return float(np.sum((a - b) ** 2))


def heatmap_loss(h_pred, h_true) -> float:
    a = np.asarray(h_pred, dtype=np.float64)
    b = np.asarray(h_true, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"heatmaps differ in shape: {a.shape} vs {b.shape}")
    return float(np.sum((a - b) ** 2))


def total_loss(components: Sequence[float], weights: LossWeights) -> float:
    s, m, h = components
    return weights.lambda1 * s + weights.lambda2 * m + weights.lambda3 * h


def features(img) -> np.ndarray:
    """Per-pixel (R, G, B, d lum / d col, d lum / d row) feature vectors."""
    img = np.asarray(img, dtype=np.float64)
    lum = luminance(img)
    gy, gx = np.gradient(lum) if min(lum.shape) > 1 else (np.zeros_like(lum), np.zeros_like(lum))
    return np.concatenate([img, gx[:, :, None], gy[:, :, None]], axis=2)


def render_heatmap(p: PlacementParams, rows: int, cols: int) -> np.ndarray:
    """Gaussian placement heatmap centred on the box with sigma equal to half its size."""
    y = (np.arange(rows) + 0.5) / rows
    x = (np.arange(cols) + 0.5) / cols
    gy = np.exp(-0.5 * ((y - p.cy) / (p.h / 2)) ** 2)
    gx = np.exp(-0.5 * ((x - p.cx) / (p.w / 2)) ** 2)
    return np.outer(gy, gx)


@dataclass(frozen=True)
class GridSpec:
    lower: tuple[float, float, float, float] = (0.0, 0.0, 0.05, 0.05)
    upper: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    counts: tuple[int, int, int, int] = (16, 16, 8, 8)

    def __post_init__(self):
        if any(c < 1 for c in self.counts):
            raise ValueError("grid counts must be >= 1")
        if any(lo > hi for lo, hi in zip(self.lower, self.upper)) or min(self.lower[2:]) <= 0:
            raise ValueError("grid bounds must be ordered with positive size bounds")

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, n) for lo, hi, n in zip(self.lower, self.upper, self.counts)]

    def spacing(self) -> np.ndarray:
        return np.array(
            [(hi - lo) / (n - 1) if n > 1 else (hi - lo) for lo, hi, n in zip(self.lower, self.upper, self.counts)]
        )


Objective = Callable[[PlacementParams], float]


def _eval(objective: Objective, v: np.ndarray) -> float:
    val = float(objective(PlacementParams.from_array(v)))
    return val if math.isfinite(val) else math.inf


def optimize_placement(objective: Objective, grid: GridSpec = GridSpec(), refine_steps: int = 64) -> PlacementParams:
    """Coarse grid scan followed by coordinate descent with step halving.

    The first grid point (in cx, cy, w, h lexicographic order) wins ties; refinement
    only moves on strict improvement, so the result is never worse than the grid best.
    """
    best_v, best_f = None, math.inf
    for point in itertools.product(*grid.axes()):
        v = np.array(point)
        f = _eval(objective, v)
        if f < best_f:
            best_v, best_f = v, f
    if best_v is None:
        raise ValueError("objective is non-finite on the entire coarse grid")

    lower, upper = np.array(grid.lower), np.array(grid.upper)
    step = np.maximum(grid.spacing() / 2, MIN_STEP)
    for _ in range(refine_steps):
        if step.max() < MIN_STEP:
            break
        improved = False
        for k in range(4):
            if step[k] < MIN_STEP or lower[k] == upper[k]:
                continue
            for sign in (1.0, -1.0):
                cand = best_v.copy()
                cand[k] = np.clip(cand[k] + sign * step[k], lower[k], upper[k])
                if cand[k] == best_v[k]:
                    continue
                f = _eval(objective, cand)
                if f < best_f:
                    best_v, best_f, improved = cand, f, True
                    break
        if not improved:
            step = step / 2
    return PlacementParams.from_array(best_v)


def finite_diff_grad(objective: Objective, p: PlacementParams, h: float = 1e-5) -> np.ndarray:
    if h <= 0:
        raise ValueError("step h must be positive")
    v = p.as_array()
    g = np.zeros(4)
    for k in range(4):
        e = np.zeros(4)
        e[k] = h
        fp = float(objective(PlacementParams.from_array(v + e)))
        fm = float(objective(PlacementParams.from_array(v - e)))
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise ValueError(f"non-finite objective near {p} along coordinate {k}")
        g[k] = (fp - fm) / (2 * h)
    return g


def balance_from_norms(norms: Sequence[float], iters: int = 10, start: Sequence[float] | None = None) -> tuple:
    """Rescale weights until every ``lambda_i * norm_i`` is equal, keeping the sum at 1."""
    norms = np.asarray(norms, dtype=np.float64)
    if np.any(norms <= 0) or not np.all(np.isfinite(norms)):
        raise ValueError(f"gradient norms must be positive and finite, got {norms}")
    lam = np.full(len(norms), 1.0 / len(norms)) if start is None else np.asarray(start, dtype=np.float64)
    for _ in range(max(1, iters)):
        contrib = lam * norms
        lam = lam * (contrib.mean() / contrib)
        lam = lam / lam.sum()
    return tuple(float(x) for x in lam)


def balance_weights(loss_fns: Sequence[Objective], p: PlacementParams, iters: int = 10, h: float = 1e-5) -> tuple:
    """Outer weights inversely proportional to each loss's gradient norm at ``p``."""
    if len(loss_fns) != 3:
        raise ValueError("expected three loss functions (spatial, semantic, heatmap)")
    norms = [float(np.linalg.norm(finite_diff_grad(fn, p, h))) for fn in loss_fns]
    if min(norms) == 0.0:
        raise ValueError(f"a loss has a vanishing gradient at {p}: norms={norms}")
    return balance_from_norms(norms, iters)


def plausibility(iou_with_gt: float, size_ratio: float, lighting_diff: float, floor: float = PLAUSIBILITY_FLOOR) -> float:
    return iou_with_gt / max(size_ratio + lighting_diff, floor)
