"""IoU of a binarized attention map under a per-pixel alignment model.

A pixel is foreground with probability ``p``; the binarized map fires with
probability ``alpha`` on foreground pixels and ``beta`` on background pixels.
Expected intersection and union then give ``alpha p / (p + beta (1 - p))``.

The published lower bound ``(2 alpha - 1) / (alpha + beta)`` is implemented for
comparison. It is *not* the p -> 0 limit of the closed form (that limit is 0),
so only the closed form is treated as ground truth.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .rng import SplitMix64


@dataclass(frozen=True)
class AlignmentModel:
    alpha: float
    beta: float
    p: float

    def __post_init__(self):
        for name in ("alpha", "beta", "p"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be a probability, got {v}")


@dataclass(frozen=True)
class ThresholdCurve:
    taus: Sequence[float]
    alpha_of_tau: Sequence[float]
    beta_of_tau: Sequence[float]

    def __post_init__(self):
        if not len(self.taus) == len(self.alpha_of_tau) == len(self.beta_of_tau):
            raise ValueError("threshold curve columns must have equal length")
        if list(self.taus) != sorted(self.taus):
            raise ValueError("taus must be sorted")


def analytic_iou(model: AlignmentModel) -> float:
    denom = model.p + model.beta * (1.0 - model.p)
    if denom == 0.0:
        return math.nan
    return model.alpha * model.p / denom


def analytic_limit_p0(alpha: float, beta: float) -> float:
    """lim_{p->0+} of the closed form: 0 whenever beta > 0, alpha when beta == 0."""
    return 0.0 if beta > 0 else alpha


def paper_lower_bound(alpha: float, beta: float) -> float:
    if alpha <= 0.5:
        raise ValueError(f"bound requires alpha > 0.5, got {alpha}")
    return (2.0 * alpha - 1.0) / (alpha + beta)


def simulate_bound(model: AlignmentModel, n_pixels: int, seed: int) -> float:
    """Empirical IoU over ``n_pixels`` independent pixels; NaN when the union is empty."""
    if n_pixels < 1:
        raise ValueError("n_pixels must be >= 1")
    rng = SplitMix64(seed)
    truth = rng.random(n_pixels) < model.p
    u = rng.random(n_pixels)
    pred = np.where(truth, u < model.alpha, u < model.beta)
    union = np.count_nonzero(truth | pred)
    if union == 0:
        return math.nan
    return np.count_nonzero(truth & pred) / union


def empirical_variance_bound(model: AlignmentModel, n_pixels: int, seed: int, batches: int = 20) -> float:
    """Variance of the IoU estimator at ``n_pixels``, estimated from independent batches.

    The batch-IoU variance at size n/batches is rescaled by 1/batches.
    """
    size = max(1, n_pixels // batches)
    rng = SplitMix64(seed)
    vals = [simulate_bound(model, size, int(rng.next_u64(1)[0])) for _ in range(batches)]
    return float(np.var(vals, ddof=1)) / batches


def optimal_tau(curve: ThresholdCurve, p: float) -> tuple[float, float]:
    if len(curve.taus) == 0:
        raise ValueError("threshold curve is empty")
    if not 0.0 < p < 1.0:
        raise ValueError("p must be in (0, 1)")
    best_tau, best_iou = None, -math.inf
    for tau, a, b in zip(curve.taus, curve.alpha_of_tau, curve.beta_of_tau):
        iou = analytic_iou(AlignmentModel(a, b, p))
        if iou > best_iou:
            best_tau, best_iou = tau, iou
    return best_tau, best_iou


def curve_from_samples(scores: np.ndarray, truth: np.ndarray, taus: Sequence[float]) -> ThresholdCurve:
    """Tabulate alpha(tau) and beta(tau) from a score grid and its true mask."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=bool).ravel()
    pos, neg = scores[truth], scores[~truth]
    taus = sorted(float(t) for t in taus)
    alphas = [float(np.mean(pos >= t)) if pos.size else 0.0 for t in taus]
    betas = [float(np.mean(neg >= t)) if neg.size else 0.0 for t in taus]
    return ThresholdCurve(taus, alphas, betas)


CSV_COLUMNS = ["alpha", "beta", "p", "analytic_iou", "empirical_iou", "paper_bound", "n_pixels", "seed"]


def verification_rows(triples: Iterable[tuple[float, float, float]], n_pixels: int, seed: int) -> list[dict]:
    rows = []
    for i, (a, b, p) in enumerate(triples):
        model = AlignmentModel(a, b, p)
        run_seed = seed + i
        rows.append(
            {
                "alpha": a,
                "beta": b,
                "p": p,
                "analytic_iou": analytic_iou(model),
                "empirical_iou": simulate_bound(model, n_pixels, run_seed),
                "paper_bound": paper_lower_bound(a, b) if a > 0.5 else math.nan,
                "n_pixels": n_pixels,
                "seed": run_seed,
            }
        )
    return rows


def discrepancy_report(pairs: Iterable[tuple[float, float]]) -> list[dict]:
    """Per (alpha, beta): the closed form's p->0 limit next to the published bound."""
    out = []
    for a, b in pairs:
        out.append(
            {
                "alpha": a,
                "beta": b,
                "analytic_limit_p0": analytic_limit_p0(a, b),
                "paper_claimed_limit": paper_lower_bound(a, b) if a > 0.5 else math.nan,
            }
        )
    return out


def write_csv(path, rows: list[dict], columns: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
