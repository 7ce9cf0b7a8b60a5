"""Adversarial iterative curation of generated segmentation samples.

Each round trains a segmenter on the current dataset, draws a fresh batch
from the generator, scores every new sample by the IoU between the
segmenter's prediction and the sample's pseudo-label, and keeps the top
``alpha`` fraction. The segmenter is a nearest-prototype pixel classifier
over (R, G, B, row, col) features, with the two position coordinates scaled
by ``POSITION_WEIGHT`` so color dominates; any object with ``predict(image)`` and a
matching trainer callable can stand in for it.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .grid import as_image, as_labels, check_same_shape
from .rng import SplitMix64

DEFAULT_ALPHA = 0.7
# Below sqrt(min palette distance^2 / 2) ~= 0.218, an exact palette color is always
# nearest its own prototype wherever the pixel sits.
POSITION_WEIGHT = 0.2


@dataclass(frozen=True)
class Sample:
    image: np.ndarray
    label: np.ndarray
    provenance: str = ""
    # Known quality, only set by oracle generators; the loop itself never reads it.
    quality: float | None = None

    def __post_init__(self):
        img, lab = as_image(self.image), as_labels(self.label)
        check_same_shape(img, lab)
        object.__setattr__(self, "image", img)
        object.__setattr__(self, "label", lab)


def pixel_features(image: np.ndarray, position_weight: float = POSITION_WEIGHT) -> np.ndarray:
    rows, cols = image.shape[:2]
    r = np.broadcast_to(position_weight * ((np.arange(rows) + 0.5) / rows)[:, None], (rows, cols))
    c = np.broadcast_to(position_weight * ((np.arange(cols) + 0.5) / cols)[None, :], (rows, cols))
    return np.concatenate([image.reshape(-1, 3), r.reshape(-1, 1), c.reshape(-1, 1)], axis=1)


@dataclass(frozen=True)
class PixelClassifier:
    class_ids: tuple[int, ...]
    prototypes: np.ndarray  # (n_classes, 5) in weighted feature space, rows ordered like class_ids
    position_weight: float = POSITION_WEIGHT

    def __post_init__(self):
        if len(self.class_ids) < 1 or self.prototypes.shape != (len(self.class_ids), 5):
            raise ValueError("classifier needs one 5-d prototype per class")
        if list(self.class_ids) != sorted(self.class_ids):
            raise ValueError("class ids must be sorted")

    def predict(self, image) -> np.ndarray:
        return predict(self, image)


def train_classifier(samples: Sequence[Sample], position_weight: float = POSITION_WEIGHT) -> PixelClassifier:
    if len(samples) == 0:
        raise ValueError("cannot train on an empty dataset")
    sums = np.zeros((256, 5))
    counts = np.zeros(256)
    for s in samples:
        feats = pixel_features(s.image, position_weight)
        lab = s.label.ravel()
        counts += np.bincount(lab, minlength=256)
        for k in range(5):
            sums[:, k] += np.bincount(lab, weights=feats[:, k], minlength=256)
    ids = np.flatnonzero(counts)
    return PixelClassifier(tuple(int(i) for i in ids), sums[ids] / counts[ids, None], position_weight)


def predict(classifier: PixelClassifier, image) -> np.ndarray:
    image = as_image(image)
    feats = pixel_features(image, classifier.position_weight)
    d2 = np.zeros((feats.shape[0], len(classifier.class_ids)))
    for j, proto in enumerate(classifier.prototypes):
        d2[:, j] = np.sum((feats - proto) ** 2, axis=1)
    # argmin returns the first minimum; class ids are sorted so ties go to the smaller id.
    ids = np.asarray(classifier.class_ids, dtype=np.uint8)
    return ids[np.argmin(d2, axis=1)].reshape(image.shape[:2])


def score_labels(pred: np.ndarray, pseudo: np.ndarray) -> float:
    """Mean per-class IoU over the classes present in ``pseudo``."""
    check_same_shape(pred, pseudo)
    ious = []
    for c in np.unique(pseudo):
        a, b = pred == c, pseudo == c
        ious.append(np.count_nonzero(a & b) / np.count_nonzero(a | b))
    return float(np.mean(ious))


def score_sample(classifier, sample: Sample) -> float:
    return score_labels(classifier.predict(sample.image), sample.label)


def retain_count(n: int, alpha: float) -> int:
    # Guard against alpha * n landing a hair above an integer (0.7 * 10 = 7.000000000000001).
    return min(n, max(1, math.ceil(round(alpha * n, 9))))


def retain_top(scored: Sequence[tuple[Sample, float]], alpha: float = DEFAULT_ALPHA):
    """Keep the ``ceil(alpha * n)`` best-scored entries in their original order.

    Ties at the cut go to the earlier index. Returns ``(retained, s_alpha)`` where
    ``s_alpha`` is the lowest retained score.
    """
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    if len(scored) == 0:
        raise ValueError("nothing to retain from an empty list")
    k = retain_count(len(scored), alpha)
    order = sorted(range(len(scored)), key=lambda i: (-scored[i][1], i))
    keep = sorted(order[:k])
    retained = [scored[i] for i in keep]
    return retained, min(s for _, s in retained)


@dataclass
class RoundRecord:
    round: int
    train_size: int
    generated: int
    retained: int
    s_alpha: float
    score_mean: float
    score_min: float
    score_max: float
    retained_mean: float


@dataclass
class CurationResult:
    dataset: list[Sample]
    classifier: PixelClassifier
    history: list[RoundRecord] = field(default_factory=list)

    def history_json(self) -> str:
        return json.dumps([asdict(r) for r in self.history], indent=2) + "\n"


Generator = Callable[[SplitMix64], list]
Scorer = Callable[[object, Sample], float]


def curate(
    generator: Generator,
    iterations: int,
    alpha: float = DEFAULT_ALPHA,
    seed: int = 0,
    accumulate: bool = True,
    scorer: Scorer = score_sample,
    trainer: Callable[[Sequence[Sample]], object] = train_classifier,
) -> CurationResult:
    """Run ``iterations`` rounds of train / generate / score / retain.

    With ``accumulate`` the next dataset is the current one plus the retained
    samples; without it the retained samples replace the dataset.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    rng = SplitMix64(seed)
    dataset = list(generator(rng))
    if not dataset:
        raise ValueError("generator produced no initial samples")
    history = []
    for t in range(iterations):
        model = trainer(dataset)
        fresh = list(generator(rng))
        if not fresh:
            raise ValueError(f"generator exhausted in round {t}")
        scored = [(s, float(scorer(model, s))) for s in fresh]
        retained, s_alpha = retain_top(scored, alpha)
        scores = np.array([s for _, s in scored])
        history.append(
            RoundRecord(
                round=t,
                train_size=len(dataset),
                generated=len(fresh),
                retained=len(retained),
                s_alpha=s_alpha,
                score_mean=float(scores.mean()),
                score_min=float(scores.min()),
                score_max=float(scores.max()),
                retained_mean=float(np.mean([s for _, s in retained])),
            )
        )
        kept = [s for s, _ in retained]
        dataset = dataset + kept if accumulate else kept
    return CurationResult(dataset, trainer(dataset), history)


# ---------------------------------------------------------------------------
# Synthetic generator


PALETTE = np.array(
    [
        [0.45, 0.45, 0.45],  # background
        [0.75, 0.30, 0.30],
        [0.30, 0.70, 0.35],
        [0.30, 0.35, 0.75],
    ]
)


@dataclass(frozen=True)
class SyntheticGenerator:
    """Solid-color scenes with one rectangular object and optional label corruption.

    Every pixel of class ``c`` is ``PALETTE[c]`` plus Gaussian noise of std
    ``pixel_noise``, clipped to [0, 1]. The object class and box are uniform.
    Each batch holds exactly ``round(corruption * batch)`` corrupted samples: their
    pseudo-label gives the object box a wrong class and moves it to an
    independently drawn location.
    """

    rows: int = 16
    cols: int = 16
    batch: int = 30
    n_classes: int = 3
    pixel_noise: float = 0.08
    corruption: float = 0.3
    min_size: int = 4
    max_size: int = 10

    def _origin(self, rng: SplitMix64, h: int, w: int) -> tuple[int, int]:
        top = int(rng.integers(self.rows - h + 1, 1)[0])
        left = int(rng.integers(self.cols - w + 1, 1)[0])
        return top, left

    def _box(self, rng: SplitMix64) -> tuple[int, int, int, int]:
        h, w = (self.min_size + rng.integers(self.max_size - self.min_size + 1, 2)).tolist()
        return (*self._origin(rng, h, w), h, w)

    def sample(self, rng: SplitMix64, index: int = 0, corrupt: bool = False) -> Sample:
        cls = 1 + int(rng.integers(self.n_classes, 1)[0])
        top, left, h, w = self._box(rng)
        truth = np.zeros((self.rows, self.cols), dtype=np.uint8)
        truth[top : top + h, left : left + w] = cls
        noise = rng.normal(self.rows * self.cols * 3).reshape(self.rows, self.cols, 3)
        image = np.clip(PALETTE[truth] + self.pixel_noise * noise, 0.0, 1.0)
        if corrupt:
            offset = 1 + int(rng.integers(max(1, self.n_classes - 1), 1)[0])
            wrong = 1 + (cls - 1 + offset) % self.n_classes
            t2, l2 = self._origin(rng, h, w)
            label = np.zeros_like(truth)
            label[t2 : t2 + h, l2 : l2 + w] = wrong
        else:
            label = truth
        tag = f"synthetic:{index}:{'corrupt' if corrupt else 'clean'}"
        return Sample(image, label, tag, quality=0.0 if corrupt else 1.0)

    def __call__(self, rng: SplitMix64) -> list[Sample]:
        # Exactly round(corruption * batch) corrupted samples per batch, at random positions.
        n_bad = int(round(self.corruption * self.batch))
        bad = set(rng.permutation(self.batch)[:n_bad].tolist())
        return [self.sample(rng, i, i in bad) for i in range(self.batch)]


class PoolGenerator:
    """Draw batches without replacement from a fixed list of samples.

    The pool is shuffled once, on the first call, from the caller's stream.
    Raises ``GeneratorExhausted`` when fewer than ``batch`` samples remain.
    """

    def __init__(self, samples: Sequence[Sample], batch: int):
        if batch < 1:
            raise ValueError("batch must be >= 1")
        self.samples = list(samples)
        self.batch = batch
        self._order: list[int] | None = None
        self._pos = 0

    def __call__(self, rng: SplitMix64) -> list[Sample]:
        if self._order is None:
            self._order = rng.permutation(len(self.samples)).tolist()
        if self._pos + self.batch > len(self.samples):
            raise GeneratorExhausted(f"pool of {len(self.samples)} samples exhausted after {self._pos}")
        idx = self._order[self._pos : self._pos + self.batch]
        self._pos += self.batch
        return [self.samples[i] for i in idx]


class GeneratorExhausted(RuntimeError):
    pass


def pixel_accuracy(classifier, samples: Sequence[Sample]) -> float:
    correct = total = 0
    for s in samples:
        pred = classifier.predict(s.image)
        correct += int(np.count_nonzero(pred == s.label))
        total += s.label.size
    return correct / total


def mean_iou(classifier, samples: Sequence[Sample]) -> float:
    """Dataset-level mIoU: per-class intersections and unions summed over all samples."""
    inter = np.zeros(256)
    union = np.zeros(256)
    for s in samples:
        pred = classifier.predict(s.image)
        for c in np.union1d(np.unique(pred), np.unique(s.label)):
            a, b = pred == c, s.label == c
            inter[c] += np.count_nonzero(a & b)
            union[c] += np.count_nonzero(a | b)
    present = union > 0
    return float(np.mean(inter[present] / union[present]))


def retention_sweep(
    generator: Generator,
    ratios: Sequence[float],
    iterations_list: Sequence[int],
    seed: int,
    held_out: Sequence[Sample],
    accumulate: bool = True,
    metric: Callable = mean_iou,
) -> list[dict]:
    if not ratios or not iterations_list:
        raise ValueError("ratios and iterations lists must be nonempty")
    rows = []
    for iters in iterations_list:
        for ratio in ratios:
            result = curate(generator, iters, ratio, seed, accumulate)
            rows.append({"ratio": ratio, "iterations": iters, "held_out_accuracy": metric(result.classifier, held_out)})
    return rows
