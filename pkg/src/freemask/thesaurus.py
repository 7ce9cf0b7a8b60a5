"""Object/background co-occurrence table built from a prompt corpus."""

from __future__ import annotations

import csv
import string
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

DEFAULT_MIN_RELATION = 0.05
_STRIP = str.maketrans("", "", string.punctuation)


def tokenize(text: str) -> tuple[str, ...]:
    return tuple(text.lower().translate(_STRIP).split())


@dataclass
class Corpus:
    prompts: list[tuple[str, ...]] = field(default_factory=list)
    index: dict[str, set[int]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.prompts)

    def containing(self, term: str) -> set[int]:
        """Ids of prompts containing ``term`` as a contiguous token run."""
        toks = tokenize(term)
        if not toks:
            return set()
        candidates = self.index.get(toks[0], set())
        if len(toks) == 1:
            return set(candidates)
        for t in toks[1:]:
            candidates = candidates & self.index.get(t, set())
        n = len(toks)
        return {
            i
            for i in candidates
            if any(self.prompts[i][j : j + n] == toks for j in range(len(self.prompts[i]) - n + 1))
        }


def ingest_corpus(lines: Iterable[str | bytes]) -> Corpus:
    """One prompt per line. Byte lines are decoded as strict UTF-8."""
    prompts = []
    index: dict[str, set[int]] = defaultdict(set)
    for raw in lines:
        line = raw.decode("utf-8") if isinstance(raw, bytes) else raw
        line = line.rstrip("\r\n")
        toks = tokenize(line)
        i = len(prompts)
        prompts.append(toks)
        for t in toks:
            index[t].add(i)
    return Corpus(prompts, dict(index))


def relation(corpus: Corpus, obj: str, background: str) -> float:
    """Fraction of prompts mentioning ``background`` that also mention ``obj`` (0 if none do)."""
    with_bg = corpus.containing(background)
    if not with_bg:
        return 0.0
    return len(with_bg & corpus.containing(obj)) / len(with_bg)


@dataclass(frozen=True)
class Thesaurus:
    objects: tuple[str, ...]
    backgrounds: tuple[str, ...]
    relations: np.ndarray

    def value(self, obj: str, background: str) -> float:
        return float(self.relations[self.objects.index(obj), self.backgrounds.index(background)])


def build_table(corpus: Corpus, objects: Sequence[str], backgrounds: Sequence[str]) -> Thesaurus:
    if not objects or not backgrounds:
        raise ValueError("object and background term lists must be nonempty")
    objects, backgrounds = tuple(objects), tuple(backgrounds)
    obj_sets = [corpus.containing(o) for o in objects]
    table = np.zeros((len(objects), len(backgrounds)))
    for j, b in enumerate(backgrounds):
        with_bg = corpus.containing(b)
        if not with_bg:
            continue
        for i, s in enumerate(obj_sets):
            table[i, j] = len(with_bg & s) / len(with_bg)
    return Thesaurus(objects, backgrounds, table)


def compatible_objects(table: Thesaurus, background: str, min_relation: float = DEFAULT_MIN_RELATION) -> list[str]:
    if background not in table.backgrounds:
        raise KeyError(f"unknown background {background!r}")
    col = table.relations[:, table.backgrounds.index(background)]
    keep = [(float(r), o) for o, r in zip(table.objects, col) if r >= min_relation]
    keep.sort(key=lambda ro: (-ro[0], ro[1]))
    return [o for _, o in keep]


def write_table_csv(path, table: Thesaurus) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["object", *table.backgrounds])
        for o, row in zip(table.objects, table.relations):
            w.writerow([o, *(repr(float(v)) for v in row)])


def read_table_csv(path) -> Thesaurus:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    backgrounds = tuple(rows[0][1:])
    objects = tuple(r[0] for r in rows[1:])
    rel = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return Thesaurus(objects, backgrounds, rel)
