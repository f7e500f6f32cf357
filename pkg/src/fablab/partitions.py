"""Cluster assignments, canonical set partitions and exhaustive enumeration.

Labels are 1-based everywhere.  A :class:`Partition` is always stored in
canonical form: blocks sorted by their smallest element, elements sorted
inside each block, so structural equality is partition equality.
"""
from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

DEFAULT_BUDGET = 10**7


class BudgetExceeded(RuntimeError):
    """An enumeration would yield more items than the configured budget."""

    def __init__(self, what: str, size: int, budget: int):
        self.what = what
        self.size = size
        self.budget = budget
        super().__init__(f"{what} has {size} items, exceeding the enumeration budget of {budget}")


def enumeration_budget(budget: int | None = None) -> int:
    """Resolve the budget: explicit argument, then ``FABLAB_BUDGET``, then 10**7."""
    if budget is not None:
        return int(budget)
    env = os.environ.get("FABLAB_BUDGET")
    if env:
        return int(float(env))
    return DEFAULT_BUDGET


@dataclass(frozen=True)
class Assignment:
    """Length-N vector of labels in ``1..k_slots`` (the flattened 1-of-K coding)."""

    labels: tuple[int, ...]
    k_slots: int

    def __post_init__(self):
        labels = tuple(int(l) for l in self.labels)
        object.__setattr__(self, "labels", labels)
        if len(labels) < 1:
            raise ValueError("an assignment needs at least one observation")
        if self.k_slots < 1:
            raise ValueError(f"k_slots must be >= 1, got {self.k_slots}")
        bad = [l for l in labels if not 1 <= l <= self.k_slots]
        if bad:
            raise ValueError(f"labels {bad} outside 1..{self.k_slots}")

    @property
    def n(self) -> int:
        return len(self.labels)

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class Partition:
    """Canonical set partition of ``{1..n}`` into nonempty blocks."""

    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        blocks = tuple(tuple(int(e) for e in b) for b in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        if not blocks:
            raise ValueError("a partition needs at least one block")
        if any(len(b) == 0 for b in blocks):
            raise ValueError("blocks must be nonempty")
        if any(list(b) != sorted(set(b)) for b in blocks):
            raise ValueError("elements must be sorted and unique within each block")
        if [b[0] for b in blocks] != sorted(b[0] for b in blocks):
            raise ValueError("blocks must be ordered by their minimum element")
        elems = sorted(e for b in blocks for e in b)
        if elems != list(range(1, len(elems) + 1)):
            raise ValueError("blocks must be disjoint and cover 1..n")

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]]) -> "Partition":
        """Build a partition from blocks in any order, canonicalising them."""
        canon = sorted((tuple(sorted(b)) for b in blocks), key=lambda b: b[0] if b else 0)
        return cls(tuple(canon))

    @classmethod
    def parse(cls, text: str) -> "Partition":
        """Inverse of ``str()``: ``"{1,2}|{3}"``."""
        blocks = []
        for part in text.split("|"):
            inner = part.strip().strip("{}")
            blocks.append([int(e) for e in inner.split(",")])
        return cls.from_blocks(blocks)

    @property
    def n(self) -> int:
        return sum(len(b) for b in self.blocks)

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    def labels(self) -> np.ndarray:
        """1-based block index of every element, in element order."""
        out = np.empty(self.n, dtype=np.int64)
        for j, block in enumerate(self.blocks, start=1):
            out[np.asarray(block) - 1] = j
        return out

    def __str__(self) -> str:
        return "|".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks)


def assignment_counts(z: Assignment) -> np.ndarray:
    """Occupancy n_k of each of the ``k_slots`` labels; empty slots count 0."""
    return np.bincount(np.asarray(z.labels) - 1, minlength=z.k_slots).astype(np.int64)


def partition_of(z: Assignment) -> Partition:
    """The label-free partition induced by ``z``; empty slots vanish."""
    first_seen: dict[int, list[int]] = {}
    for i, label in enumerate(z.labels, start=1):
        first_seen.setdefault(label, []).append(i)
    # dict preserves insertion order, i.e. order of first appearance = order of block minima
    return Partition(tuple(tuple(b) for b in first_seen.values()))


def class_size(b: Partition, n: int) -> int:
    """N!/prod(n_k!) over block sizes, as an exact integer."""
    if b.n != n:
        raise ValueError(f"partition covers {b.n} elements, expected {n}")
    denom = math.prod(math.factorial(s) for s in b.sizes)
    return math.factorial(n) // denom


def log_class_size(sizes: Sequence[int]) -> float:
    """Log-gamma form of :func:`class_size` for large n."""
    n = sum(sizes)
    return math.lgamma(n + 1) - sum(math.lgamma(s + 1) for s in sizes)


def stirling2(n: int, k: int) -> int:
    """Stirling number of the second kind S(n, k)."""
    if n == k:
        return 1
    if k == 0 or k > n:
        return 0
    row = [1] + [0] * k  # S(0, j)
    for i in range(1, n + 1):
        new = [0] * (k + 1)
        for j in range(1, min(i, k) + 1):
            new[j] = j * row[j] + row[j - 1]
        row = new
    return row[k]


def count_partitions(n: int, k_max: int) -> int:
    """Number of set partitions of ``{1..n}`` with at most ``k_max`` blocks."""
    return sum(stirling2(n, j) for j in range(1, min(n, k_max) + 1))


def enumerate_assignments(n: int, k: int, budget: int | None = None) -> Iterator[Assignment]:
    """All k**n assignments in lexicographic label order."""
    if n < 1 or k < 1:
        raise ValueError("n and k must be positive")
    limit = enumeration_budget(budget)
    total = k**n
    if total > limit:
        raise BudgetExceeded(f"assignment space {k}^{n}", total, limit)
    for labels in itertools.product(range(1, k + 1), repeat=n):
        yield Assignment(labels, k)


def restricted_growth_strings(n: int, k_max: int) -> Iterator[tuple[int, ...]]:
    """0-based restricted growth strings of length n using at most k_max values."""
    a = [0] * n

    def rec(i: int, used: int) -> Iterator[tuple[int, ...]]:
        if i == n:
            yield tuple(a)
            return
        for v in range(min(used + 1, k_max)):
            a[i] = v
            yield from rec(i + 1, max(used, v + 1))

    yield from rec(1, 1)


def _partition_from_rgs(rgs: Sequence[int]) -> Partition:
    blocks: list[list[int]] = []
    for i, v in enumerate(rgs, start=1):
        if v == len(blocks):
            blocks.append([i])
        else:
            blocks[v].append(i)
    return Partition(tuple(tuple(b) for b in blocks))


def enumerate_partitions(n: int, k_max: int, budget: int | None = None) -> Iterator[Partition]:
    """Every set partition of ``{1..n}`` with at most ``k_max`` blocks, once each.

    Order follows the restricted growth strings lexicographically, so the
    single-block partition comes first.
    """
    if n < 1 or k_max < 1:
        raise ValueError("n and k_max must be positive")
    limit = enumeration_budget(budget)
    total = count_partitions(n, k_max)
    if total > limit:
        raise BudgetExceeded(f"partitions of {n} into at most {k_max} blocks", total, limit)
    for rgs in restricted_growth_strings(n, k_max):
        yield _partition_from_rgs(rgs)
