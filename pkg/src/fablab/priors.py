"""CRP, FIC and generalized-FIC priors over cluster assignments, in log space.

The FIC family penalizes an assignment through its occupancy counts only::

    log P_FIC(Z | K)  = -(D_c / 2) * sum_{n_k > 0} log n_k   (+ const)
    log P_GFIC(Z | K) = -d * sum_{n_k > 0} log n_k           (+ const)

FIC and GFIC scores are unnormalized.  The CRP forms are normalized over
their natural supports.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .partitions import (
    Assignment,
    BudgetExceeded,
    Partition,
    assignment_counts,
    enumerate_partitions,
    enumeration_budget,
)

__all__ = [
    "PriorSpec",
    "GficRangeWarning",
    "crp_sequence_log_prob",
    "crp_class_log_prob",
    "crp_fixed_k_log_normalizer_compositions",
    "crp_fixed_k_log_normalizer_partitions",
    "crp_fixed_k_normalizer_compositions_exact",
    "crp_fixed_k_normalizer_partitions_exact",
    "fic_log_score",
    "gfic_log_score",
    "log_prior",
    "log_prior_partition",
]

KINDS = ("CRP", "FIC", "GFIC", "Uniform")


class GficRangeWarning(UserWarning):
    """The GFIC exponent lies outside the open interval (1, D_c/2)."""


@dataclass(frozen=True)
class PriorSpec:
    kind: str
    dc: float | None = None
    d: float | None = None
    normalized: bool = field(init=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown prior kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "FIC":
            if self.dc is None or not self.dc > 0:
                raise ValueError("FIC requires dc > 0")
            if self.d is not None:
                raise ValueError("FIC takes dc, not d")
        elif self.kind == "GFIC":
            if self.d is None or not self.d > 0:
                raise ValueError("GFIC requires d > 0")
            if self.dc is not None:
                raise ValueError("GFIC takes d, not dc")
        elif self.dc is not None or self.d is not None:
            raise ValueError(f"{self.kind} takes no parameter")
        object.__setattr__(self, "normalized", self.kind in ("CRP", "Uniform"))

    @classmethod
    def crp(cls) -> "PriorSpec":
        return cls("CRP")

    @classmethod
    def fic(cls, dc: float) -> "PriorSpec":
        return cls("FIC", dc=float(dc))

    @classmethod
    def gfic(cls, d: float) -> "PriorSpec":
        return cls("GFIC", d=float(d))

    @classmethod
    def uniform(cls) -> "PriorSpec":
        return cls("Uniform")

    @property
    def param(self) -> float | None:
        """The single numeric parameter (dc for FIC, d for GFIC), if any."""
        return self.dc if self.kind == "FIC" else self.d


def crp_sequence_log_prob(z: Assignment) -> float:
    """log[ prod_{n_k>0} (n_k - 1)! / (N! K!) ] with K = ``z.k_slots``."""
    counts = assignment_counts(z)
    occupied = counts[counts > 0]
    return float(
        sum(math.lgamma(c) for c in occupied) - math.lgamma(z.n + 1) - math.lgamma(z.k_slots + 1)
    )


def crp_class_log_prob(b: Partition, k_slots: int) -> float:
    """Class form: log[ 1 / (K! prod_{blocks} n_k) ]."""
    if k_slots < b.num_blocks:
        raise ValueError(f"k_slots={k_slots} is smaller than the {b.num_blocks} blocks of {b}")
    return float(-math.lgamma(k_slots + 1) - sum(math.log(s) for s in b.sizes))


def _compositions(n: int, k: int):
    """Ordered k-tuples of non-negative integers summing to n (stars and bars)."""
    for bars in itertools.combinations(range(n + k - 1), k - 1):
        prev = -1
        parts = []
        for bar in bars:
            parts.append(bar - prev - 1)
            prev = bar
        parts.append(n + k - 2 - prev)
        yield parts


def _check_compositions_budget(n: int, k: int, budget: int | None) -> None:
    if n < 1 or k < 1:
        raise ValueError("n and k must be positive")
    limit = enumeration_budget(budget)
    total = math.comb(n + k - 1, k - 1)
    if total > limit:
        raise BudgetExceeded(f"compositions of {n} into {k} parts", total, limit)


def crp_fixed_k_log_normalizer_compositions(n: int, k: int, budget: int | None = None) -> float:
    """log Z_K summed over ordered count tuples (n_1..n_k), n_j >= 0, sum = n.

    Each tuple contributes 1 / prod_{n_j>0} n_j.
    """
    _check_compositions_budget(n, k, budget)
    terms = [-sum(math.log(c) for c in parts if c > 0) for parts in _compositions(n, k)]
    return float(logsumexp(terms))


def crp_fixed_k_normalizer_compositions_exact(n: int, k: int, budget: int | None = None) -> Fraction:
    _check_compositions_budget(n, k, budget)
    total = Fraction(0)
    for parts in _compositions(n, k):
        total += Fraction(1, math.prod(c for c in parts if c > 0))
    return total


def crp_fixed_k_log_normalizer_partitions(n: int, k: int, budget: int | None = None) -> float:
    """log of the sum over set partitions with at most k blocks of 1/prod(block sizes)."""
    terms = [-sum(math.log(s) for s in b.sizes) for b in enumerate_partitions(n, k, budget)]
    return float(logsumexp(terms))


def crp_fixed_k_normalizer_partitions_exact(n: int, k: int, budget: int | None = None) -> Fraction:
    total = Fraction(0)
    for b in enumerate_partitions(n, k, budget):
        total += Fraction(1, math.prod(b.sizes))
    return total


def _sum_log_occupied(counts) -> float:
    c = np.asarray(counts, dtype=float)
    c = c[c > 0]
    return float(np.sum(np.log(c)))


def fic_log_score(counts: Sequence[float], dc: float) -> float:
    """Unnormalized log FIC prior, -(dc/2) * sum_{n_k>0} log n_k."""
    if not dc > 0:
        raise ValueError(f"dc must be positive, got {dc}")
    return -(dc / 2) * _sum_log_occupied(counts)


def gfic_log_score(counts: Sequence[float], d: float, dc: float | None = None) -> float:
    """Unnormalized log GFIC prior, -d * sum_{n_k>0} log n_k.

    When ``dc`` is given and ``d`` falls outside (1, dc/2) a
    :class:`GficRangeWarning` is emitted; the score is still returned.
    """
    if not d > 0:
        raise ValueError(f"d must be positive, got {d}")
    if dc is not None and not 1 < d < dc / 2:
        warnings.warn(f"GFIC exponent d={d} outside (1, D_c/2) = (1, {dc / 2})", GficRangeWarning, stacklevel=2)
    # written as -(2d/2) so that d = dc/2 reproduces fic_log_score bit for bit
    return -((2 * d) / 2) * _sum_log_occupied(counts)


def log_prior(spec: PriorSpec, z: Assignment) -> float:
    """Score an assignment under ``spec``.  Only CRP and Uniform are normalized."""
    if spec.kind == "CRP":
        return crp_sequence_log_prob(z)
    if spec.kind == "Uniform":
        return 0.0
    counts = assignment_counts(z)
    if spec.kind == "FIC":
        return fic_log_score(counts, spec.dc)
    return gfic_log_score(counts, spec.d)


def log_prior_partition(spec: PriorSpec, b: Partition) -> float:
    """Score a partition; CRP uses the class form with one slot per block."""
    if spec.kind == "CRP":
        return crp_class_log_prob(b, b.num_blocks)
    if spec.kind == "Uniform":
        return 0.0
    if spec.kind == "FIC":
        return fic_log_score(b.sizes, spec.dc)
    return gfic_log_score(b.sizes, spec.d)
