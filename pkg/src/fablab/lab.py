"""Desk-scale experiments on prior strength.

* exhaustive posteriors over set partitions with a plug-in (per-block MLE)
  Gaussian likelihood,
* the dominance curve: how far a prior moves the posterior away from the
  likelihood-only posterior as features are replicated,
* the d-sweep: which k FAB-EM selects as the GFIC exponent grows.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp
from sklearn.metrics import adjusted_rand_score

from .gmm_fab import LOG_2PI, FabConfig, as_dataset, component_dc, default_var_floor, fab_fit, hard_labels
from .partitions import Assignment, Partition, count_partitions, enumerate_partitions
from .priors import PriorSpec, log_prior_partition

DOMINANCE_COLUMNS = ("r", "prior_kind", "prior_param", "tv_distance", "map_blocks", "map_partition")
SELECTION_COLUMNS = ("d", "seed", "selected_k", "objective", "iterations", "ari", "status")


@dataclass(frozen=True)
class GenConfig:
    seed: int
    k_true: int
    n: int
    dims: int = 1
    separation: float = 6.0
    variance: float = 1.0

    def __post_init__(self):
        if min(self.k_true, self.n, self.dims) < 1:
            raise ValueError("k_true, n and dims must be positive")
        if not (self.separation > 0 and self.variance > 0):
            raise ValueError("separation and variance must be positive")
        if self.k_true > self.n:
            raise ValueError("k_true cannot exceed n")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def true_means(self) -> np.ndarray:
        """Cluster centres on the first axis, ``separation`` standard deviations apart."""
        step = self.separation * math.sqrt(self.variance)
        means = np.zeros((self.k_true, self.dims))
        means[:, 0] = (np.arange(self.k_true) - (self.k_true - 1) / 2) * step
        return means


def generate_gmm_data(cfg: GenConfig) -> tuple[np.ndarray, Assignment]:
    """Equal-weight Gaussian clusters; cluster sizes differ by at most one."""
    rng = np.random.default_rng(cfg.seed)
    labels = np.arange(cfg.n) % cfg.k_true
    rng.shuffle(labels)
    x = cfg.true_means()[labels] + math.sqrt(cfg.variance) * rng.standard_normal((cfg.n, cfg.dims))
    return x, Assignment(tuple(labels + 1), cfg.k_true)


CANONICAL_DOMINANCE_GEN = GenConfig(seed=20240101, k_true=2, n=8, dims=1, separation=6.0, variance=1.0)
# Floor at the generating noise variance.  With a tiny floor the plug-in
# likelihood is maximized by all-singleton partitions, which no prior penalizes
# under FIC, and the study degenerates.
CANONICAL_DOMINANCE_VAR_FLOOR = 1.0


def canonical_dominance_dataset() -> np.ndarray:
    """The fixed N=8, D=1, two-cluster dataset used by the dominance study."""
    x, _ = generate_gmm_data(CANONICAL_DOMINANCE_GEN)
    return x


def block_log_lik(xb: np.ndarray, floor: np.ndarray) -> float:
    """Gaussian log-likelihood of the rows ``xb`` at their own floored MLE."""
    mean = xb.mean(axis=0)
    var = np.maximum(((xb - mean) ** 2).mean(axis=0), floor)
    return float(np.sum(-0.5 * (LOG_2PI + np.log(var)) * len(xb) - ((xb - mean) ** 2).sum(axis=0) / (2 * var)))


def plugin_log_lik(x, b: Partition, var_floor=None) -> float:
    """Sum over blocks of each block's likelihood at its own MLE; no mixing weights."""
    x = as_dataset(x)
    if b.n != x.shape[0]:
        raise ValueError(f"partition covers {b.n} points but the dataset has {x.shape[0]}")
    floor = _floor(x, var_floor)
    return sum(block_log_lik(x[np.asarray(blk) - 1], floor) for blk in b.blocks)


def _floor(x: np.ndarray, var_floor) -> np.ndarray:
    if var_floor is None:
        return default_var_floor(x)
    return np.broadcast_to(np.asarray(var_floor, dtype=float), (x.shape[1],)).copy()


@dataclass(frozen=True)
class PosteriorTable:
    partitions: tuple[Partition, ...]
    log_scores: np.ndarray
    probs: np.ndarray
    prior: PriorSpec
    likelihood_kind: str = "plugin-mle"

    def __len__(self) -> int:
        return len(self.partitions)

    def map_index(self) -> int:
        return int(np.argmax(self.log_scores))

    def map_partition(self) -> Partition:
        return self.partitions[self.map_index()]

    def prob_of(self, b: Partition) -> float:
        return float(self.probs[self.partitions.index(b)])


class _PosteriorSupport:
    """Partition support with block likelihoods cached by block."""

    def __init__(self, x: np.ndarray, k_max: int, var_floor):
        self.x = x
        self.floor = _floor(x, var_floor)
        self.partitions = tuple(enumerate_partitions(x.shape[0], k_max))
        cache: dict[tuple[int, ...], float] = {}
        loglik = np.empty(len(self.partitions))
        for i, b in enumerate(self.partitions):
            total = 0.0
            for blk in b.blocks:
                if blk not in cache:
                    cache[blk] = block_log_lik(x[np.asarray(blk) - 1], self.floor)
                total += cache[blk]
            loglik[i] = total
        self.loglik = loglik

    def table(self, spec: PriorSpec, scale: float = 1.0) -> PosteriorTable:
        prior = np.array([log_prior_partition(spec, b) for b in self.partitions])
        scores = scale * self.loglik + prior
        probs = np.exp(scores - logsumexp(scores))
        return PosteriorTable(self.partitions, scores, probs, spec)


def posterior_over_partitions(x, spec: PriorSpec, k_max: int, var_floor=None) -> PosteriorTable:
    """Exact posterior over every partition with at most ``k_max`` blocks.

    The score of a partition is its plug-in likelihood plus the prior score
    from :func:`fablab.priors.log_prior_partition`.
    """
    x = as_dataset(x)
    return _PosteriorSupport(x, k_max, var_floor).table(spec)


def total_variation(p: PosteriorTable, q: PosteriorTable) -> float:
    if p.partitions != q.partitions:
        raise ValueError("posterior tables have different supports")
    return 0.5 * float(np.sum(np.abs(p.probs - q.probs)))


@dataclass(frozen=True)
class DominanceRow:
    r: int
    prior_kind: str
    prior_param: float | None
    tv_distance: float
    map_blocks: int
    map_partition: str


def _spec_at_replication(spec: PriorSpec, dims: int, r: int) -> PriorSpec:
    if spec.kind == "FIC":
        return PriorSpec.fic(component_dc(dims * r))
    return spec


def dominance_curve(
    x_base,
    replications: Sequence[int],
    specs: Sequence[PriorSpec],
    k_max: int,
    var_floor=None,
) -> list[DominanceRow]:
    """TV distance of each prior's posterior from the likelihood-only posterior.

    Replicating every feature column ``r`` times raises D_c to ``2 * D * r``;
    FIC priors are re-parameterized with that D_c, every other prior is held
    fixed.  Rows come out in (r, spec) input order.
    """
    x_base = as_dataset(x_base)
    if any(r < 1 for r in replications):
        raise ValueError("replications must be positive integers")
    floor = _floor(x_base, var_floor)
    rows = []
    # replicated columns are identical copies, so the plug-in likelihood scales exactly by r
    support = _PosteriorSupport(x_base, k_max, floor)
    dims = x_base.shape[1]
    for r in replications:
        baseline = support.table(PriorSpec.uniform(), scale=r)
        for spec in specs:
            used = _spec_at_replication(spec, dims, r)
            table = baseline if used.kind == "Uniform" else support.table(used, scale=r)
            b = table.map_partition()
            rows.append(
                DominanceRow(int(r), used.kind, used.param, total_variation(table, baseline), b.num_blocks, str(b))
            )
    return rows


def replicate_features(x, r: int) -> np.ndarray:
    """Each column repeated ``r`` times, grouped by copy: [x, x, ..., x]."""
    return np.tile(as_dataset(x), (1, r))


@dataclass(frozen=True)
class SelectionRow:
    d: float
    seed: int
    selected_k: int | None
    objective: float | None
    iterations: int | None
    ari: float | None
    status: str


def _selection_cell(gen: GenConfig, cfg: FabConfig) -> SelectionRow:
    try:
        x, truth = generate_gmm_data(gen)
        model, trace = fab_fit(x, cfg)
        ari = adjusted_rand_score(truth.labels, hard_labels(x, model))
        status = "ok" if trace.converged else "max_iters"
        return SelectionRow(cfg.d, gen.seed, model.k, trace.final_objective, trace.iterations, float(ari), status)
    except Exception as exc:  # a failed cell is reported, the sweep continues
        return SelectionRow(cfg.d, gen.seed, None, None, None, None, f"error: {type(exc).__name__}: {exc}")


def selection_sweep(
    gen: GenConfig,
    d_grid: Iterable[float],
    seeds: Iterable[int],
    cfg_base: FabConfig,
    max_workers: int | None = None,
) -> list[SelectionRow]:
    """Fit every (d, seed) cell; one seed drives both the data and the init.

    With ``max_workers > 1`` cells run in separate processes; the output
    order is always d-major, seed-minor as given.
    """
    cells = [(replace(gen, seed=int(s)), replace(cfg_base, d=float(d), seed=int(s))) for d in d_grid for s in seeds]
    if max_workers and max_workers > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(_selection_cell, *zip(*cells)))
    return [_selection_cell(g, c) for g, c in cells]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows, columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        data = asdict(row)
        w.writerow([_fmt(data[c]) for c in columns])
    return buf.getvalue()


def dominance_csv(rows: Sequence[DominanceRow]) -> str:
    return rows_to_csv(rows, DOMINANCE_COLUMNS)


def selection_csv(rows: Sequence[SelectionRow]) -> str:
    return rows_to_csv(rows, SELECTION_COLUMNS)


def mean_selected_k(rows: Sequence[SelectionRow]) -> dict[float, float]:
    """Mean selected k per d over the successful cells."""
    out: dict[float, list[int]] = {}
    for row in rows:
        if row.selected_k is not None:
            out.setdefault(row.d, []).append(row.selected_k)
    return {d: float(np.mean(v)) for d, v in out.items()}


def restricted_bell(n: int, k_max: int) -> int:
    return count_partitions(n, k_max)
