"""Diagonal Gaussian mixtures fitted by FAB-EM with a GFIC shrinkage penalty.

The objective maximized by :func:`fab_fit` is the variational lower bound

    sum_ik q_ik [log w_k + log N(x_i | mu_k, var_k)] + sum_i H(q_i) - d sum_k log n_k

with soft counts ``n_k = sum_i q_ik``.  The penalty is concave in the counts,
so the E-step maximizes its tangent minorizer, which multiplies each
responsibility by ``exp(-d / n_k)`` evaluated at the previous counts.  At
``d = 0`` every step is plain EM.

For a diagonal Gaussian the per-component parameter dimension is
``D_c = 2 * D`` (a mean and a variance per feature), so ``d = D`` recovers FIC.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import logsumexp, xlogy

from .partitions import Assignment

LOG_2PI = math.log(2 * math.pi)
VAR_FLOOR_REL = 1e-6
_VAR_FLOOR_MIN = 1e-12
INIT_METHODS = ("random-responsibilities", "kmeans-style")


def component_dc(dims: int) -> int:
    """Parameter dimension of one diagonal Gaussian component in ``dims`` features."""
    return 2 * dims


def as_dataset(x) -> np.ndarray:
    """Validate and return an (N, D) float array."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise ValueError(f"dataset must be N x D with N, D >= 1, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("dataset contains non-finite entries")
    return x


def default_var_floor(x) -> np.ndarray:
    """Per-feature floor, 1e-6 times the data variance (never below 1e-12)."""
    x = as_dataset(x)
    return np.maximum(VAR_FLOOR_REL * x.var(axis=0), _VAR_FLOOR_MIN)


def _resolve_floor(x: np.ndarray, var_floor) -> np.ndarray:
    if var_floor is None:
        return default_var_floor(x)
    floor = np.broadcast_to(np.asarray(var_floor, dtype=float), (x.shape[1],)).copy()
    if np.any(floor <= 0):
        raise ValueError("var_floor must be positive")
    return floor


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GmmModel:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = _frozen(self.weights)
        mu = _frozen(np.atleast_2d(self.means))
        var = _frozen(np.atleast_2d(self.variances))
        if w.ndim != 1 or mu.shape != var.shape or mu.shape[0] != w.shape[0]:
            raise ValueError("weights (k,), means (k, D) and variances (k, D) do not agree")
        if np.any(var <= 0):
            raise ValueError("variances must be strictly positive")
        if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise ValueError(f"weights must lie on the simplex (sum={w.sum()!r})")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "variances", var)

    @property
    def k(self) -> int:
        return len(self.weights)

    @property
    def dims(self) -> int:
        return self.means.shape[1]

    def permuted(self, order) -> "GmmModel":
        order = np.asarray(order)
        return GmmModel(self.weights[order], self.means[order], self.variances[order])

    def log_pdf_matrix(self, x) -> np.ndarray:
        """(N, k) matrix of component log densities."""
        x = as_dataset(x)
        diff2 = (x[:, None, :] - self.means[None, :, :]) ** 2
        return -0.5 * np.sum(LOG_2PI + np.log(self.variances)[None] + diff2 / self.variances[None], axis=2)


def component_log_pdf(x_row, mean, variance) -> float:
    x_row, mean, variance = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (x_row, mean, variance))
    return float(np.sum(-0.5 * np.log(2 * np.pi * variance) - (x_row - mean) ** 2 / (2 * variance)))


def mle_fit_given_assignment(x, z: Assignment, var_floor=None) -> GmmModel:
    """Per-cluster MLE under a hard assignment; empty slots are dropped.

    Variances are the biased sample variances, floored at ``var_floor``
    (default :func:`default_var_floor`), so singletons get the floor.
    """
    x = as_dataset(x)
    labels = np.asarray(z.labels)
    if len(labels) != x.shape[0]:
        raise ValueError(f"assignment has {len(labels)} labels for {x.shape[0]} rows")
    q = np.zeros((x.shape[0], z.k_slots))
    q[np.arange(x.shape[0]), labels - 1] = 1.0
    q = q[:, q.sum(axis=0) > 0]
    return fab_m_step(x, q, var_floor)


def fab_m_step(x, q, var_floor=None) -> GmmModel:
    """Weighted MLE of weights, means and floored variances.

    Columns of ``q`` with zero mass are kept with weight 0 (means and
    variances are then placeholders); :func:`fab_fit` prunes them.
    """
    x = as_dataset(x)
    q = np.asarray(q, dtype=float)
    floor = _resolve_floor(x, var_floor)
    nk = q.sum(axis=0)
    safe = np.where(nk > 0, nk, 1.0)
    means = (q.T @ x) / safe[:, None]
    var = np.einsum("ik,ikd->kd", q, (x[:, None, :] - means[None]) ** 2) / safe[:, None]
    var = np.maximum(var, floor[None, :])
    dead = nk <= 0
    if np.any(dead):
        means[dead] = x.mean(axis=0)
        var[dead] = np.maximum(x.var(axis=0), floor)
    weights = nk / nk.sum()
    return GmmModel(weights, means, var)


def _log_resp(x: np.ndarray, model: GmmModel, d: float, soft_counts) -> np.ndarray:
    with np.errstate(divide="ignore"):
        log_w = np.log(model.weights)
    logits = log_w[None, :] + model.log_pdf_matrix(x)
    if d:
        counts = np.asarray(soft_counts, dtype=float)
        with np.errstate(divide="ignore"):
            shrink = np.where(counts > 0, -d / np.where(counts > 0, counts, 1.0), -np.inf)
        logits = logits + shrink[None, :]
    return logits - logsumexp(logits, axis=1, keepdims=True)


def fab_e_step(x, model: GmmModel, d: float, soft_counts=None) -> tuple[np.ndarray, np.ndarray]:
    """Shrunken responsibilities and their column sums.

    ``soft_counts`` are the previous iteration's ``sum_i q_ik``; when omitted
    they are taken as ``N * weights`` (equal to them right after an M-step).
    """
    x = as_dataset(x)
    if soft_counts is None:
        soft_counts = x.shape[0] * model.weights
    q = np.exp(_log_resp(x, model, d, soft_counts))
    return q, q.sum(axis=0)


def row_entropy(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return -np.sum(xlogy(q, q), axis=1)


def fab_objective(x, q, model: GmmModel, d: float) -> float:
    """Penalized lower bound; zero-responsibility cells contribute nothing."""
    x = as_dataset(x)
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore"):
        log_w = np.log(model.weights)
    joint = log_w[None, :] + model.log_pdf_matrix(x)
    expected = float(np.sum(np.where(q > 0, q * joint, 0.0)))
    nk = q.sum(axis=0)
    penalty = d * float(np.sum(np.log(nk[nk > 0])))
    return expected - penalty + float(np.sum(row_entropy(q)))


@dataclass(frozen=True)
class FabConfig:
    k_init: int
    d: float = 0.0
    max_iters: int = 500
    rel_tol: float = 1e-6
    var_floor: float | None = None  # absolute, per feature; None -> 1e-6 * data variance
    prune_threshold: float | None = None  # None -> max(d, 1.0)
    seed: int = 0
    init: str = "random-responsibilities"

    def __post_init__(self):
        if self.k_init < 1:
            raise ValueError("k_init must be >= 1")
        if self.d < 0:
            raise ValueError("d must be non-negative")
        if self.max_iters < 1 or not self.rel_tol > 0:
            raise ValueError("max_iters and rel_tol must be positive")
        if self.var_floor is not None and not self.var_floor > 0:
            raise ValueError("var_floor must be positive")
        if self.prune_threshold is not None and self.prune_threshold < 0:
            raise ValueError("prune_threshold must be non-negative")
        if self.init not in INIT_METHODS:
            raise ValueError(f"init must be one of {INIT_METHODS}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def threshold(self) -> float:
        return max(self.d, 1.0) if self.prune_threshold is None else self.prune_threshold


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    objective: float
    k: int
    pruned: tuple[int, ...] = ()


@dataclass
class FitTrace:
    initial_objective: float = float("nan")
    records: list[IterationRecord] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.records])

    @property
    def final_objective(self) -> float:
        return self.records[-1].objective if self.records else float("nan")

    def monotonicity_violations(self, rel_tol: float = 1e-8) -> list[int]:
        """Iterations whose objective fell below the previous one with no pruning in between."""
        bad = []
        prev = self.initial_objective
        for cur in self.records:
            if not cur.pruned and cur.objective < prev - rel_tol * abs(prev):
                bad.append(cur.iteration)
            prev = cur.objective
        return bad


def init_responsibilities(x, k: int, seed: int, method: str = "random-responsibilities") -> np.ndarray:
    """Seeded initial responsibilities, (N, k) with rows on the simplex."""
    x = as_dataset(x)
    n = x.shape[0]
    if k > n:
        raise ValueError(f"k_init={k} exceeds the {n} observations")
    rng = np.random.default_rng(seed)
    if method == "random-responsibilities":
        return rng.dirichlet(np.ones(k), size=n)
    if method == "kmeans-style":
        # k-means++ seeding, then hard nearest-centre responsibilities
        centres = [x[rng.integers(n)]]
        for _ in range(1, k):
            d2 = np.min(((x[:, None, :] - np.array(centres)[None]) ** 2).sum(-1), axis=1)
            p = d2 / d2.sum() if d2.sum() > 0 else np.full(n, 1 / n)
            centres.append(x[rng.choice(n, p=p)])
        d2 = ((x[:, None, :] - np.array(centres)[None]) ** 2).sum(-1)
        q = np.zeros((n, k))
        q[np.arange(n), np.argmin(d2, axis=1)] = 1.0
        # keep every column alive so no component starts empty
        q = 0.99 * q + 0.01 / k
        return q
    raise ValueError(f"unknown init method {method!r}")


def fab_fit(
    x,
    cfg: FabConfig,
    init_resp=None,
    callback: Callable[[int, np.ndarray, GmmModel], None] | None = None,
) -> tuple[GmmModel, FitTrace]:
    """Fit a diagonal GMM by FAB-EM, pruning under-supported components.

    Each iteration runs the shrunken E-step, drops every component whose soft
    count is below ``cfg.threshold`` (renormalizing the responsibilities),
    runs the M-step and records the objective.  Iteration stops once a
    non-pruning iteration changes the objective by less than ``cfg.rel_tol``
    relative, or after ``cfg.max_iters``.  ``callback(iteration, q, model)``
    is called after every M-step, including once for the initial state as
    iteration 0.
    """
    x = as_dataset(x)
    floor = _resolve_floor(x, cfg.var_floor)
    if init_resp is None:
        q = init_responsibilities(x, cfg.k_init, cfg.seed, cfg.init)
    else:
        q = np.array(init_resp, dtype=float)
        if q.shape != (x.shape[0], cfg.k_init):
            raise ValueError(f"init_resp must have shape {(x.shape[0], cfg.k_init)}")
    ids = np.arange(cfg.k_init)
    model = fab_m_step(x, q, floor)
    if callback:
        callback(0, q, model)
    prev = fab_objective(x, q, model, cfg.d)
    trace = FitTrace(initial_objective=prev)
    threshold = cfg.threshold
    for it in range(1, cfg.max_iters + 1):
        log_q = _log_resp(x, model, cfg.d, q.sum(axis=0))
        nk = np.exp(log_q).sum(axis=0)
        drop = (nk < threshold) | (nk <= 0)
        if drop.all():
            drop[np.argmax(nk)] = False
        pruned = tuple(int(i) for i in ids[drop])
        if pruned:
            keep = ~drop
            log_q = log_q[:, keep]
            log_q = log_q - logsumexp(log_q, axis=1, keepdims=True)
            ids = ids[keep]
        q = np.exp(log_q)
        model = fab_m_step(x, q, floor)
        obj = fab_objective(x, q, model, cfg.d)
        trace.records.append(IterationRecord(it, obj, model.k, pruned))
        if callback:
            callback(it, q, model)
        if not pruned and abs(obj - prev) <= cfg.rel_tol * abs(prev):
            trace.converged = True
            break
        prev = obj
    return model, trace


def hard_labels(x, model: GmmModel) -> np.ndarray:
    """1-based MAP component of each row under plain (unshrunken) responsibilities."""
    x = as_dataset(x)
    logits = np.log(model.weights)[None, :] + model.log_pdf_matrix(x)
    return np.argmax(logits, axis=1) + 1


def model_to_dict(model: GmmModel, cfg: FabConfig, trace: FitTrace) -> dict:
    return {
        "k": model.k,
        "weights": model.weights.tolist(),
        "means": model.means.tolist(),
        "variances": model.variances.tolist(),
        "d": cfg.d,
        "seed": cfg.seed,
        "iterations": trace.iterations,
        "converged": trace.converged,
    }


def model_to_json(model: GmmModel, cfg: FabConfig, trace: FitTrace) -> str:
    return json.dumps(model_to_dict(model, cfg, trace), indent=2) + "\n"


def model_from_dict(doc: dict) -> GmmModel:
    return GmmModel(np.asarray(doc["weights"]), np.asarray(doc["means"]), np.asarray(doc["variances"]))
