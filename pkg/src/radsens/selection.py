"""Frequency-based gene ranking over repeated cross-validation.

Each of folds x repeats iterations fits a support-targeted Lasso on the
training portion of the fold, keeps the ``top_per_iter`` features with the
largest absolute coefficients, and counts them once. The final importance
score of a gene is its selection frequency (count / iterations), with ties
broken by mean absolute coefficient and then gene id.

Fold shuffling uses numpy's PCG64 generator seeded directly with the given
seed, so fold lists are reproducible across platforms.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .lasso import LassoConfig, fit_with_support
from .matrixio import AlignedDataset


@dataclass
class SelectionConfig:
    folds: int = 5
    repeats: int = 10
    support_k: int = 30
    top_per_iter: int = 20
    final_count: int = 20
    seed: int = 0
    lasso: LassoConfig | None = None

    def __post_init__(self) -> None:
        if self.folds < 2:
            raise ValueError(f"folds must be >= 2, got {self.folds}")
        if self.repeats < 1:
            raise ValueError(f"repeats must be >= 1, got {self.repeats}")
        if self.top_per_iter > self.support_k:
            raise ValueError(
                f"top_per_iter ({self.top_per_iter}) cannot exceed support_k ({self.support_k})"
            )
        if self.final_count < 1:
            raise ValueError(f"final_count must be >= 1, got {self.final_count}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")

    @property
    def iterations(self) -> int:
        return self.folds * self.repeats


@dataclass
class RankedGene:
    gene_id: str
    importance: float
    selection_count: int
    mean_abs_coefficient: float


@dataclass
class FeatureRanking:
    entries: list[RankedGene]
    iterations: int

    def genes(self) -> list[str]:
        return [e.gene_id for e in self.entries]

    def to_json_obj(self):
        return {
            "iterations": self.iterations,
            "entries": [
                {
                    "rank": i + 1,
                    "gene_id": e.gene_id,
                    "importance": e.importance,
                    "selection_count": e.selection_count,
                    "mean_abs_coefficient": e.mean_abs_coefficient,
                }
                for i, e in enumerate(self.entries)
            ],
        }

    def csv_columns(self):
        return ["rank", "gene_id", "importance", "selection_count", "mean_abs_coefficient"]

    def csv_rows(self):
        return [
            [i + 1, e.gene_id, e.importance, e.selection_count, e.mean_abs_coefficient]
            for i, e in enumerate(self.entries)
        ]


@dataclass
class OverlapReport:
    """Genes shared between two rankings, with their 1-based rank in each."""

    shared: list[tuple[str, int, int]]

    def to_json_obj(self):
        return {
            "shared": [
                {"gene_id": g, "rank_a": ra, "rank_b": rb} for g, ra, rb in self.shared
            ]
        }

    def csv_columns(self):
        return ["gene_id", "rank_a", "rank_b"]

    def csv_rows(self):
        return [[g, ra, rb] for g, ra, rb in self.shared]


def make_folds(
    n: int, folds: int = 5, repeats: int = 10, seed: int = 0
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Seeded (train, validation) index pairs: ``repeats`` shuffled partitions
    of range(n) into ``folds`` blocks whose sizes differ by at most one."""
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    if n < folds:
        raise ValueError(f"need at least as many samples as folds, got n={n} < {folds}")
    rng = np.random.default_rng(seed)
    out: list[tuple[np.ndarray, np.ndarray]] = []
    base, extra = divmod(n, folds)
    for _ in range(repeats):
        perm = rng.permutation(n)
        start = 0
        for f in range(folds):
            size = base + (1 if f < extra else 0)
            val = np.sort(perm[start : start + size])
            train = np.sort(np.concatenate([perm[:start], perm[start + size :]]))
            out.append((train, val))
            start += size
    return out


def _rank_iteration(
    X: np.ndarray,
    y: np.ndarray,
    train_idx: np.ndarray,
    gene_ids: list[str],
    support_k: int,
    top_per_iter: int,
    lasso_cfg: LassoConfig,
) -> tuple[list[tuple[int, float]], list]:
    fit = fit_with_support(X[train_idx], y[train_idx], support_k, lasso_cfg)
    candidates = sorted(
        fit.support.tolist(),
        key=lambda j: (-abs(fit.coefficients[j]), gene_ids[j]),
    )
    picked = [(j, abs(fit.coefficients[j])) for j in candidates[:top_per_iter]]
    return picked, fit.trace


def _iteration_job(args):
    return _rank_iteration(*args)


def select_features(
    ds: AlignedDataset,
    cfg: SelectionConfig | None = None,
    keep_all: bool = False,
    n_jobs: int = 1,
    trace_sink: list | None = None,
) -> FeatureRanking:
    """Run the repeated-CV Lasso harness and rank genes by selection frequency.

    Returns the ``final_count`` top entries; ``keep_all`` instead returns
    every gene that was selected at least once. ``trace_sink``, when given,
    collects each iteration's lambda-bisection trace. Identical inputs and
    seed produce an identical ranking.
    """
    cfg = cfg or SelectionConfig()
    X = ds.matrix.values
    y = ds.labels
    gene_ids = ds.gene_ids
    lasso_cfg = cfg.lasso or LassoConfig(target_support=cfg.support_k)
    splits = make_folds(ds.n_samples, cfg.folds, cfg.repeats, cfg.seed)

    counts = np.zeros(len(gene_ids), dtype=int)
    abs_sums = np.zeros(len(gene_ids))
    jobs = [
        (X, y, train_idx, gene_ids, cfg.support_k, cfg.top_per_iter, lasso_cfg)
        for train_idx, _ in splits
    ]
    results = []
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            futures = [pool.submit(_iteration_job, job) for job in jobs]
            for it, fut in enumerate(futures):
                try:
                    results.append(fut.result())
                except ValueError as exc:
                    raise ValueError(f"selection iteration {it}: {exc}") from exc
    else:
        for it, job in enumerate(jobs):
            try:
                results.append(_iteration_job(job))
            except ValueError as exc:
                raise ValueError(f"selection iteration {it}: {exc}") from exc
    for picked, trace in results:
        if trace_sink is not None:
            trace_sink.append(trace)
        for j, coef_abs in picked:
            counts[j] += 1
            abs_sums[j] += coef_abs

    selected = np.flatnonzero(counts)
    entries = [
        RankedGene(
            gene_id=gene_ids[j],
            importance=counts[j] / cfg.iterations,
            selection_count=int(counts[j]),
            mean_abs_coefficient=float(abs_sums[j] / counts[j]),
        )
        for j in selected
    ]
    entries.sort(key=lambda e: (-e.importance, -e.mean_abs_coefficient, e.gene_id))
    if not keep_all:
        entries = entries[: cfg.final_count]
    return FeatureRanking(entries=entries, iterations=cfg.iterations)


def ranking_overlap(a: FeatureRanking, b: FeatureRanking) -> OverlapReport:
    """Intersection of two rankings with the 1-based rank of each shared gene."""
    rank_b = {e.gene_id: i + 1 for i, e in enumerate(b.entries)}
    shared = [
        (e.gene_id, i + 1, rank_b[e.gene_id])
        for i, e in enumerate(a.entries)
        if e.gene_id in rank_b
    ]
    return OverlapReport(shared=shared)
