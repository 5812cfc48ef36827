"""Regression metrics and the outer cross-validation harness.

The harness runs folds x repeats outer iterations; in each one the SVR
regularization constant is grid-searched on the training portion with an
inner 3-fold CV whose seed is derived independently of the outer folds.
Aggregates are reported as the mean across iterations with a Student-t 95%
confidence interval (m - 1 degrees of freedom, sample standard deviation;
quantile from scipy.stats.t.ppf).
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .matrixio import AlignedDataset
from .selection import FeatureRanking, make_folds
from .svr import SvrConfig, grid_search_C, svr_predict, svr_train

_GRID_SEED_TAG = 101
_GLOBAL_GRID_TAG = 103


def child_seed(seed: int, tag: int, index: int = 0) -> int:
    """Deterministic sub-seed derivation via numpy's SeedSequence."""
    return int(np.random.SeedSequence([seed, tag, index]).generate_state(1)[0])


def r_squared(y: np.ndarray, yhat: np.ndarray) -> float:
    """Coefficient of determination; negative when predictions underperform the mean."""
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape or y.ndim != 1:
        raise ValueError(f"incompatible shapes {y.shape} and {yhat.shape}")
    if y.size < 2:
        raise ValueError("r_squared requires at least 2 samples")
    sst = float(((y - y.mean()) ** 2).sum())
    if sst == 0.0:
        raise ValueError("r_squared undefined for a constant label vector")
    sse = float(((y - yhat) ** 2).sum())
    return 1.0 - sse / sst


def rmse(y: np.ndarray, yhat: np.ndarray) -> float:
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape or y.ndim != 1:
        raise ValueError(f"incompatible shapes {y.shape} and {yhat.shape}")
    if y.size == 0:
        raise ValueError("rmse requires at least 1 sample")
    return float(np.sqrt(((y - yhat) ** 2).mean()))


def confidence_interval(samples, level: float = 0.95) -> tuple[float, float]:
    """Two-sided t interval for the mean: mean +/- t_{1-(1-level)/2, m-1} * sd / sqrt(m)."""
    samples = np.asarray(samples, dtype=float)
    m = samples.size
    if m < 2:
        raise ValueError("confidence interval requires at least 2 samples")
    if not (0.0 < level < 1.0):
        raise ValueError(f"level must be in (0, 1), got {level}")
    mean = float(samples.mean())
    sd = float(samples.std(ddof=1))
    half = float(stats.t.ppf(1.0 - (1.0 - level) / 2.0, m - 1)) * sd / np.sqrt(m)
    return mean - half, mean + half


@dataclass
class Metrics:
    r_squared: float
    rmse: float
    n: int

    def to_json_obj(self):
        return {"r_squared": self.r_squared, "rmse": self.rmse, "n": self.n}

    def csv_columns(self):
        return ["r_squared", "rmse", "n"]

    def csv_rows(self):
        return [[self.r_squared, self.rmse, self.n]]


@dataclass
class MetricSummary:
    mean: float
    ci_low: float
    ci_high: float
    raw: list[float]

    @classmethod
    def from_samples(cls, samples, level: float = 0.95) -> "MetricSummary":
        low, high = confidence_interval(samples, level)
        return cls(float(np.mean(samples)), low, high, [float(s) for s in samples])

    def to_json_obj(self):
        return {
            "mean": self.mean,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "raw": list(self.raw),
        }


@dataclass
class CvReport:
    r_squared: MetricSummary
    rmse: MetricSummary
    folds: int
    repeats: int
    gene_count: int
    omic: str
    seed: int

    def to_json_obj(self):
        return {
            "r_squared": self.r_squared.to_json_obj(),
            "rmse": self.rmse.to_json_obj(),
            "folds": self.folds,
            "repeats": self.repeats,
            "gene_count": self.gene_count,
            "omic": self.omic,
            "seed": self.seed,
        }

    def csv_columns(self):
        return ["iteration", "r_squared", "rmse"]

    def csv_rows(self):
        return [
            [i + 1, r2, e]
            for i, (r2, e) in enumerate(zip(self.r_squared.raw, self.rmse.raw))
        ]


@dataclass
class SweepRow:
    gene_count: int
    dataset: str
    mean_r_squared: float
    r_squared_ci: tuple[float, float]
    mean_rmse: float
    rmse_ci: tuple[float, float]


@dataclass
class SweepReport:
    rows: list[SweepRow]

    def to_json_obj(self):
        return {
            "rows": [
                {
                    "gene_count": r.gene_count,
                    "dataset": r.dataset,
                    "mean_r_squared": r.mean_r_squared,
                    "r_squared_ci_low": r.r_squared_ci[0],
                    "r_squared_ci_high": r.r_squared_ci[1],
                    "mean_rmse": r.mean_rmse,
                    "rmse_ci_low": r.rmse_ci[0],
                    "rmse_ci_high": r.rmse_ci[1],
                }
                for r in self.rows
            ]
        }

    def csv_columns(self):
        return [
            "gene_count",
            "dataset",
            "mean_r_squared",
            "r_squared_ci_low",
            "r_squared_ci_high",
            "mean_rmse",
            "rmse_ci_low",
            "rmse_ci_high",
        ]

    def csv_rows(self):
        return [
            [
                r.gene_count,
                r.dataset,
                r.mean_r_squared,
                r.r_squared_ci[0],
                r.r_squared_ci[1],
                r.mean_rmse,
                r.rmse_ci[0],
                r.rmse_ci[1],
            ]
            for r in self.rows
        ]


def _restrict(ds: AlignedDataset, genes) -> np.ndarray:
    pos = {g: i for i, g in enumerate(ds.gene_ids)}
    missing = [g for g in genes if g not in pos]
    if missing:
        raise ValueError(f"gene {missing[0]!r} not present in dataset")
    return ds.matrix.values[:, [pos[g] for g in genes]]


def _cv_iteration(args):
    (X, y, train_idx, val_idx, grid, inner_seed, epsilon, tol, fixed_C) = args
    if fixed_C is None:
        gs = grid_search_C(
            X[train_idx], y[train_idx], grid=grid, folds=3, seed=inner_seed,
            epsilon=epsilon, tol=tol,
        )
        C = gs.best_C
    else:
        C = fixed_C
    model = svr_train(X[train_idx], y[train_idx], SvrConfig(C=C, epsilon=epsilon, tol=tol))
    pred = svr_predict(model, X[val_idx])
    return r_squared(y[val_idx], pred), rmse(y[val_idx], pred)


def cross_validate(
    ds: AlignedDataset,
    genes,
    folds: int = 5,
    repeats: int = 10,
    seed: int = 0,
    epsilon: float = 0.1,
    grid=None,
    svr_tol: float = 1e-3,
    grid_mode: str = "nested",
    n_jobs: int = 1,
) -> CvReport:
    """Outer repeated-CV evaluation of an SVR on the listed genes.

    ``grid_mode='nested'`` (default) re-runs the C grid search inside every
    outer training fold; ``'global'`` searches once on the full dataset and
    reuses that C, mimicking a non-nested protocol.
    """
    genes = list(genes)
    X = _restrict(ds, genes)
    y = ds.labels
    if grid_mode not in ("nested", "global"):
        raise ValueError(f"grid_mode must be 'nested' or 'global', got {grid_mode!r}")
    fixed_C = None
    if grid_mode == "global":
        gs = grid_search_C(
            X, y, grid=grid, folds=3, seed=child_seed(seed, _GLOBAL_GRID_TAG),
            epsilon=epsilon, tol=svr_tol,
        )
        fixed_C = gs.best_C
    splits = make_folds(ds.n_samples, folds, repeats, seed)
    jobs = [
        (
            X,
            y,
            train_idx,
            val_idx,
            grid,
            child_seed(seed, _GRID_SEED_TAG, it),
            epsilon,
            svr_tol,
            fixed_C,
        )
        for it, (train_idx, val_idx) in enumerate(splits)
    ]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            outcomes = list(pool.map(_cv_iteration, jobs))
    else:
        outcomes = [_cv_iteration(job) for job in jobs]
    r2s = [o[0] for o in outcomes]
    errs = [o[1] for o in outcomes]
    return CvReport(
        r_squared=MetricSummary.from_samples(r2s),
        rmse=MetricSummary.from_samples(errs),
        folds=folds,
        repeats=repeats,
        gene_count=len(genes),
        omic=ds.provenance,
        seed=seed,
    )


def sweep_gene_count(
    ds: AlignedDataset,
    ranking: FeatureRanking,
    max_count: int = 20,
    folds: int = 5,
    repeats: int = 10,
    seed: int = 0,
    **cv_kwargs,
) -> SweepReport:
    """Evaluate the top-N ranked genes for N = 1..max_count."""
    ordered = ranking.genes()
    if len(ordered) < max_count:
        raise ValueError(
            f"ranking has {len(ordered)} entries, fewer than max_count={max_count}"
        )
    rows = []
    for count in range(1, max_count + 1):
        report = cross_validate(
            ds, ordered[:count], folds=folds, repeats=repeats, seed=seed, **cv_kwargs
        )
        rows.append(
            SweepRow(
                gene_count=count,
                dataset=ds.provenance,
                mean_r_squared=report.r_squared.mean,
                r_squared_ci=(report.r_squared.ci_low, report.r_squared.ci_high),
                mean_rmse=report.rmse.mean,
                rmse_ci=(report.rmse.ci_low, report.rmse.ci_high),
            )
        )
    return SweepReport(rows=rows)


def cross_evaluate(
    source: AlignedDataset,
    target: AlignedDataset,
    genes,
    seed: int = 0,
    epsilon: float = 0.1,
    grid=None,
    svr_tol: float = 1e-3,
) -> Metrics:
    """Train on every source sample and score predictions on the target dataset."""
    genes = list(genes)
    Xs = _restrict(source, genes)
    Xt = _restrict(target, genes)
    gs = grid_search_C(
        Xs, source.labels, grid=grid, folds=3,
        seed=child_seed(seed, _GLOBAL_GRID_TAG), epsilon=epsilon, tol=svr_tol,
    )
    model = svr_train(Xs, source.labels, SvrConfig(C=gs.best_C, epsilon=epsilon, tol=svr_tol))
    pred = svr_predict(model, Xt)
    return Metrics(
        r_squared=r_squared(target.labels, pred),
        rmse=rmse(target.labels, pred),
        n=target.n_samples,
    )
