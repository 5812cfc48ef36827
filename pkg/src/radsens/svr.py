"""Linear-kernel epsilon-insensitive support vector regression.

Training solves the dual

    min 0.5 (a - a*)' K (a - a*) + eps * sum(a + a*) - y' (a - a*)
    s.t. sum(a - a*) = 0,  0 <= a_i, a*_i <= C,  K = X X'

with SMO-style maximal-violating-pair updates. The per-sample dual
coefficients reported on the model are b_i = a_i - a*_i, each in [-C, C]
and summing to zero; the primal weights are w = X' b.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .selection import make_folds

DEFAULT_C_GRID = tuple(2.0**e for e in range(-10, 11))


@dataclass
class SvrConfig:
    C: float = 1.0
    epsilon: float = 0.1
    tol: float = 1e-3
    max_iter: int = 100_000

    def __post_init__(self) -> None:
        if self.C <= 0:
            raise ValueError(f"C must be > 0, got {self.C}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.tol <= 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")


@dataclass
class SvrModel:
    weights: np.ndarray
    bias: float
    dual_coefficients: np.ndarray  # a_i - a*_i per training sample
    config: SvrConfig
    support_indices: np.ndarray
    converged: bool = True
    iterations_used: int = 0

    def predict(self, X: np.ndarray) -> np.ndarray:
        return svr_predict(self, X)

    def to_json_obj(self):
        return {
            "weights": [float(w) for w in self.weights],
            "bias": float(self.bias),
            "config": {
                "C": self.config.C,
                "epsilon": self.config.epsilon,
                "tol": self.config.tol,
                "max_iter": self.config.max_iter,
            },
            "converged": self.converged,
        }

    def csv_columns(self):
        return ["feature_index", "weight"]

    def csv_rows(self):
        return [[j, float(w)] for j, w in enumerate(self.weights)]


@dataclass
class GridSearchResult:
    best_C: float
    scores: dict[float, float]  # C -> mean validation R^2

    def to_json_obj(self):
        return {
            "best_C": self.best_C,
            "scores": [{"C": c, "mean_r_squared": s} for c, s in sorted(self.scores.items())],
        }

    def csv_columns(self):
        return ["C", "mean_r_squared"]

    def csv_rows(self):
        return [[c, s] for c, s in sorted(self.scores.items())]


def svr_train(X: np.ndarray, y: np.ndarray, cfg: SvrConfig | None = None) -> SvrModel:
    """Train a linear epsilon-SVR to KKT tolerance ``cfg.tol``.

    Returns the model flagged ``converged=False`` if the maximal KKT
    violation is still above tolerance after ``cfg.max_iter`` pair updates.
    """
    cfg = cfg or SvrConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError(f"incompatible shapes X{X.shape}, y{y.shape}")
    n = X.shape[0]
    if n < 2:
        raise ValueError(f"svr_train requires at least 2 samples, got {n}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("inputs must be finite")

    C, eps = cfg.C, cfg.epsilon
    K = X @ X.T
    H = np.block([[K, -K], [-K, K]])
    u = np.concatenate([np.ones(n), -np.ones(n)])
    g = np.concatenate([eps - y, eps + y])  # gradient at z = 0
    z = np.zeros(2 * n)

    iterations = 0
    converged = False
    m = M = 0.0
    while True:
        v = -u * g
        at_upper = z >= C
        at_lower = z <= 0.0
        in_up = np.where(u > 0, ~at_upper, ~at_lower)
        in_low = np.where(u > 0, ~at_lower, ~at_upper)
        m = float(v[in_up].max()) if in_up.any() else -np.inf
        M = float(v[in_low].min()) if in_low.any() else np.inf
        if m - M <= cfg.tol:
            converged = True
            break
        if iterations >= cfg.max_iter:
            break
        i = int(np.flatnonzero(in_up)[np.argmax(v[in_up])])
        j = int(np.flatnonzero(in_low)[np.argmin(v[in_low])])
        a = H[i, i] + H[j, j] - 2.0 * u[i] * u[j] * H[i, j]
        t = (m - M) / max(a, 1e-12)
        cap_i = C - z[i] if u[i] > 0 else z[i]
        cap_j = z[j] if u[j] > 0 else C - z[j]
        t = min(t, cap_i, cap_j)
        # land exactly on the bound when a cap binds so the index leaves its set
        if t == cap_i:
            z[i] = C if u[i] > 0 else 0.0
        else:
            z[i] += u[i] * t
        if t == cap_j:
            z[j] = 0.0 if u[j] > 0 else C
        else:
            z[j] -= u[j] * t
        g += t * (u[i] * H[:, i] - u[j] * H[:, j])
        iterations += 1

    beta = z[:n] - z[n:]
    weights = X.T @ beta
    if np.isfinite(m) and np.isfinite(M):
        bias = 0.5 * (m + M)
    elif np.isfinite(m):
        bias = m
    elif np.isfinite(M):
        bias = M
    else:
        bias = float(y.mean())
    return SvrModel(
        weights=weights,
        bias=float(bias),
        dual_coefficients=beta,
        config=cfg,
        support_indices=np.flatnonzero(beta),
        converged=converged,
        iterations_used=iterations,
    )


def svr_predict(model: SvrModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.weights.shape[0]:
        raise ValueError(
            f"feature count {X.shape[1] if X.ndim == 2 else '?'} does not match "
            f"model dimension {model.weights.shape[0]}"
        )
    return X @ model.weights + model.bias


def extract_weights(model: SvrModel) -> np.ndarray:
    """Primal weight per feature, in the training gene order."""
    return model.weights.copy()


def grid_search_C(
    X: np.ndarray,
    y: np.ndarray,
    grid=None,
    folds: int = 3,
    seed: int = 0,
    epsilon: float = 0.1,
    tol: float = 1e-3,
    max_iter: int = 100_000,
) -> GridSearchResult:
    """Pick C by mean validation R^2 over seeded k-fold CV, ties to the smallest C."""
    from .evaluate import r_squared

    grid = list(DEFAULT_C_GRID) if grid is None else [float(c) for c in grid]
    if not grid:
        raise ValueError("C grid must be nonempty")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    if n < folds:
        raise ValueError(f"grid search requires n >= folds, got n={n}, folds={folds}")
    splits = make_folds(n, folds=folds, repeats=1, seed=seed)
    scores: dict[float, float] = {}
    for C in grid:
        fold_scores = []
        for train_idx, val_idx in splits:
            model = svr_train(
                X[train_idx], y[train_idx], SvrConfig(C=C, epsilon=epsilon, tol=tol, max_iter=max_iter)
            )
            fold_scores.append(r_squared(y[val_idx], svr_predict(model, X[val_idx])))
        scores[C] = float(np.mean(fold_scores))
    best = max(scores.values())
    best_C = min(c for c, s in scores.items() if s == best)
    return GridSearchResult(best_C=best_C, scores=scores)
