"""L1-penalized least squares with an exact-support-size search.

The objective is (1/(2n)) * ||y_c - X b||^2 + lambda * ||b||_1 where y_c is
the label vector centered internally (the intercept is the label mean when
columns are standardized). The solver is cyclic coordinate descent with
soft-thresholding, with active-set sweeps between full passes. A geometric
bisection on lambda finds a fit with a requested number of non-zero
coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class LassoConfig:
    target_support: int = 30
    max_iter: int = 10_000
    tol: float = 1e-7  # max absolute coordinate change per full sweep
    lambda_bisection_steps: int = 60

    def __post_init__(self) -> None:
        if self.target_support < 1:
            raise ValueError(f"target_support must be >= 1, got {self.target_support}")
        if self.tol <= 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.lambda_bisection_steps < 1:
            raise ValueError(
                f"lambda_bisection_steps must be >= 1, got {self.lambda_bisection_steps}"
            )


@dataclass
class LassoFit:
    coefficients: np.ndarray
    lam: float
    support: np.ndarray  # indices of non-zero coefficients, ascending
    iterations_used: int
    converged: bool
    intercept: float = 0.0
    objective_trace: list[float] = field(default_factory=list, repr=False)
    truncated: bool = False
    trace: list[tuple[float, int, bool]] | None = field(default=None, repr=False)


@dataclass
class KktReport:
    """Stationarity check of a fit against the soft-thresholding optimality
    conditions: |x_j'r/n| <= lam for zero coefficients and x_j'r/n =
    lam*sign(b_j) for non-zeros, each within 10*tol."""

    max_violation: float
    violations: np.ndarray
    lam: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_violation <= 10.0 * self.tol


@dataclass
class LassoTrace:
    """Bisection trace of a support-targeted fit, one row per probed lambda."""

    probes: list[tuple[float, int, bool]]

    def to_json_obj(self):
        return {
            "probes": [
                {"lambda": lam, "support_size": size, "converged": conv}
                for lam, size, conv in self.probes
            ]
        }

    def csv_columns(self):
        return ["lambda", "support_size", "converged"]

    def csv_rows(self):
        return [[lam, size, conv] for lam, size, conv in self.probes]


def soft_threshold(value: float, threshold: float) -> float:
    if value > threshold:
        return value - threshold
    if value < -threshold:
        return value + threshold
    return 0.0


def _check_finite(X: np.ndarray, y: np.ndarray) -> None:
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
        raise ValueError("inputs must be finite")


def lambda_max(X: np.ndarray, y: np.ndarray) -> float:
    """Smallest penalty at which the solution is the zero vector: max_j |x_j'(y - y_bar)| / n."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    if n == 0:
        raise ValueError("lambda_max requires at least one sample")
    _check_finite(X, y)
    yc = y - y.mean()
    if X.shape[1] == 0:
        return 0.0
    return float(np.abs(X.T @ yc).max() / n)


def _kkt_violations(
    X: np.ndarray, residual: np.ndarray, beta: np.ndarray, lam: float, n: int
) -> np.ndarray:
    grad = X.T @ residual / n
    nonzero = beta != 0.0
    viol = np.maximum(np.abs(grad) - lam, 0.0)
    viol[nonzero] = np.abs(grad[nonzero] - lam * np.sign(beta[nonzero]))
    return viol


def lasso_fit(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    tol: float = 1e-7,
    max_iter: int = 10_000,
    beta0: np.ndarray | None = None,
) -> LassoFit:
    """Cyclic coordinate descent for the penalized least-squares objective.

    Convergence means the largest absolute coordinate change in a full sweep
    drops below ``tol`` and the KKT residual is within 10*tol; otherwise the
    fit comes back with ``converged=False``. ``beta0`` warm-starts the
    coefficients.
    """
    X = np.asfortranarray(X, dtype=float)  # column slices must be views
    y = np.asarray(y, dtype=float)
    _check_finite(X, y)
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    n, p = X.shape
    if n == 0:
        raise ValueError("lasso_fit requires at least one sample")
    intercept = float(y.mean())
    yc = y - intercept
    col_sq = (X * X).sum(axis=0) / n

    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=float)
    residual = yc - X @ beta
    objective_trace: list[float] = []
    sweeps = 0
    converged = False

    def sweep(indices) -> float:
        max_delta = 0.0
        for j in indices:
            cj = col_sq[j]
            if cj == 0.0:
                continue
            old = beta[j]
            xj = X[:, j]
            rho = float(xj @ residual) / n + cj * old
            new = soft_threshold(rho, lam) / cj
            if new != old:
                residual += xj * (old - new)
                beta[j] = new
                delta = abs(new - old)
                if delta > max_delta:
                    max_delta = delta
        return max_delta

    all_idx = range(p)
    while sweeps < max_iter:
        max_delta = sweep(all_idx)
        sweeps += 1
        objective_trace.append(
            float(residual @ residual) / (2 * n) + lam * float(np.abs(beta).sum())
        )
        if max_delta < tol:
            viol = _kkt_violations(X, residual, beta, lam, n)
            if viol.max(initial=0.0) <= 10.0 * tol:
                converged = True
                break
            # sweep criterion met but stationarity not yet tight enough
            continue
        # iterate on the active set until it stabilizes, then re-check all
        active = np.flatnonzero(beta)
        while sweeps < max_iter and active.size:
            if sweep(active) < tol:
                break
            sweeps += 1

    support = np.flatnonzero(beta)
    return LassoFit(
        coefficients=beta,
        lam=float(lam),
        support=support,
        iterations_used=sweeps,
        converged=converged,
        intercept=intercept,
        objective_trace=objective_trace,
    )


def verify_kkt(X: np.ndarray, y: np.ndarray, fit: LassoFit, tol: float = 1e-7) -> KktReport:
    """Independent stationarity audit of a fit; does not reuse solver state."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    yc = y - y.mean()
    residual = yc - X @ fit.coefficients
    viol = _kkt_violations(X, residual, fit.coefficients, fit.lam, n)
    return KktReport(
        max_violation=float(viol.max(initial=0.0)),
        violations=viol,
        lam=fit.lam,
        tol=tol,
    )


def fit_with_support(
    X: np.ndarray, y: np.ndarray, k: int, cfg: LassoConfig | None = None
) -> LassoFit:
    """Find a fit with exactly ``k`` non-zero coefficients by bisecting lambda.

    The search runs on log(lambda) over [lambda_max * 1e-4, lambda_max]. If
    the support size jumps past ``k`` at every probed lambda, the fit with
    the smallest support above ``k`` is truncated to its ``k`` largest
    absolute coefficients and flagged ``truncated=True``. If no probed
    lambda reaches a support of at least ``k``, the target is unattainable
    and a ValueError is raised.
    """
    cfg = cfg or LassoConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if not (1 <= k <= min(n - 1, p)):
        raise ValueError(f"target support {k} must be in [1, min(n-1, p)] = [1, {min(n - 1, p)}]")

    lam_hi = lambda_max(X, y)
    if lam_hi == 0.0:
        raise ValueError("labels are constant; no support size above 0 is attainable")
    trace: list[tuple[float, int, bool]] = []
    warm: np.ndarray | None = None
    best_over: LassoFit | None = None

    def probe(lam: float) -> LassoFit:
        nonlocal warm
        fit = lasso_fit(X, y, lam, tol=cfg.tol, max_iter=cfg.max_iter, beta0=warm)
        warm = fit.coefficients.copy()
        trace.append((float(lam), int(fit.support.size), fit.converged))
        return fit

    def consider_over(fit: LassoFit) -> None:
        nonlocal best_over
        if fit.support.size <= k:
            return
        if (
            best_over is None
            or fit.support.size < best_over.support.size
            or (fit.support.size == best_over.support.size and fit.lam > best_over.lam)
        ):
            best_over = fit

    hi_fit = probe(lam_hi)
    if hi_fit.support.size == k:
        hi_fit.trace = trace
        return hi_fit
    lo = lam_hi * 1e-4
    lo_fit = probe(lo)
    if lo_fit.support.size == k:
        lo_fit.trace = trace
        return lo_fit
    if lo_fit.support.size < k:
        raise ValueError(
            f"target support {k} unattainable: maximum achieved support is "
            f"{lo_fit.support.size} at lambda = {lo:.6g}"
        )
    consider_over(lo_fit)

    hi = lam_hi
    for _ in range(cfg.lambda_bisection_steps):
        mid = float(np.sqrt(lo * hi))
        fit = probe(mid)
        size = fit.support.size
        if size == k:
            fit.trace = trace
            return fit
        if size > k:
            consider_over(fit)
            lo = mid
        else:
            hi = mid

    # support sizes skipped k at every probe: keep the k strongest coefficients
    assert best_over is not None
    coef = best_over.coefficients.copy()
    order = np.lexsort((np.arange(p), -np.abs(coef)))
    keep = order[:k]
    truncated = np.zeros_like(coef)
    truncated[keep] = coef[keep]
    return LassoFit(
        coefficients=truncated,
        lam=best_over.lam,
        support=np.sort(keep),
        iterations_used=best_over.iterations_used,
        converged=best_over.converged,
        intercept=best_over.intercept,
        objective_trace=best_over.objective_trace,
        truncated=True,
        trace=trace,
    )
