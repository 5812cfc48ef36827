"""Seeded synthetic paired-omics data with planted sparse signals.

Generation is fully determined by the seed through numpy's PCG64 generator.
Gene columns are drawn i.i.d. standard normal for the first omic; the
second omic shares those latent values per gene at correlation
``cross_omic_rho``. Labels are a sparse linear function of the planted
columns plus Gaussian noise, then mapped affinely into (0, 1] so they obey
the SF2 range; the map is affine, so support structure for the sparse
solvers is preserved up to scale.

The module also hosts two desk-scale reference optimizers used to audit the
production solvers: an exhaustive sign-pattern enumeration for the
penalized least-squares objective (p <= 12) and a projected-gradient dual
solve for the epsilon-SVR (n <= 10) with a duality-gap certificate.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .matrixio import AlignedDataset, ExpressionMatrix, LabelTable
from .svr import SvrConfig, SvrModel


@dataclass
class SynthConfig:
    n_samples_a: int = 73
    n_samples_b: int = 46
    n_genes: int = 500
    n_signal: int = 10
    signal_magnitude: float = 1.0
    noise_sd: float = 0.1
    cross_omic_rho: float = 0.4
    missing_rate: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_samples_a < 1 or self.n_samples_b < 1:
            raise ValueError("sample counts must be positive")
        if self.n_genes < 1:
            raise ValueError("n_genes must be positive")
        if not (0 <= self.n_signal <= self.n_genes):
            raise ValueError(
                f"n_signal must be in [0, n_genes], got {self.n_signal} of {self.n_genes}"
            )
        if self.noise_sd < 0:
            raise ValueError(f"noise_sd must be >= 0, got {self.noise_sd}")
        if not (-1.0 <= self.cross_omic_rho <= 1.0):
            raise ValueError(f"cross_omic_rho must be in [-1, 1], got {self.cross_omic_rho}")
        if not (0.0 <= self.missing_rate < 1.0):
            raise ValueError(f"missing_rate must be in [0, 1), got {self.missing_rate}")


@dataclass
class SynthTruth:
    planted_genes: list[str]
    coefficients: np.ndarray  # full-length true coefficient vector
    description: str


def _squash_unit_interval(y: np.ndarray) -> np.ndarray:
    lo, hi = float(y.min()), float(y.max())
    if hi == lo:
        return np.full_like(y, 0.5)
    return 0.05 + 0.9 * (y - lo) / (hi - lo)


def _inject_missing(values: np.ndarray, rate: float, rng) -> np.ndarray:
    mask = rng.random(values.shape) < rate
    values[mask] = np.nan
    return mask


def generate(cfg: SynthConfig) -> tuple[AlignedDataset, AlignedDataset, SynthTruth]:
    """Build two aligned datasets sharing cell lines and a known sparse signal.

    The first dataset carries the exact latent design; planted coefficient
    magnitudes grow as magnitude * (1 + i/2) with alternating signs, so they
    stay well separated for recovery checks.
    """
    rng = np.random.default_rng(cfg.seed)
    pool = max(cfg.n_samples_a, cfg.n_samples_b)
    sample_ids = [f"CL{i + 1:04d}" for i in range(pool)]
    width = max(3, len(str(cfg.n_genes)))
    gene_ids = [f"G{j + 1:0{width}d}" for j in range(cfg.n_genes)]

    latent = rng.standard_normal((pool, cfg.n_genes))
    planted = np.sort(rng.choice(cfg.n_genes, size=cfg.n_signal, replace=False))
    coef = np.zeros(cfg.n_genes)
    for rank, j in enumerate(planted):
        coef[j] = cfg.signal_magnitude * (1.0 + 0.5 * rank) * (1 if rank % 2 == 0 else -1)
    y_raw = latent @ coef + cfg.noise_sd * rng.standard_normal(pool)
    y = _squash_unit_interval(y_raw)

    rho = cfg.cross_omic_rho
    other_noise = rng.standard_normal((cfg.n_samples_b, cfg.n_genes))
    values_a = latent[: cfg.n_samples_a].copy()
    values_b = (
        rho * latent[: cfg.n_samples_b]
        + np.sqrt(max(0.0, 1.0 - rho * rho)) * other_noise
    )

    mask_a = _inject_missing(values_a, cfg.missing_rate, rng)
    mask_b = _inject_missing(values_b, cfg.missing_rate, rng)

    a = AlignedDataset(
        ExpressionMatrix(sample_ids[: cfg.n_samples_a], gene_ids, values_a, mask_a),
        y[: cfg.n_samples_a],
        "transcriptome",
    )
    b = AlignedDataset(
        ExpressionMatrix(sample_ids[: cfg.n_samples_b], gene_ids, values_b, mask_b),
        y[: cfg.n_samples_b],
        "proteome",
    )
    truth = SynthTruth(
        planted_genes=[gene_ids[j] for j in planted],
        coefficients=coef,
        description=(
            f"{cfg.n_signal}-sparse linear signal over {cfg.n_genes} genes, "
            f"noise sd {cfg.noise_sd}, cross-omic rho {rho}, seed {cfg.seed}"
        ),
    )
    return a, b, truth


def label_table(ds: AlignedDataset) -> LabelTable:
    return LabelTable(dict(zip(ds.sample_ids, ds.labels)))


# --- reference optimizers ----------------------------------------------------


def oracle_lasso(X: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Global optimum of (1/(2n))||y_c - X b||^2 + lam*||b||_1 by enumeration.

    Every support set and sign pattern yields one stationary candidate from
    a restricted linear solve; the candidate with the lowest objective is
    the optimum because the pattern of the true solution is among them.
    Only practical for p <= 12.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if p > 12:
        raise ValueError(f"exhaustive enumeration limited to p <= 12, got p={p}")
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    yc = y - y.mean()
    gram = X.T @ X / n
    rhs_full = X.T @ yc / n

    def objective(beta: np.ndarray) -> float:
        r = yc - X @ beta
        return float(r @ r) / (2 * n) + lam * float(np.abs(beta).sum())

    best = np.zeros(p)
    best_obj = objective(best)
    for size in range(1, p + 1):
        for support in itertools.combinations(range(p), size):
            idx = np.array(support)
            sub = gram[np.ix_(idx, idx)]
            if lam == 0.0:
                signs = np.zeros((size, 1))
            else:
                signs = np.array(
                    list(itertools.product((1.0, -1.0), repeat=size))
                ).T
            rhs = rhs_full[idx][:, None] - lam * signs
            try:
                candidates = np.linalg.solve(sub, rhs)
            except np.linalg.LinAlgError:
                candidates, _, _, _ = np.linalg.lstsq(sub, rhs, rcond=None)
            residuals = yc[:, None] - X[:, idx] @ candidates
            objs = (residuals**2).sum(axis=0) / (2 * n) + lam * np.abs(candidates).sum(axis=0)
            pick = int(np.argmin(objs))
            if objs[pick] < best_obj:
                best_obj = float(objs[pick])
                best = np.zeros(p)
                best[idx] = candidates[:, pick]
    return best


def _project_box_hyperplane(z: np.ndarray, u: np.ndarray, C: float) -> np.ndarray:
    """Euclidean projection onto {0 <= w <= C, u'w = 0} with u in {+-1}^m."""

    def shifted(theta: float) -> np.ndarray:
        return np.clip(z - theta * u, 0.0, C)

    lo, hi = -(np.abs(z).max() + C + 1.0), np.abs(z).max() + C + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if u @ shifted(mid) > 0:
            lo = mid
        else:
            hi = mid
    return shifted(0.5 * (lo + hi))


def _optimal_bias(residuals: np.ndarray, epsilon: float, C: float) -> float:
    """Exact minimizer over b of C * sum(max(0, |r_i - b| - eps))."""
    breakpoints = np.concatenate([residuals - epsilon, residuals + epsilon])

    def loss(b: float) -> float:
        return float(np.maximum(np.abs(residuals - b) - epsilon, 0.0).sum()) * C

    values = [loss(b) for b in breakpoints]
    return float(breakpoints[int(np.argmin(values))])


def oracle_svr(
    X: np.ndarray, y: np.ndarray, C: float, epsilon: float, max_iter: int = 200_000
) -> SvrModel:
    """Reference epsilon-SVR via accelerated projected gradient on the dual.

    Runs until the primal-dual gap certifies the dual objective within 1e-8
    of optimal (or the iteration cap). Restricted to n <= 10.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    if n > 10:
        raise ValueError(f"oracle limited to n <= 10, got n={n}")
    if n < 2:
        raise ValueError("oracle requires at least 2 samples")
    K = X @ X.T
    H = np.block([[K, -K], [-K, K]])
    u = np.concatenate([np.ones(n), -np.ones(n)])
    p_lin = np.concatenate([epsilon - y, epsilon + y])
    eigs = np.linalg.eigvalsh(K)
    L = max(2.0 * float(eigs[-1]), 1e-12)

    def dual_value(z: np.ndarray) -> float:
        return 0.5 * float(z @ (H @ z)) + float(p_lin @ z)

    def primal_gap(z: np.ndarray) -> tuple[float, float]:
        beta = z[:n] - z[n:]
        w = X.T @ beta
        b = _optimal_bias(y - X @ w, epsilon, C)
        slack = np.maximum(np.abs(y - X @ w - b) - epsilon, 0.0)
        primal = 0.5 * float(w @ w) + C * float(slack.sum())
        return primal, primal - (-dual_value(z))

    z = np.zeros(2 * n)
    momentum = z.copy()
    tk = 1.0
    converged = False
    for it in range(max_iter):
        grad = H @ momentum + p_lin
        z_new = _project_box_hyperplane(momentum - grad / L, u, C)
        if dual_value(z_new) > dual_value(z):  # monotone restart
            grad = H @ z + p_lin
            z_new = _project_box_hyperplane(z - grad / L, u, C)
            tk = 1.0
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
        momentum = z_new + ((tk - 1.0) / t_next) * (z_new - z)
        z, tk = z_new, t_next
        if it % 50 == 0:
            primal, gap = primal_gap(z)
            if gap <= 1e-8 * max(1.0, abs(primal)):
                converged = True
                break

    beta = z[:n] - z[n:]
    w = X.T @ beta
    free = (np.abs(beta) > 1e-9 * C) & (np.abs(beta) < C * (1 - 1e-9))
    residual = y - X @ w
    if free.any():
        b = float(np.mean(residual[free] - epsilon * np.sign(beta[free])))
    else:
        b = _optimal_bias(residual, epsilon, C)
    return SvrModel(
        weights=w,
        bias=b,
        dual_coefficients=beta,
        config=SvrConfig(C=C, epsilon=epsilon),
        support_indices=np.flatnonzero(beta),
        converged=converged,
        iterations_used=max_iter,
    )
