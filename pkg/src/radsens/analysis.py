"""Correlation and collinearity diagnostics plus clonogenic-assay utilities.

Correlation thresholds for substitution candidates are applied to absolute
Pearson coefficients. The pairwise heatmap summary excludes the diagonal.
Survival-curve fitting is linear least squares of log survival on dose and
dose squared with no intercept, so the fitted curve is exp(-(a*d + b*d^2))
and passes through 1 at dose zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .matrixio import AlignedDataset


@dataclass
class CorrelationRecord:
    gene_id: str
    r: float
    n: int

    def __post_init__(self) -> None:
        if abs(self.r) > 1.0 + 1e-12:
            raise ValueError(f"correlation {self.r} out of [-1, 1] for {self.gene_id!r}")


@dataclass
class CorrelationReport:
    records: list[CorrelationRecord]
    median_r: float | None = None

    def to_json_obj(self):
        obj = {
            "records": [
                {"gene_id": c.gene_id, "r": c.r, "n": c.n} for c in self.records
            ]
        }
        if self.median_r is not None:
            obj["median_r"] = self.median_r
        return obj

    def csv_columns(self):
        return ["gene_id", "r", "n"]

    def csv_rows(self):
        return [[c.gene_id, c.r, c.n] for c in self.records]


@dataclass
class SubstitutionRow:
    selected_gene: str
    substitute_gene: str
    r_to_gene: float
    r_to_label: float


@dataclass
class SubstitutionTable:
    rows: list[SubstitutionRow]
    r_gene_threshold: float = 0.4
    r_label_threshold: float = 0.2

    def __post_init__(self) -> None:
        for row in self.rows:
            if abs(row.r_to_gene) < self.r_gene_threshold or abs(row.r_to_label) < self.r_label_threshold:
                raise ValueError(
                    f"substitution row {row.substitute_gene!r} violates thresholds"
                )

    def to_json_obj(self):
        return {
            "r_gene_threshold": self.r_gene_threshold,
            "r_label_threshold": self.r_label_threshold,
            "rows": [
                {
                    "selected_gene": r.selected_gene,
                    "substitute_gene": r.substitute_gene,
                    "r_to_gene": r.r_to_gene,
                    "r_to_label": r.r_to_label,
                }
                for r in self.rows
            ],
        }

    def csv_columns(self):
        return ["selected_gene", "substitute_gene", "r_to_gene", "r_to_label"]

    def csv_rows(self):
        return [
            [r.selected_gene, r.substitute_gene, r.r_to_gene, r.r_to_label]
            for r in self.rows
        ]


@dataclass
class VifRecord:
    gene_id: str
    vif: float  # math.inf flags perfect collinearity

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.vif)


@dataclass
class VifReport:
    records: list[VifRecord]

    def to_json_obj(self):
        return {
            "records": [{"gene_id": r.gene_id, "vif": r.vif} for r in self.records]
        }

    def csv_columns(self):
        return ["gene_id", "vif"]

    def csv_rows(self):
        return [[r.gene_id, r.vif] for r in self.records]


@dataclass
class HeatmapStats:
    gene_ids: list[str]
    matrix: np.ndarray  # k x k symmetric Pearson matrix, unit diagonal
    mean_abs_offdiag: float
    sd_abs_offdiag: float
    histogram: list[int]  # signed r of the upper triangle, 20 bins over [-1, 1]
    bin_edges: list[float]

    def to_json_obj(self):
        return {
            "gene_ids": list(self.gene_ids),
            "matrix": [[float(v) for v in row] for row in self.matrix],
            "mean_abs_offdiag": self.mean_abs_offdiag,
            "sd_abs_offdiag": self.sd_abs_offdiag,
            "histogram": list(self.histogram),
            "bin_edges": list(self.bin_edges),
        }

    def csv_columns(self):
        return ["gene_a", "gene_b", "r"]

    def csv_rows(self):
        rows = []
        k = len(self.gene_ids)
        for i in range(k):
            for j in range(i + 1, k):
                rows.append([self.gene_ids[i], self.gene_ids[j], float(self.matrix[i, j])])
        return rows


@dataclass
class LqFit:
    alpha: float  # per Gy
    beta: float  # per Gy^2
    sf2: float
    residual_sse: float

    def to_json_obj(self):
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "sf2": self.sf2,
            "residual_sse": self.residual_sse,
        }

    def csv_columns(self):
        return ["alpha", "beta", "sf2", "residual_sse"]

    def csv_rows(self):
        return [[self.alpha, self.beta, self.sf2, self.residual_sse]]


def pearson(x, y) -> float:
    """Sample Pearson correlation of two equal-length, non-constant vectors."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"incompatible shapes {x.shape} and {y.shape}")
    if x.size < 3:
        raise ValueError("pearson requires at least 3 samples")
    xc = x - x.mean()
    yc = y - y.mean()
    nx = float(np.linalg.norm(xc))
    ny = float(np.linalg.norm(yc))
    if nx == 0.0 or ny == 0.0:
        raise ValueError("pearson undefined for a constant vector")
    return float(xc @ yc / (nx * ny))


def _unit_columns(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    centered = values - values.mean(axis=0, keepdims=True)
    norms = np.linalg.norm(centered, axis=0)
    ok = norms > 0
    safe = np.where(ok, norms, 1.0)
    return centered / safe, ok


def rna_protein_concordance(
    t: AlignedDataset, p: AlignedDataset
) -> CorrelationReport:
    """Per-gene Pearson correlation between the two omics over shared samples.

    Both datasets are restricted to their common sample ids before
    correlating; genes constant within the shared subset are omitted from
    the report. The summary statistic is the median r.
    """
    if t.gene_ids != p.gene_ids:
        raise ValueError("concordance requires identical gene lists in identical order")
    shared = sorted(set(t.sample_ids) & set(p.sample_ids))
    if len(shared) < 3:
        raise ValueError(
            f"concordance requires at least 3 shared samples, got {len(shared)}"
        )
    pos_t = {s: i for i, s in enumerate(t.sample_ids)}
    pos_p = {s: i for i, s in enumerate(p.sample_ids)}
    vt = t.matrix.values[[pos_t[s] for s in shared], :]
    vp = p.matrix.values[[pos_p[s] for s in shared], :]
    ut, ok_t = _unit_columns(vt)
    up, ok_p = _unit_columns(vp)
    rs = (ut * up).sum(axis=0)
    ok = ok_t & ok_p
    records = [
        CorrelationRecord(gene_id=g, r=float(np.clip(rs[j], -1.0, 1.0)), n=len(shared))
        for j, g in enumerate(t.gene_ids)
        if ok[j]
    ]
    if not records:
        raise ValueError("no gene had variance in both omics over the shared samples")
    median = float(np.median([c.r for c in records]))
    return CorrelationReport(records=records, median_r=median)


def gene_label_correlations(ds: AlignedDataset, genes) -> list[CorrelationRecord]:
    """Pearson r of each listed gene against the SF2 label vector.

    Negative values mark genes whose higher expression tracks lower SF2,
    the radioresistance direction.
    """
    pos = {g: i for i, g in enumerate(ds.gene_ids)}
    records = []
    for gene in genes:
        if gene not in pos:
            raise ValueError(f"gene {gene!r} not present in dataset")
        r = pearson(ds.matrix.values[:, pos[gene]], ds.labels)
        records.append(CorrelationRecord(gene_id=gene, r=r, n=ds.n_samples))
    return records


def substitution_candidates(
    ds: AlignedDataset,
    selected_genes,
    r_gene: float = 0.4,
    r_label: float = 0.2,
    pool=None,
) -> SubstitutionTable:
    """Non-selected genes that could stand in for a selected gene.

    A pool gene qualifies when |r| to the selected gene reaches ``r_gene``
    and |r| to the label vector reaches ``r_label``. Rows are grouped by
    selected gene and sorted by |r to gene| descending.
    """
    selected_genes = list(selected_genes)
    selected_set = set(selected_genes)
    pos = {g: i for i, g in enumerate(ds.gene_ids)}
    for gene in selected_genes:
        if gene not in pos:
            raise ValueError(f"selected gene {gene!r} not present in dataset")
    if pool is None:
        pool = [g for g in ds.gene_ids if g not in selected_set]
    else:
        pool = list(pool)
        overlap = selected_set & set(pool)
        if overlap:
            raise ValueError(f"pool and selected genes overlap: {sorted(overlap)[:5]}")
        for gene in pool:
            if gene not in pos:
                raise ValueError(f"pool gene {gene!r} not present in dataset")

    values = ds.matrix.values
    units, ok = _unit_columns(values)
    yc = ds.labels - ds.labels.mean()
    ny = float(np.linalg.norm(yc))
    if ny == 0.0:
        raise ValueError("label vector is constant")
    yu = yc / ny
    label_r = units.T @ yu

    rows: list[SubstitutionRow] = []
    pool_idx = np.array([pos[g] for g in pool], dtype=int)
    for gene in selected_genes:
        gj = pos[gene]
        if not ok[gj]:
            raise ValueError(f"selected gene {gene!r} is constant")
        gene_r = units[:, pool_idx].T @ units[:, gj]
        hits = []
        for g, idx, r_g in zip(pool, pool_idx, gene_r):
            if not ok[idx]:
                continue
            if abs(r_g) >= r_gene and abs(label_r[idx]) >= r_label:
                hits.append(
                    SubstitutionRow(
                        selected_gene=gene,
                        substitute_gene=g,
                        r_to_gene=float(r_g),
                        r_to_label=float(label_r[idx]),
                    )
                )
        hits.sort(key=lambda row: (-abs(row.r_to_gene), row.substitute_gene))
        rows.extend(hits)
    return SubstitutionTable(rows=rows, r_gene_threshold=r_gene, r_label_threshold=r_label)


def vif(ds: AlignedDataset, genes) -> list[VifRecord]:
    """Variance inflation factor 1/(1 - R_j^2) per gene.

    R_j^2 comes from regressing gene j on the other listed genes with an
    intercept. Perfect collinearity is reported as an infinite VIF.
    """
    genes = list(genes)
    k = len(genes)
    if k < 2:
        raise ValueError("vif requires at least 2 genes")
    n = ds.n_samples
    if n <= k:
        raise ValueError(f"vif requires more samples than genes, got n={n}, k={k}")
    pos = {g: i for i, g in enumerate(ds.gene_ids)}
    for gene in genes:
        if gene not in pos:
            raise ValueError(f"gene {gene!r} not present in dataset")
    cols = ds.matrix.values[:, [pos[g] for g in genes]]
    records = []
    for j, gene in enumerate(genes):
        target = cols[:, j]
        tss = float(((target - target.mean()) ** 2).sum())
        if tss == 0.0:
            raise ValueError(f"gene {gene!r} is constant; VIF undefined")
        design = np.column_stack(
            [np.ones(n), cols[:, [c for c in range(k) if c != j]]]
        )
        coef, _, _, _ = np.linalg.lstsq(design, target, rcond=None)
        rss = float(((target - design @ coef) ** 2).sum())
        if rss <= 1e-12 * tss:
            records.append(VifRecord(gene_id=gene, vif=math.inf))
        else:
            records.append(VifRecord(gene_id=gene, vif=tss / rss))
    return records


def pairwise_heatmap_stats(ds: AlignedDataset, genes) -> HeatmapStats:
    """Pairwise Pearson matrix of the listed genes with off-diagonal summaries."""
    genes = list(genes)
    k = len(genes)
    if k < 2:
        raise ValueError("heatmap requires at least 2 genes")
    pos = {g: i for i, g in enumerate(ds.gene_ids)}
    for gene in genes:
        if gene not in pos:
            raise ValueError(f"gene {gene!r} not present in dataset")
    cols = ds.matrix.values[:, [pos[g] for g in genes]]
    units, ok = _unit_columns(cols)
    if not ok.all():
        gene = genes[int(np.argmin(ok))]
        raise ValueError(f"gene {gene!r} is constant")
    corr = np.clip(units.T @ units, -1.0, 1.0)
    corr = (corr + corr.T) / 2.0
    np.fill_diagonal(corr, 1.0)
    upper = corr[np.triu_indices(k, 1)]
    abs_upper = np.abs(upper)
    sd = float(abs_upper.std(ddof=1)) if abs_upper.size > 1 else 0.0
    counts, edges = np.histogram(upper, bins=20, range=(-1.0, 1.0))
    return HeatmapStats(
        gene_ids=genes,
        matrix=corr,
        mean_abs_offdiag=float(abs_upper.mean()),
        sd_abs_offdiag=sd,
        histogram=[int(c) for c in counts],
        bin_edges=[float(e) for e in edges],
    )


def plating_efficiency(control_colonies: float, control_plated: float) -> float:
    """Fraction of unirradiated plated cells that formed colonies."""
    if control_plated <= 0:
        raise ValueError("control plated count must be positive")
    if control_colonies < 0:
        raise ValueError("colony count cannot be negative")
    return control_colonies / control_plated


def clonogenic_sf(colonies: float, plated: float, pe: float) -> float:
    """Surviving fraction: colonies / (plated * plating efficiency)."""
    if plated <= 0:
        raise ValueError("plated count must be positive")
    if pe <= 0:
        raise ValueError("plating efficiency must be positive")
    if colonies < 0:
        raise ValueError("colony count cannot be negative")
    return colonies / (plated * pe)


def lq_fit(doses, survivals) -> LqFit:
    """Fit survival = exp(-(alpha*d + beta*d^2)) by least squares on log survival.

    Zero-dose points carry no information for the no-intercept log fit and
    are excluded; at least two distinct positive doses are required, each
    with survival in (0, 1].
    """
    doses = np.asarray(doses, dtype=float)
    survivals = np.asarray(survivals, dtype=float)
    if doses.shape != survivals.shape or doses.ndim != 1:
        raise ValueError(f"incompatible shapes {doses.shape} and {survivals.shape}")
    if (survivals <= 0.0).any():
        raise ValueError("survival fractions must be positive (log undefined at 0)")
    if (survivals > 1.0).any():
        raise ValueError("survival fractions must be at most 1")
    positive = doses > 0
    d = doses[positive]
    s = survivals[positive]
    if np.unique(d).size < 2:
        raise ValueError("need at least 2 distinct positive doses")
    design = np.column_stack([d, d**2])
    target = -np.log(s)
    coef, _, _, _ = np.linalg.lstsq(design, target, rcond=None)
    alpha, beta = float(coef[0]), float(coef[1])
    sse = float(((target - design @ coef) ** 2).sum())
    return LqFit(
        alpha=alpha,
        beta=beta,
        sf2=math.exp(-(2.0 * alpha + 4.0 * beta)),
        residual_sse=sse,
    )


def sf_at_dose(fit: LqFit, dose: float) -> float:
    """Survival predicted by a fitted curve at the given dose in Gy."""
    return math.exp(-(fit.alpha * dose + fit.beta * dose * dose))
