"""Expression-matrix cleaning pipeline.

Stage order is fixed: missing-value filter, per-gene mean imputation,
greedy correlation pruning, cross-omic gene intersection, z-scoring, and
(optionally) merging the two omics into one row-stacked dataset. Each omic
is z-scored separately before merging so both blocks are on comparable
scales.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .matrixio import AlignedDataset, ExpressionMatrix


@dataclass
class PreprocessConfig:
    max_missing: int = 6
    redundancy_threshold: float = 0.7

    def __post_init__(self) -> None:
        if self.max_missing < 0:
            raise ValueError(f"max_missing must be >= 0, got {self.max_missing}")
        if not (0.0 < self.redundancy_threshold <= 1.0):
            raise ValueError(
                f"redundancy_threshold must be in (0, 1], got {self.redundancy_threshold}"
            )


@dataclass
class PreprocessLog:
    """Audit record of what the cleaning stages removed or filled in."""

    dropped_missing: list[str] = field(default_factory=list)
    dropped_redundant: list[tuple[str, str, float]] = field(default_factory=list)
    dropped_zero_variance: list[str] = field(default_factory=list)
    imputed_cells: int = 0

    def merged_with(self, other: "PreprocessLog") -> "PreprocessLog":
        return PreprocessLog(
            self.dropped_missing + other.dropped_missing,
            self.dropped_redundant + other.dropped_redundant,
            self.dropped_zero_variance + other.dropped_zero_variance,
            self.imputed_cells + other.imputed_cells,
        )

    def to_json_obj(self):
        return {
            "dropped_missing": list(self.dropped_missing),
            "dropped_redundant": [
                {"gene": g, "retained_partner": p, "r": r}
                for g, p, r in self.dropped_redundant
            ],
            "dropped_zero_variance": list(self.dropped_zero_variance),
            "imputed_cells": self.imputed_cells,
        }

    def csv_columns(self):
        return ["stage", "gene", "retained_partner", "r"]

    def csv_rows(self):
        rows = [["missing_filter", g, "", ""] for g in self.dropped_missing]
        rows += [["zero_variance", g, "", ""] for g in self.dropped_zero_variance]
        rows += [["redundancy", g, p, r] for g, p, r in self.dropped_redundant]
        return rows


def filter_missing(
    matrix: ExpressionMatrix, max_missing: int = 6
) -> tuple[ExpressionMatrix, PreprocessLog]:
    """Drop genes whose missing-value count across samples exceeds ``max_missing``."""
    counts = matrix.missing_mask.sum(axis=0)
    keep = counts <= max_missing
    if not keep.any():
        raise ValueError("missing-value filter removed every gene")
    log = PreprocessLog(
        dropped_missing=[g for g, k in zip(matrix.gene_ids, keep) if not k]
    )
    return matrix.take_genes(np.flatnonzero(keep)), log


def impute_mean(matrix: ExpressionMatrix) -> ExpressionMatrix:
    """Replace each missing cell with the mean of its gene's non-missing values."""
    mask = matrix.missing_mask
    if not mask.any():
        return matrix.copy()
    present = (~mask).sum(axis=0)
    if (present == 0).any():
        gene = matrix.gene_ids[int(np.argmax(present == 0))]
        raise ValueError(f"gene {gene!r} has no non-missing values to impute from")
    sums = np.where(mask, 0.0, matrix.values).sum(axis=0)
    means = sums / present
    values = np.where(mask, means[None, :], matrix.values)
    return ExpressionMatrix(
        list(matrix.sample_ids), list(matrix.gene_ids), values, np.zeros_like(mask)
    )


def _unit_centered(column: np.ndarray) -> tuple[np.ndarray, float]:
    centered = column - column.mean()
    norm = float(np.linalg.norm(centered))
    return centered, norm


def prune_redundant(
    matrix: ExpressionMatrix, threshold: float = 0.7
) -> tuple[ExpressionMatrix, PreprocessLog]:
    """Greedy correlation pruning in column order.

    Scanning genes left to right, a gene is dropped iff its absolute Pearson
    correlation with any previously *retained* gene reaches ``threshold``.
    Zero-variance genes cannot enter a correlation and are dropped with
    their own log entry.
    """
    if matrix.missing_mask.any():
        raise ValueError("prune_redundant requires a matrix with no missing values")
    if not (0.0 < threshold <= 1.0):
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    n, p = matrix.values.shape
    units = np.empty((n, p))  # unit-norm centered columns of retained genes
    retained: list[int] = []
    log = PreprocessLog()
    for j in range(p):
        centered, norm = _unit_centered(matrix.values[:, j])
        scale = max(1.0, float(np.abs(matrix.values[:, j]).max(initial=0.0)))
        if norm <= 1e-13 * scale * math.sqrt(n):
            log.dropped_zero_variance.append(matrix.gene_ids[j])
            continue
        u = centered / norm
        if retained:
            r_vec = units[:, : len(retained)].T @ u
            worst = int(np.argmax(np.abs(r_vec)))
            if abs(r_vec[worst]) >= threshold:
                log.dropped_redundant.append(
                    (
                        matrix.gene_ids[j],
                        matrix.gene_ids[retained[worst]],
                        float(r_vec[worst]),
                    )
                )
                continue
        units[:, len(retained)] = u
        retained.append(j)
    return matrix.take_genes(retained), log


def intersect_genes(
    a: ExpressionMatrix, b: ExpressionMatrix
) -> tuple[ExpressionMatrix, ExpressionMatrix]:
    """Restrict both matrices to their shared genes, columns in lexicographic order."""
    common = sorted(set(a.gene_ids) & set(b.gene_ids))
    if not common:
        raise ValueError("matrices share no genes")
    pos_a = {g: i for i, g in enumerate(a.gene_ids)}
    pos_b = {g: i for i, g in enumerate(b.gene_ids)}
    return (
        a.take_genes([pos_a[g] for g in common]),
        b.take_genes([pos_b[g] for g in common]),
    )


def zscore(matrix: ExpressionMatrix) -> ExpressionMatrix:
    """Standardize each gene column to mean 0, sample (n-1) standard deviation 1."""
    if matrix.missing_mask.any():
        raise ValueError("zscore requires a matrix with no missing values")
    if matrix.n_samples < 2:
        raise ValueError("zscore requires at least 2 samples")
    means = matrix.values.mean(axis=0)
    sds = matrix.values.std(axis=0, ddof=1)
    floor = 1e-13 * np.maximum(1.0, np.abs(matrix.values).max(axis=0))
    bad = sds <= floor
    if bad.any():
        gene = matrix.gene_ids[int(np.argmax(bad))]
        raise ValueError(f"gene {gene!r} has zero variance and cannot be z-scored")
    values = (matrix.values - means[None, :]) / sds[None, :]
    return ExpressionMatrix(
        list(matrix.sample_ids),
        list(matrix.gene_ids),
        values,
        np.zeros_like(matrix.missing_mask),
    )


def merge_omics(a: AlignedDataset, b: AlignedDataset) -> AlignedDataset:
    """Row-stack two z-scored datasets that share the same gene list.

    Sample ids are suffixed with each dataset's omic tag so a cell line
    present in both omics stays unique in the merged table.
    """
    if a.gene_ids != b.gene_ids:
        only_a = sorted(set(a.gene_ids) - set(b.gene_ids))[:5]
        only_b = sorted(set(b.gene_ids) - set(a.gene_ids))[:5]
        raise ValueError(
            "gene lists differ between datasets "
            f"(only in first: {only_a}, only in second: {only_b}, or order differs)"
        )
    tag_a, tag_b = a.provenance, b.provenance
    if tag_a == tag_b:
        tag_a, tag_b = f"{tag_a}1", f"{tag_b}2"
    sample_ids = [f"{s}:{tag_a}" for s in a.sample_ids] + [
        f"{s}:{tag_b}" for s in b.sample_ids
    ]
    merged = ExpressionMatrix(
        sample_ids,
        list(a.gene_ids),
        np.vstack([a.matrix.values, b.matrix.values]),
        np.vstack([a.matrix.missing_mask, b.matrix.missing_mask]),
    )
    return AlignedDataset(merged, np.concatenate([a.labels, b.labels]), "combined")


def clean_matrix(
    matrix: ExpressionMatrix,
    cfg: PreprocessConfig | None = None,
    sort_genes: bool = False,
) -> tuple[ExpressionMatrix, PreprocessLog]:
    """Run the per-omic stages: missing filter, imputation, redundancy pruning.

    ``sort_genes`` pre-sorts columns lexicographically so the pruning scan
    order does not depend on the column order of the input file.
    """
    cfg = cfg or PreprocessConfig()
    filtered, log = filter_missing(matrix, cfg.max_missing)
    imputed_cells = int(filtered.missing_mask.sum())
    imputed = impute_mean(filtered)
    if sort_genes:
        order = np.argsort(np.asarray(imputed.gene_ids, dtype=object))
        imputed = imputed.take_genes(order)
    pruned, prune_log = prune_redundant(imputed, cfg.redundancy_threshold)
    log = log.merged_with(prune_log)
    log.imputed_cells = imputed_cells
    return pruned, log
