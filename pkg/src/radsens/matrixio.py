"""Parsing, validation, alignment, and serialization of expression data.

File formats
------------
Expression matrix: delimited text (tab or comma, auto-detected from the
header line). The header row carries identifiers; its first cell is either
blank or ``id`` (case-insensitive) when the file has a corner cell for the
leading identifier column. Empty fields and the tokens ``NA``/``NaN``
(case-insensitive) denote missing values. Files may store genes as rows or
samples as rows; the ``orientation`` argument says which, and matrices are
always returned in samples x genes orientation.

Label file: two delimited columns, ``sample_id`` and SF2. A header row is
detected by a non-numeric second field. SF2 values must be finite and lie
in (0, 1].

Reports are written as JSON (sorted keys) or CSV. Real numbers are
serialized with 6 significant digits, and output is byte-stable for a fixed
report.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MISSING_TOKENS = {"", "na", "nan"}
PROVENANCES = ("transcriptome", "proteome", "combined")
ORIENTATIONS = ("genes_as_rows", "samples_as_rows")


def _find_duplicate(ids: list[str]) -> str | None:
    seen: set[str] = set()
    for name in ids:
        if name in seen:
            return name
        seen.add(name)
    return None


@dataclass
class ExpressionMatrix:
    """Dense samples x genes expression table with an explicit missing mask.

    ``values[i, j]`` is the expression of gene ``gene_ids[j]`` in sample
    ``sample_ids[i]``; cells with ``missing_mask[i, j]`` True hold NaN and
    are ignored by downstream statistics.
    """

    sample_ids: list[str]
    gene_ids: list[str]
    values: np.ndarray
    missing_mask: np.ndarray

    def __post_init__(self) -> None:
        self.sample_ids = list(self.sample_ids)
        self.gene_ids = list(self.gene_ids)
        self.values = np.asarray(self.values, dtype=float)
        self.missing_mask = np.asarray(self.missing_mask, dtype=bool)
        if self.values.shape != (len(self.sample_ids), len(self.gene_ids)):
            raise ValueError(
                f"matrix shape {self.values.shape} does not match "
                f"{len(self.sample_ids)} samples x {len(self.gene_ids)} genes"
            )
        if self.missing_mask.shape != self.values.shape:
            raise ValueError("missing mask shape does not match values")
        dup = _find_duplicate(self.sample_ids)
        if dup is not None:
            raise ValueError(f"duplicate sample identifier {dup!r}")
        dup = _find_duplicate(self.gene_ids)
        if dup is not None:
            raise ValueError(f"duplicate gene identifier {dup!r}")
        present = self.values[~self.missing_mask]
        if present.size and not np.all(np.isfinite(present)):
            raise ValueError("non-missing values must be finite")

    @property
    def n_samples(self) -> int:
        return len(self.sample_ids)

    @property
    def n_genes(self) -> int:
        return len(self.gene_ids)

    def copy(self) -> "ExpressionMatrix":
        return ExpressionMatrix(
            list(self.sample_ids),
            list(self.gene_ids),
            self.values.copy(),
            self.missing_mask.copy(),
        )

    def take_genes(self, column_indices) -> "ExpressionMatrix":
        idx = np.asarray(column_indices, dtype=int)
        return ExpressionMatrix(
            list(self.sample_ids),
            [self.gene_ids[j] for j in idx],
            self.values[:, idx],
            self.missing_mask[:, idx],
        )

    def take_samples(self, row_indices) -> "ExpressionMatrix":
        idx = np.asarray(row_indices, dtype=int)
        return ExpressionMatrix(
            [self.sample_ids[i] for i in idx],
            list(self.gene_ids),
            self.values[idx, :],
            self.missing_mask[idx, :],
        )


@dataclass
class LabelTable:
    """Map from sample identifier to measured SF2, each in (0, 1]."""

    entries: dict[str, float]

    def __post_init__(self) -> None:
        self.entries = {str(k): float(v) for k, v in self.entries.items()}
        for sample, sf2 in self.entries.items():
            if not math.isfinite(sf2) or sf2 <= 0.0 or sf2 > 1.0:
                raise ValueError(
                    f"SF2 for sample {sample!r} must be finite and in (0, 1], got {sf2}"
                )

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class AlignedDataset:
    """Expression matrix with its SF2 label vector aligned row-for-row."""

    matrix: ExpressionMatrix
    labels: np.ndarray
    provenance: str

    def __post_init__(self) -> None:
        self.labels = np.asarray(self.labels, dtype=float)
        if self.labels.shape != (self.matrix.n_samples,):
            raise ValueError(
                f"label vector length {self.labels.shape} does not match "
                f"{self.matrix.n_samples} samples"
            )
        if self.provenance not in PROVENANCES:
            raise ValueError(
                f"provenance must be one of {PROVENANCES}, got {self.provenance!r}"
            )

    @property
    def sample_ids(self) -> list[str]:
        return self.matrix.sample_ids

    @property
    def gene_ids(self) -> list[str]:
        return self.matrix.gene_ids

    @property
    def n_samples(self) -> int:
        return self.matrix.n_samples


def _sniff_delimiter(header_line: str) -> str:
    return "\t" if "\t" in header_line else ","


def _read_rows(path) -> tuple[list[list[str]], str]:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip() != ""]
    if not lines:
        raise ValueError(f"{path}: file is empty")
    delim = _sniff_delimiter(lines[0])
    rows = list(csv.reader(lines, delimiter=delim))
    return rows, delim


def _parse_cell(token: str, row_id: str, col_id: str) -> tuple[float, bool]:
    token = token.strip()
    if token.lower() in MISSING_TOKENS:
        return math.nan, True
    try:
        value = float(token)
    except ValueError:
        raise ValueError(
            f"non-numeric field {token!r} at row {row_id!r}, column {col_id!r}"
        ) from None
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {token!r} at row {row_id!r}, column {col_id!r}")
    return value, False


def read_expression_matrix(path, orientation: str = "genes_as_rows") -> ExpressionMatrix:
    """Read a delimited expression table into samples x genes orientation.

    ``orientation`` names the on-disk layout: ``genes_as_rows`` means each
    file row is one gene across samples; ``samples_as_rows`` the converse.
    """
    if orientation not in ORIENTATIONS:
        raise ValueError(f"orientation must be one of {ORIENTATIONS}, got {orientation!r}")
    rows, _ = _read_rows(path)
    header = rows[0]
    corner = header[0].strip().lower()
    if corner in {"", "id"}:
        col_ids = [c.strip() for c in header[1:]]
    elif rows[1:] and len(rows[1]) == len(header) + 1:
        # headerless corner cell: data rows carry one extra leading id field
        col_ids = [c.strip() for c in header]
    else:
        raise ValueError(
            f"{path}: first header cell must be blank or 'id', got {header[0]!r}"
        )
    if not col_ids:
        raise ValueError(f"{path}: header declares no identifiers")
    dup = _find_duplicate(col_ids)
    if dup is not None:
        raise ValueError(f"{path}: duplicate identifier {dup!r}")

    row_ids: list[str] = []
    width = len(col_ids) + 1
    values = np.empty((len(rows) - 1, len(col_ids)), dtype=float)
    mask = np.zeros_like(values, dtype=bool)
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise ValueError(
                f"{path}: ragged row {i}: expected {width} fields, got {len(row)}"
            )
        row_id = row[0].strip()
        row_ids.append(row_id)
        for j, token in enumerate(row[1:]):
            values[i - 2, j], mask[i - 2, j] = _parse_cell(token, row_id, col_ids[j])
    dup = _find_duplicate(row_ids)
    if dup is not None:
        raise ValueError(f"{path}: duplicate identifier {dup!r}")

    if orientation == "genes_as_rows":
        return ExpressionMatrix(col_ids, row_ids, values.T.copy(), mask.T.copy())
    return ExpressionMatrix(row_ids, col_ids, values, mask)


def write_expression_matrix(
    matrix: ExpressionMatrix, path, orientation: str = "genes_as_rows"
) -> None:
    """Write a matrix as tab-delimited text; missing cells become ``NA``."""
    if orientation not in ORIENTATIONS:
        raise ValueError(f"orientation must be one of {ORIENTATIONS}, got {orientation!r}")
    if orientation == "genes_as_rows":
        col_ids, row_ids = matrix.sample_ids, matrix.gene_ids
        values, mask = matrix.values.T, matrix.missing_mask.T
    else:
        col_ids, row_ids = matrix.gene_ids, matrix.sample_ids
        values, mask = matrix.values, matrix.missing_mask
    lines = ["id\t" + "\t".join(col_ids)]
    for i, row_id in enumerate(row_ids):
        cells = [
            "NA" if mask[i, j] else format_real(values[i, j])
            for j in range(len(col_ids))
        ]
        lines.append(row_id + "\t" + "\t".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_labels(path) -> LabelTable:
    """Read a two-column sample_id/SF2 file; the header row is optional."""
    rows, _ = _read_rows(path)
    start = 0
    if len(rows[0]) >= 2:
        try:
            float(rows[0][1])
        except ValueError:
            start = 1  # non-numeric second field marks a header row
    entries: dict[str, float] = {}
    for i, row in enumerate(rows[start:], start=start + 1):
        if len(row) != 2:
            raise ValueError(f"{path}: row {i}: expected 2 fields, got {len(row)}")
        sample = row[0].strip()
        if sample in entries:
            raise ValueError(f"{path}: duplicate sample {sample!r}")
        try:
            sf2 = float(row[1])
        except ValueError:
            raise ValueError(
                f"{path}: row {i}: non-numeric SF2 field {row[1]!r}"
            ) from None
        if not math.isfinite(sf2) or sf2 <= 0.0 or sf2 > 1.0:
            raise ValueError(
                f"{path}: SF2 for sample {sample!r} must be in (0, 1], got {row[1]}"
            )
        entries[sample] = sf2
    return LabelTable(entries)


def write_labels(labels: LabelTable, path) -> None:
    lines = ["sample_id\tsf2"]
    for sample in sorted(labels.entries):
        lines.append(f"{sample}\t{format_real(labels.entries[sample])}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def match_samples(
    matrix: ExpressionMatrix, labels: LabelTable, provenance: str = "transcriptome"
) -> AlignedDataset:
    """Inner-join matrix rows with the label table on sample identifier.

    Rows are reordered to the canonical (lexicographic) sample order so the
    result is independent of input row order.
    """
    shared = sorted(set(matrix.sample_ids) & set(labels.entries))
    if not shared:
        raise ValueError("no samples shared between matrix and labels")
    pos = {s: i for i, s in enumerate(matrix.sample_ids)}
    sub = matrix.take_samples([pos[s] for s in shared])
    y = np.array([labels.entries[s] for s in shared], dtype=float)
    return AlignedDataset(sub, y, provenance)


# --- report serialization ---------------------------------------------------


def format_real(x: float) -> str:
    """Render a real with 6 significant digits; infinities print as 'infinite'."""
    x = float(x)
    if math.isinf(x):
        return "infinite"
    if math.isnan(x):
        return "NaN"
    return format(x, ".6g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isinf(x):
            return "infinite"
        if math.isnan(x):
            return "NaN"
        return float(format_real(x))
    return obj


def _csv_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format_real(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_report(report, path, format: str = "json") -> None:
    """Serialize a report record deterministically.

    JSON output has sorted keys; CSV output uses the report's declared
    column list and row order. Reals are printed with 6 significant digits
    in both formats, so writing the same report twice is byte-identical.
    """
    if not (hasattr(report, "to_json_obj") and hasattr(report, "csv_rows")):
        raise TypeError(f"{type(report).__name__} is not a report type")
    if format == "json":
        obj = _jsonable(report.to_json_obj())
        text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    elif format == "csv":
        lines = [",".join(report.csv_columns())]
        for row in report.csv_rows():
            lines.append(",".join(_csv_cell(cell) for cell in row))
        text = "\n".join(lines) + "\n"
    else:
        raise ValueError(f"unknown report format {format!r}")
    Path(path).write_text(text, encoding="utf-8")
