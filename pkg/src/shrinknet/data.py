"""Expression matrix ingestion, standardization and per-gene regression setup.

The matrix convention is samples in rows, genes in columns. Every gene in
turn acts as a regression response with the remaining genes as covariates;
when the number of covariates reaches the sample size the design is reduced
through its SVD and posterior moments are mapped back afterwards.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateDesignError,
    DegenerateGeneError,
    MalformedInputError,
    MissingDataError,
    ValidationError,
)

#: Singular values below this fraction of the largest are treated as zero.
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class ExpressionMatrix:
    """n x p matrix of expression values with gene and sample labels."""

    values: np.ndarray
    gene_ids: tuple[str, ...]
    sample_ids: tuple[str, ...]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "gene_ids", tuple(self.gene_ids))
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        if v.ndim != 2:
            raise ValidationError("expression values must be a 2-D array")
        n, p = v.shape
        if n < 1:
            raise ValidationError("need at least one sample row")
        if p < 2:
            raise ValidationError(f"need at least 2 genes, got {p}")
        if len(self.gene_ids) != p:
            raise ValidationError(
                f"{len(self.gene_ids)} gene ids for {p} columns"
            )
        if len(self.sample_ids) != n:
            raise ValidationError(
                f"{len(self.sample_ids)} sample ids for {n} rows"
            )
        if len(set(self.gene_ids)) != p:
            dupes = sorted(
                g for g in set(self.gene_ids) if self.gene_ids.count(g) > 1
            )
            raise ValidationError(f"duplicate gene ids: {dupes}")
        if len(set(self.sample_ids)) != n:
            raise ValidationError("duplicate sample ids")
        if not np.isfinite(v).all():
            bad = np.argwhere(~np.isfinite(v))[0]
            raise MissingDataError(
                f"non-finite value at sample {bad[0]}, gene "
                f"{self.gene_ids[bad[1]]}"
            )

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_genes(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class RegressionProblem:
    """One gene as response against all other genes as covariates."""

    response: np.ndarray
    design: np.ndarray
    target_gene: int

    @property
    def n(self) -> int:
        return self.response.shape[0]

    @property
    def n_covariates(self) -> int:
        return self.design.shape[1]


@dataclass(frozen=True)
class ReducedProblem:
    """SVD factorization of a regression design: design = F V^T."""

    reduced_design: np.ndarray  # F = U D, n x r
    right_factors: np.ndarray  # V, (p-1) x r
    response: np.ndarray

    @property
    def rank(self) -> int:
        return self.reduced_design.shape[1]


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def load_expression_matrix(
    path, format: str | None = None, transpose: bool = False
) -> ExpressionMatrix:
    """Read a CSV/TSV file with a gene-id header row.

    An optional first column of sample ids is auto-detected from the first
    data row (non-numeric first cell). Blank or non-numeric cells raise an
    explicit error with their location; nothing is imputed. With
    ``transpose`` the file is read genes-in-rows and flipped.
    """
    path = Path(path)
    if format is None:
        format = "tsv" if path.suffix.lower() in (".tsv", ".tab") else "csv"
    if format not in ("csv", "tsv"):
        raise ValidationError(f"unknown format {format!r}, expected csv or tsv")
    delim = "\t" if format == "tsv" else ","
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh, delimiter=delim)]
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if len(rows) < 2:
        raise MalformedInputError(f"{path}: need a header row and data rows")
    header = [cell.strip() for cell in rows[0]]
    first_data = [cell.strip() for cell in rows[1]]
    has_sample_col = not _is_number(first_data[0]) if first_data else False
    n_cols = len(first_data)
    if has_sample_col:
        if len(header) == n_cols:
            gene_ids = header[1:]
        elif len(header) == n_cols - 1:
            gene_ids = header
        else:
            raise MalformedInputError(
                f"{path}: header has {len(header)} fields but data rows "
                f"have {n_cols}"
            )
    else:
        if len(header) != n_cols:
            raise MalformedInputError(
                f"{path}: header has {len(header)} fields but data rows "
                f"have {n_cols}"
            )
        gene_ids = header

    values = []
    sample_ids = []
    for i, row in enumerate(rows[1:], start=2):
        cells = [cell.strip() for cell in row]
        if len(cells) != n_cols:
            raise MalformedInputError(
                f"{path}: row {i} has {len(cells)} fields, expected {n_cols}"
            )
        if has_sample_col:
            sample_ids.append(cells[0])
            cells = cells[1:]
        else:
            sample_ids.append(f"s{i - 1}")
        parsed = []
        for j, cell in enumerate(cells):
            if cell == "" or cell.upper() in ("NA", "NAN"):
                raise MissingDataError(
                    f"{path}: missing value at row {i}, column "
                    f"{gene_ids[j] if j < len(gene_ids) else j + 1}"
                )
            try:
                parsed.append(float(cell))
            except ValueError:
                raise MalformedInputError(
                    f"{path}: cannot parse {cell!r} at row {i}, column "
                    f"{gene_ids[j] if j < len(gene_ids) else j + 1}"
                ) from None
        values.append(parsed)
    m = ExpressionMatrix(
        values=np.array(values, dtype=float),
        gene_ids=tuple(gene_ids),
        sample_ids=tuple(sample_ids),
    )
    if transpose:
        m = ExpressionMatrix(
            values=m.values.T, gene_ids=m.sample_ids, sample_ids=m.gene_ids
        )
    if m.n_samples < 3:
        raise ValidationError(
            f"{path}: need at least 3 sample rows, got {m.n_samples}"
        )
    return m


def standardize(m: ExpressionMatrix, scale: bool = True) -> ExpressionMatrix:
    """Center every gene column; with ``scale`` also set unit sample sd."""
    v = m.values
    if m.n_samples < 2:
        raise ValidationError("standardization needs at least 2 samples")
    sd = v.std(axis=0, ddof=1)
    if np.any(sd == 0.0):
        gene = m.gene_ids[int(np.argmax(sd == 0.0))]
        raise DegenerateGeneError(f"gene {gene} is constant across samples")
    out = v - v.mean(axis=0)
    if scale:
        out = out / out.std(axis=0, ddof=1)
    return ExpressionMatrix(out, m.gene_ids, m.sample_ids)


def build_problem(m: ExpressionMatrix, j: int) -> RegressionProblem:
    """Response = column j, design = all other columns in original order."""
    if not 0 <= j < m.n_genes:
        raise IndexError(f"gene index {j} out of range [0, {m.n_genes})")
    keep = [k for k in range(m.n_genes) if k != j]
    return RegressionProblem(
        response=m.values[:, j].copy(),
        design=m.values[:, keep].copy(),
        target_gene=j,
    )


def svd_reduce(prob: RegressionProblem) -> ReducedProblem:
    """Factor the design as F V^T with F = U D restricted to numerical rank."""
    X = prob.design
    if not np.any(X):
        raise DegenerateDesignError(
            f"design for gene {prob.target_gene} is all zeros"
        )
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    r = int(np.sum(s > RANK_RTOL * s[0]))
    return ReducedProblem(
        reduced_design=U[:, :r] * s[:r],
        right_factors=Vt[:r].T.copy(),
        response=prob.response,
    )


def back_transform(theta_mean, theta_cov, V):
    """Map reduced-space posterior moments to coefficient space.

    Returns the mean V @ theta_mean and the per-coordinate variances
    diag(V @ theta_cov @ V^T) without materializing the full covariance.
    """
    theta_mean = np.asarray(theta_mean, dtype=float)
    theta_cov = np.atleast_2d(np.asarray(theta_cov, dtype=float))
    V = np.asarray(V, dtype=float)
    r = theta_mean.shape[0]
    if theta_cov.shape != (r, r) or V.shape[1] != r:
        raise ValueError(
            f"dimension mismatch: mean {theta_mean.shape}, cov "
            f"{theta_cov.shape}, factors {V.shape}"
        )
    beta_mean = V @ theta_mean
    beta_var = np.einsum("ij,jk,ik->i", V, theta_cov, V)
    return beta_mean, beta_var
