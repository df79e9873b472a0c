"""End-to-end inference: fit, rank, estimate the null fraction, select."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ExpressionMatrix, standardize
from .em import EmConfig, SemFit, fit_sem
from .selection import (
    EdgeRanking,
    EvidenceCache,
    SelectionResult,
    StopConfig,
    estimate_p0,
    forward_select,
    kappa_scores,
    rank_edges,
)


@dataclass
class InferenceResult:
    fit: SemFit
    kappa: np.ndarray
    ranking: EdgeRanking
    p0_hat: float
    selection: SelectionResult


def infer_network(
    m: ExpressionMatrix,
    em_config: EmConfig = EmConfig(),
    alpha: float = 0.1,
    p0: float | None = None,
    stop: StopConfig = StopConfig(),
    pre_standardized: bool = False,
    scale: bool = True,
) -> InferenceResult:
    """Run the full pipeline on an expression matrix.

    When ``p0`` is given the rank-wise estimation pass is skipped.
    """
    if not pre_standardized:
        m = standardize(m, scale=scale)
    fit = fit_sem(m, em_config)
    kappa = kappa_scores(fit)
    ranking = rank_edges(kappa)
    cache = EvidenceCache(m)
    p0_hat = estimate_p0(m, ranking, cache=cache) if p0 is None else p0
    selection = forward_select(
        m, ranking, alpha=alpha, p0=p0_hat, stop=stop, cache=cache
    )
    return InferenceResult(
        fit=fit,
        kappa=kappa,
        ranking=ranking,
        p0_hat=p0_hat,
        selection=selection,
    )
