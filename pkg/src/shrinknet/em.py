"""Whole-network fit: variational EM with shared shrinkage hyperparameters.

All p per-gene regressions are swept in turn (E-step), after which the
shape/rate (a, b) of the shared gamma prior on the local precisions are
re-estimated from the pooled posterior moments (M-step). The M-step has a
closed approximate form and an exact fixed-point variant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import digamma

from .data import ExpressionMatrix, build_problem
from .errors import NumericalFailureError
from .vb import (
    DEFAULT_MAX_ITER,
    DEFAULT_RATE_INIT,
    DEFAULT_TOL,
    HyperParameters,
    VariationalPosterior,
    _bound,
    _posterior_from,
    make_workspace,
)

#: Cap on the estimated shape when the pooled moments are degenerate
#: (zero dispersion would drive the shape to infinity, a point-mass prior).
A_MAX = 1e4

_DEGENERATE_EPS = 1e-8


@dataclass(frozen=True)
class EmConfig:
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    global_shrinkage: bool = True
    eb_update: str = "approx"  # "approx" or "exact"
    a_init: float = 0.001
    b_init: float = 0.001
    c: float = 0.001
    d: float = 0.001
    a_max: float = A_MAX
    threads: int = 1

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 2:
            raise ValueError("max_iter must be at least 2")
        if self.eb_update not in ("approx", "exact"):
            raise ValueError("eb_update must be 'approx' or 'exact'")


@dataclass
class SemFit:
    """Joint fit: one posterior per gene plus the final shared prior."""

    posteriors: list[VariationalPosterior]
    hyper: HyperParameters
    lower_bounds: list[np.ndarray] = field(repr=False)
    em_iterations: int = 0
    converged: bool = False
    gene_ids: tuple[str, ...] = ()

    @property
    def n_genes(self) -> int:
        return len(self.posteriors)


def eb_update_approx_moments(e_tau2inv, e_log_tau2inv, a_max: float = A_MAX):
    """Closed-form hyperparameter update from pooled gamma moments.

    Uses the approximation digamma(x) ~ log(x) - 0.5/x; the bracketed
    log-moment gap is nonnegative by Jensen and zero only when all pooled
    moments coincide, in which case the shape is capped.
    """
    e_tau2inv = np.asarray(e_tau2inv, dtype=float)
    e_log_tau2inv = np.asarray(e_log_tau2inv, dtype=float)
    p = e_tau2inv.shape[0]
    total = float(np.sum(e_tau2inv))
    gap = np.log(total) - float(np.mean(e_log_tau2inv)) - np.log(p)
    if gap <= _DEGENERATE_EPS:
        a_hat = a_max
    else:
        a_hat = min(0.5 / gap, a_max)
    b_hat = a_hat * p / total
    return a_hat, b_hat


def eb_update_fixedpoint_moments(e_tau2inv, e_log_tau2inv,
                                 a_max: float = A_MAX):
    """Exact maximizer of the pooled prior likelihood in (a, b).

    Profiling out b = a * p / sum(E[tau^-2]) leaves a one-dimensional
    stationarity condition digamma(a) - log(a) = -gap, solved by bracketed
    root finding (the left side is strictly increasing to zero).
    """
    e_tau2inv = np.asarray(e_tau2inv, dtype=float)
    e_log_tau2inv = np.asarray(e_log_tau2inv, dtype=float)
    p = e_tau2inv.shape[0]
    total = float(np.sum(e_tau2inv))
    gap = np.log(total / p) - float(np.mean(e_log_tau2inv))
    if gap <= _DEGENERATE_EPS:
        a_hat = a_max
    else:

        def f(x):
            return digamma(x) - np.log(x) + gap

        if f(a_max) <= 0:
            a_hat = a_max
        else:
            a_hat = brentq(f, 1e-10, a_max, xtol=1e-12, rtol=1e-14)
    b_hat = a_hat * p / total
    return a_hat, b_hat


def _moments_from_rates(a_star: float, b_stars):
    b_stars = np.asarray(b_stars, dtype=float)
    if np.any(b_stars <= 0):
        raise ValueError("all rate parameters must be positive")
    e_tau = a_star / b_stars
    e_log = digamma(a_star) - np.log(b_stars)
    return e_tau, e_log


def eb_update_approx(a_star: float, b_stars, a_max: float = A_MAX):
    """Approximate (a, b) update from per-gene posterior gamma parameters."""
    return eb_update_approx_moments(*_moments_from_rates(a_star, b_stars),
                                    a_max=a_max)


def eb_update_fixedpoint(a_star: float, b_stars, a_max: float = A_MAX):
    """Exact (a, b) update from per-gene posterior gamma parameters."""
    return eb_update_fixedpoint_moments(*_moments_from_rates(a_star, b_stars),
                                        a_max=a_max)


def fit_sem(m: ExpressionMatrix, config: EmConfig = EmConfig()) -> SemFit:
    """EM over all gene regressions with shared-prior re-estimation.

    Each EM iteration performs a single coordinate-ascent sweep per gene
    under the current (a, b), then updates (a, b) from the pooled moments
    unless global shrinkage is disabled. Convergence is the max over genes
    of the per-gene lower-bound change.
    """
    p = m.n_genes
    k = p - 1
    workspaces = [make_workspace(build_problem(m, j)) for j in range(p)]
    n = m.n_samples
    a, b = config.a_init, config.b_init
    b_stars = np.full(p, DEFAULT_RATE_INIT)
    d_stars = np.full(p, DEFAULT_RATE_INIT)
    c_star = config.c + 0.5 * (n + k)
    updater = (
        eb_update_approx
        if config.eb_update == "approx"
        else eb_update_fixedpoint
    )
    history: list[np.ndarray] = []
    prev = None
    converged = False
    results = [None] * p
    bounds = np.empty(p)
    t = 0
    for t in range(1, config.max_iter + 1):
        hp = HyperParameters(a=a, b=b, c=config.c, d=config.d)
        a_star = a + 0.5 * k
        for j in range(p):
            try:
                res = workspaces[j].sweep(
                    b_stars[j], d_stars[j], a_star, c_star, hp
                )
            except NumericalFailureError as exc:
                raise NumericalFailureError(
                    f"gene {m.gene_ids[j]}: {exc}"
                ) from exc
            b_stars[j], d_stars[j] = res.b_star, res.d_star
            ebb = float(res.beta_mean @ res.beta_mean) + res.sigma_trace
            bounds[j] = _bound(
                n, k, hp, a_star, res.b_star, c_star, res.d_star,
                res.sigma_logdet, ebb,
            )
            results[j] = res
        if not np.isfinite(bounds).all():
            bad = m.gene_ids[int(np.argmax(~np.isfinite(bounds)))]
            raise NumericalFailureError(
                f"gene {bad}: non-finite lower bound at EM iteration {t}"
            )
        history.append(bounds.copy())
        # convergence is checked before the M-step, so on exit (a, b) are
        # exactly the values the final posteriors were swept with
        if prev is not None and np.max(np.abs(bounds - prev)) < config.tol:
            converged = True
            break
        prev = bounds.copy()
        if config.global_shrinkage:
            a, b = updater(a_star, b_stars, a_max=config.a_max)
    final_hp = HyperParameters(a=a, b=b, c=config.c, d=config.d)
    posteriors = [
        _posterior_from(
            results[j], workspaces[j], final_hp, a_star, c_star, t, converged
        )
        for j in range(p)
    ]
    return SemFit(
        posteriors=posteriors,
        hyper=final_hp,
        lower_bounds=history,
        em_iterations=t,
        converged=converged,
        gene_ids=m.gene_ids,
    )
