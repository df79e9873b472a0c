"""Per-gene variational fit for the shrinkage regression model.

Each gene's regression carries a Gaussian coefficient prior with variance
sigma^2 tau^2, gamma priors on tau^-2 and sigma^-2, and is fitted by
coordinate ascent on a factorized posterior. The evidence lower bound is
the convergence criterion and doubles as the model-evidence surrogate used
for Bayes factors downstream.

Two equivalent computational routes exist: a direct one that materializes
the (p-1) x (p-1) coefficient covariance, and a reduced one that works in
the SVD basis of the design and only ever forms the covariance diagonal.
The reduced route is used when the covariate count reaches the sample size.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import digamma, gammaln

from .data import RegressionProblem, svd_reduce
from .errors import NumericalFailureError

#: Rate parameters are floored here to avoid division blowups.
RATE_FLOOR = 1e-12

DEFAULT_TOL = 1e-3
DEFAULT_MAX_ITER = 1000
DEFAULT_RATE_INIT = 0.001


@dataclass(frozen=True)
class HyperParameters:
    """Gamma prior parameters: (a, b) for tau^-2 and (c, d) for sigma^-2."""

    a: float
    b: float
    c: float = 0.001
    d: float = 0.001

    def __post_init__(self):
        for name in ("a", "b", "c", "d"):
            if not getattr(self, name) > 0:
                raise ValueError(f"hyperparameter {name} must be positive")


@dataclass(frozen=True)
class VariationalPosterior:
    """Fitted variational state for one regression equation."""

    beta_mean: np.ndarray
    beta_var: np.ndarray
    a_star: float
    b_star: float
    c_star: float
    d_star: float
    lower_bound: float
    iterations: int
    converged: bool
    sigma_trace: float
    sigma_logdet: float
    beta_cov: np.ndarray | None = None  # materialized on the direct path only

    @property
    def e_beta_sq(self) -> float:
        """E[beta' beta] under the fitted posterior."""
        return float(self.beta_mean @ self.beta_mean) + self.sigma_trace


def expected_moments(vp: VariationalPosterior):
    """Posterior expectations used by the rate updates and the EB step.

    Returns (E[tau^-2], E[log tau^-2], E[sigma^-2], E[beta' beta]).
    """
    e_tau2inv = vp.a_star / vp.b_star
    e_log_tau2inv = digamma(vp.a_star) - np.log(vp.b_star)
    e_sig2inv = vp.c_star / vp.d_star
    return e_tau2inv, e_log_tau2inv, e_sig2inv, vp.e_beta_sq


@dataclass
class _SweepResult:
    beta_mean: np.ndarray
    beta_var: np.ndarray
    b_star: float
    d_star: float
    sigma_trace: float
    sigma_logdet: float
    beta_cov: np.ndarray | None = None


class _DirectPath:
    """Dense route: full covariance via Cholesky, valid for any dimensions."""

    def __init__(self, prob: RegressionProblem):
        X, y = prob.design, prob.response
        self.n, self.k = X.shape
        self.XtX = X.T @ X
        self.Xty = X.T @ y
        self.yty = float(y @ y)

    def sweep(self, b_star, d_star, a_star, c_star, hp) -> _SweepResult:
        e_tau = a_star / b_star
        e_sig = c_star / d_star
        M = self.XtX + e_tau * np.eye(self.k)
        try:
            cho = cho_factor(M, lower=True)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailureError(
                f"covariance update failed: {exc}"
            ) from exc
        Minv = cho_solve(cho, np.eye(self.k))
        Sigma = Minv / e_sig
        beta = Minv @ self.Xty
        sigma_logdet = -2.0 * float(
            np.sum(np.log(np.diag(cho[0])))
        ) - self.k * np.log(e_sig)
        sigma_trace = float(np.trace(Sigma))
        ebb = float(beta @ beta) + sigma_trace
        rss = self.yty - 2.0 * float(beta @ self.Xty) + float(
            beta @ (self.XtX @ beta)
        )
        tr_xtx_sigma = float(np.sum(self.XtX * Sigma))
        d_new = max(
            hp.d + 0.5 * (rss + tr_xtx_sigma) + 0.5 * e_tau * ebb, RATE_FLOOR
        )
        e_sig_new = c_star / d_new
        b_new = max(hp.b + 0.5 * e_sig_new * ebb, RATE_FLOOR)
        return _SweepResult(
            beta_mean=beta,
            beta_var=np.diag(Sigma).copy(),
            b_star=b_new,
            d_star=d_new,
            sigma_trace=sigma_trace,
            sigma_logdet=sigma_logdet,
            beta_cov=Sigma,
        )


class _SvdPath:
    """Reduced route: diagonal algebra in the SVD basis of the design.

    The coefficient posterior decomposes into the span of the design's right
    singular vectors (data-informed, diagonal in that basis) and its
    orthogonal complement, where the posterior equals the conditional prior
    with variance 1/(E[sigma^-2] E[tau^-2]) per direction.
    """

    def __init__(self, prob: RegressionProblem):
        red = svd_reduce(prob)
        self.n = prob.n
        self.k = prob.n_covariates
        self.r = red.rank
        self.V = red.right_factors
        self.d2 = np.sum(red.reduced_design**2, axis=0)  # squared sing. values
        self.w = red.reduced_design.T @ prob.response
        self.yty = float(prob.response @ prob.response)
        self.row_norm_sq = np.sum(self.V**2, axis=1)

    def sweep(self, b_star, d_star, a_star, c_star, hp) -> _SweepResult:
        e_tau = a_star / b_star
        e_sig = c_star / d_star
        comp = self.k - self.r
        denom = self.d2 + e_tau
        theta = self.w / denom
        theta_var = 1.0 / (e_sig * denom)
        comp_var = 1.0 / (e_sig * e_tau)
        sigma_trace = float(np.sum(theta_var)) + comp * comp_var
        sigma_logdet = -float(np.sum(np.log(e_sig * denom))) - comp * np.log(
            e_sig * e_tau
        )
        beta = self.V @ theta
        beta_var = (self.V**2) @ theta_var + (
            1.0 - self.row_norm_sq
        ) * comp_var
        ebb = float(theta @ theta) + sigma_trace
        rss = self.yty - 2.0 * float(theta @ self.w) + float(
            self.d2 @ theta**2
        )
        tr_xtx_sigma = float(np.sum(self.d2 * theta_var))
        d_new = max(
            hp.d + 0.5 * (rss + tr_xtx_sigma) + 0.5 * e_tau * ebb, RATE_FLOOR
        )
        e_sig_new = c_star / d_new
        b_new = max(hp.b + 0.5 * e_sig_new * ebb, RATE_FLOOR)
        return _SweepResult(
            beta_mean=beta,
            beta_var=beta_var,
            b_star=b_new,
            d_star=d_new,
            sigma_trace=sigma_trace,
            sigma_logdet=sigma_logdet,
        )


class _EmptyPath:
    """No covariates: the sigma posterior is exact after one sweep."""

    def __init__(self, prob: RegressionProblem):
        self.n = prob.n
        self.k = 0
        self.yty = float(prob.response @ prob.response)

    def sweep(self, b_star, d_star, a_star, c_star, hp) -> _SweepResult:
        return _SweepResult(
            beta_mean=np.empty(0),
            beta_var=np.empty(0),
            b_star=hp.b,
            d_star=max(hp.d + 0.5 * self.yty, RATE_FLOOR),
            sigma_trace=0.0,
            sigma_logdet=0.0,
        )


def make_workspace(prob: RegressionProblem, method: str = "auto"):
    """Precompute the per-problem quantities reused across sweeps."""
    if prob.n_covariates == 0:
        return _EmptyPath(prob)
    if method == "auto":
        method = "svd" if prob.n_covariates >= prob.n else "direct"
    if method == "direct":
        return _DirectPath(prob)
    if method == "svd":
        return _SvdPath(prob)
    raise ValueError(f"unknown method {method!r}")


def _bound(n, k, hp, a_star, b_star, c_star, d_star, sigma_logdet, ebb):
    return (
        -0.5 * n * np.log(2.0 * np.pi)
        + 0.5 * sigma_logdet
        + 0.5 * k
        + hp.a * np.log(hp.b)
        - gammaln(hp.a)
        - a_star * np.log(b_star)
        + gammaln(a_star)
        + hp.c * np.log(hp.d)
        - gammaln(hp.c)
        - c_star * np.log(d_star)
        + gammaln(c_star)
        + 0.5 * (c_star / d_star) * (a_star / b_star) * ebb
    )


def _posterior_from(res: _SweepResult, ws, hp, a_star, c_star, iterations,
                    converged) -> VariationalPosterior:
    ebb = float(res.beta_mean @ res.beta_mean) + res.sigma_trace
    lb = _bound(
        ws.n, ws.k, hp, a_star, res.b_star, c_star, res.d_star,
        res.sigma_logdet, ebb,
    )
    if not np.isfinite(lb):
        raise NumericalFailureError("non-finite lower bound")
    return VariationalPosterior(
        beta_mean=res.beta_mean,
        beta_var=res.beta_var,
        a_star=a_star,
        b_star=res.b_star,
        c_star=c_star,
        d_star=res.d_star,
        lower_bound=float(lb),
        iterations=iterations,
        converged=converged,
        sigma_trace=res.sigma_trace,
        sigma_logdet=res.sigma_logdet,
        beta_cov=res.beta_cov,
    )


def vb_sweep(
    state: VariationalPosterior,
    prob: RegressionProblem,
    hp: HyperParameters,
    method: str = "auto",
) -> VariationalPosterior:
    """One coordinate-ascent pass: covariance/mean, then the two rates.

    Each update uses the most recent expectations, so the pass is an exact
    cyclic ascent step and the lower bound cannot decrease.
    """
    if not (state.b_star > 0 and state.d_star > 0):
        raise ValueError("state rates must be positive")
    ws = make_workspace(prob, method)
    res = ws.sweep(state.b_star, state.d_star, state.a_star, state.c_star, hp)
    return _posterior_from(
        res, ws, hp, state.a_star, state.c_star, state.iterations + 1,
        state.converged,
    )


def lower_bound(
    state: VariationalPosterior,
    prob: RegressionProblem,
    hp: HyperParameters,
) -> float:
    """Evidence lower bound of a swept state (model-evidence surrogate)."""
    if state.sigma_logdet is None or not np.isfinite(state.sigma_logdet):
        raise NumericalFailureError("state has no valid covariance logdet")
    return float(
        _bound(
            prob.n,
            prob.n_covariates,
            hp,
            state.a_star,
            state.b_star,
            state.c_star,
            state.d_star,
            state.sigma_logdet,
            state.e_beta_sq,
        )
    )


def fit_local(
    prob: RegressionProblem,
    hp: HyperParameters,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    method: str = "auto",
    rate_init: float = DEFAULT_RATE_INIT,
) -> VariationalPosterior:
    """Iterate sweeps until the lower bound changes by less than ``tol``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 2:
        raise ValueError("max_iter must be at least 2")
    ws = make_workspace(prob, method)
    a_star = hp.a + 0.5 * ws.k
    c_star = hp.c + 0.5 * (ws.n + ws.k)
    b_star = d_star = rate_init
    prev = None
    converged = False
    t = 0
    res = None
    for t in range(1, max_iter + 1):
        res = ws.sweep(b_star, d_star, a_star, c_star, hp)
        b_star, d_star = res.b_star, res.d_star
        ebb = float(res.beta_mean @ res.beta_mean) + res.sigma_trace
        lb = _bound(
            ws.n, ws.k, hp, a_star, b_star, c_star, d_star,
            res.sigma_logdet, ebb,
        )
        if not np.isfinite(lb):
            raise NumericalFailureError(
                f"non-finite lower bound at iteration {t}"
            )
        if prev is not None and abs(lb - prev) < tol:
            converged = True
            prev = lb
            break
        prev = lb
    post = _posterior_from(res, ws, hp, a_star, c_star, t, converged)
    return replace(post, lower_bound=float(prev))
