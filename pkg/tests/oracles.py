"""Independent reference implementations used to validate the fast code.

Everything here is deliberately slow and simple: a Gibbs sampler for the
single-equation posterior, numerical quadrature for the exact model
evidence with one covariate, and a grid maximizer for the pooled-prior
objective. None of it shares code with the package internals.
"""

from __future__ import annotations

import numpy as np
from scipy import integrate
from scipy.special import gammaln


def gibbs_posterior_moments(
    y, X, a, b, c, d, n_draws=50_000, burn=5_000, seed=0
):
    """Gibbs sampler for the conjugate shrinkage regression.

    Model: y ~ N(X beta, sigma^2 I), beta ~ N(0, sigma^2 tau^2 I),
    tau^-2 ~ Gamma(a, b), sigma^-2 ~ Gamma(c, d). Returns the empirical
    mean and variance of beta over the retained draws.
    """
    rng = np.random.default_rng(seed)
    n, k = X.shape
    XtX = X.T @ X
    Xty = X.T @ y
    tau2inv = 1.0
    sig2inv = 1.0
    draws = np.empty((n_draws, k))
    for t in range(burn + n_draws):
        M = XtX + tau2inv * np.eye(k)
        Minv = np.linalg.inv(M)
        mean = Minv @ Xty
        cov = Minv / sig2inv
        beta = rng.multivariate_normal(mean, cov)
        bb = float(beta @ beta)
        tau2inv = rng.gamma(a + 0.5 * k, 1.0 / (b + 0.5 * sig2inv * bb))
        resid = y - X @ beta
        rate = d + 0.5 * float(resid @ resid) + 0.5 * tau2inv * bb
        sig2inv = rng.gamma(c + 0.5 * (n + k), 1.0 / rate)
        if t >= burn:
            draws[t - burn] = beta
    return draws.mean(axis=0), draws.var(axis=0, ddof=1)


def quadrature_log_evidence(y, x, a, b, c, d):
    """Exact log marginal likelihood for a one-covariate regression.

    sigma^2 and beta integrate out analytically; the remaining integral
    over t = tau^-2 is done numerically on the log scale. With
    A = I + x x^T / t:  |A| = 1 + ||x||^2 / t and
    y' A^-1 y = y'y - (x'y)^2 / (t + ||x||^2).
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float).ravel()
    n = y.shape[0]
    yty = float(y @ y)
    xty = float(x @ y)
    xtx = float(x @ x)
    const = (
        -0.5 * n * np.log(2.0 * np.pi)
        + c * np.log(d)
        + gammaln(c + 0.5 * n)
        - gammaln(c)
        + a * np.log(b)
        - gammaln(a)
    )

    def log_integrand(u):
        t = np.exp(u)
        log_prior = a * u - b * t  # gamma density times the du Jacobian
        logdet_a = np.log1p(xtx / t)
        quad_form = yty - xty * xty / (t + xtx)
        return (
            log_prior
            - 0.5 * logdet_a
            - (c + 0.5 * n) * np.log(d + 0.5 * quad_form)
        )

    us = np.linspace(-200.0, 200.0, 20_001)
    vals = log_integrand(us)
    shift = vals.max()
    integral = integrate.trapezoid(np.exp(vals - shift), us)
    return const + shift + float(np.log(integral))


def pooled_prior_objective(a, b, e_tau2inv, e_log_tau2inv):
    """Expected complete-data log prior of the local precisions."""
    e_tau2inv = np.asarray(e_tau2inv, dtype=float)
    e_log_tau2inv = np.asarray(e_log_tau2inv, dtype=float)
    p = e_tau2inv.shape[0]
    return (
        p * (a * np.log(b) - gammaln(a))
        + (a - 1.0) * float(np.sum(e_log_tau2inv))
        - b * float(np.sum(e_tau2inv))
    )


def grid_maximizer(e_tau2inv, e_log_tau2inv, a_lo=1e-4, a_hi=1e4):
    """Grid + iterative refinement maximizer of the pooled objective.

    The rate profile b(a) = a p / sum(E[tau^-2]) is exact, so the search
    is one-dimensional in the shape.
    """
    e_tau2inv = np.asarray(e_tau2inv, dtype=float)
    p = e_tau2inv.shape[0]
    total = float(np.sum(e_tau2inv))

    def value(a):
        return pooled_prior_objective(a, a * p / total, e_tau2inv,
                                      e_log_tau2inv)

    lo, hi = np.log(a_lo), np.log(a_hi)
    for _ in range(40):
        grid = np.linspace(lo, hi, 201)
        vals = np.array([value(np.exp(g)) for g in grid])
        best = int(np.argmax(vals))
        step = grid[1] - grid[0]
        lo = grid[max(best - 1, 0)]
        hi = grid[min(best + 1, len(grid) - 1)]
        if step < 1e-14:
            break
    a_hat = float(np.exp(0.5 * (lo + hi)))
    return a_hat, a_hat * p / total
