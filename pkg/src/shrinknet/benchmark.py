"""Simulation drivers: the model-based benchmark over synthetic graphs and
the random-splitting reproducibility/stability harness.

Every task derives its own RNG stream from (master seed, task index), so
results are bit-reproducible and independent of worker scheduling.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import ExpressionMatrix, standardize
from .em import EmConfig
from .errors import GenerationFailureError, InvalidParamsError
from .metrics import (
    confusion,
    partial_roc,
    random_split,
    scores,
    stability_report,
)
from .pipeline import infer_network
from .simulate import (
    GRAPH_KINDS,
    GraphSpec,
    make_structure,
    sample_mvn,
    sample_precision,
)

#: Expected-false-edge budget used by the stability harness by default.
DEFAULT_EV = 30.0

METHODS = ("shrinknet", "noshrink")

_PRECISION_RETRIES = 10


@dataclass(frozen=True)
class SimConfig:
    kinds: tuple = ("band",)
    p: int = 50
    n_list: tuple = (25, 50, 100)
    reps: int = 10
    seed: int = 0
    alpha: float = 0.1
    dof: float = 4.0
    methods: tuple = METHODS
    threads: int = 1
    em_tol: float = 1e-3
    em_max_iter: int = 1000

    def __post_init__(self):
        for kind in self.kinds:
            if kind not in GRAPH_KINDS:
                raise InvalidParamsError(
                    f"unknown graph kind {kind!r}; valid kinds: "
                    f"{', '.join(GRAPH_KINDS)}"
                )
        for meth in self.methods:
            if meth not in METHODS:
                raise InvalidParamsError(
                    f"unknown method {meth!r}; valid methods: "
                    f"{', '.join(METHODS)}"
                )


def em_config_for(method: str, config: SimConfig) -> EmConfig:
    return EmConfig(
        tol=config.em_tol,
        max_iter=config.em_max_iter,
        global_shrinkage=(method == "shrinknet"),
    )


def _simulate_dataset(kind: str, p: int, n: int, dof: float, rng):
    """Structure, precision (with retries on rare completion failures), data."""
    g = make_structure(kind, p, rng=rng)
    last_err = None
    for _ in range(_PRECISION_RETRIES):
        try:
            omega = sample_precision(g, dof=dof, rng=rng)
            break
        except GenerationFailureError as err:
            last_err = err
    else:
        raise GenerationFailureError(
            f"precision generation failed after {_PRECISION_RETRIES} "
            f"attempts: {last_err}"
        )
    data = sample_mvn(omega, n, rng=rng)
    return g, omega, data


def _run_sim_task(args):
    config, kind, n, rep, seed_seq = args
    rng = np.random.default_rng(seed_seq)
    rows = []
    try:
        g, _, data = _simulate_dataset(kind, config.p, n, config.dof, rng)
        std = standardize(data)
        for method in config.methods:
            result = infer_network(
                std,
                em_config=em_config_for(method, config),
                alpha=config.alpha,
                pre_standardized=True,
            )
            _, pauc = partial_roc(result.ranking, g)
            tpr, fpr, precision, f = scores(
                confusion(result.selection.selected, g)
            )
            rows.append(
                {
                    "kind": kind,
                    "n": n,
                    "rep": rep,
                    "method": method,
                    "tpr": tpr,
                    "fpr": fpr,
                    "precision": precision,
                    "f_score": f,
                    "pauc": pauc,
                    "n_selected": len(result.selection.selected),
                    "p0_hat": result.p0_hat,
                    "a": result.fit.hyper.a,
                    "b": result.fit.hyper.b,
                    "em_iterations": result.fit.em_iterations,
                    "error": "",
                }
            )
    except Exception as err:  # record failed replicates, never drop them
        rows.append(
            {
                "kind": kind,
                "n": n,
                "rep": rep,
                "method": "",
                "error": f"{type(err).__name__}: {err}",
            }
        )
    return rows


@dataclass
class SimResult:
    rows: list = field(default_factory=list)
    summary: list = field(default_factory=list)
    n_failed: int = 0


def run_model_sim(config: SimConfig) -> SimResult:
    """Benchmark both fit modes over replicated synthetic networks."""
    tasks = []
    root = np.random.SeedSequence(config.seed)
    combos = [
        (kind, n, rep)
        for kind in config.kinds
        for n in config.n_list
        for rep in range(config.reps)
    ]
    children = root.spawn(len(combos))
    for (kind, n, rep), child in zip(combos, children):
        tasks.append((config, kind, n, rep, child))
    if config.threads > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            chunks = list(pool.map(_run_sim_task, tasks))
    else:
        chunks = [_run_sim_task(t) for t in tasks]
    rows = [row for chunk in chunks for row in chunk]
    ok = [r for r in rows if not r["error"]]
    failed = [r for r in rows if r["error"]]
    summary = []
    for kind in config.kinds:
        for n in config.n_list:
            for method in config.methods:
                cell = [
                    r
                    for r in ok
                    if r["kind"] == kind and r["n"] == n
                    and r["method"] == method
                ]
                if not cell:
                    continue
                entry = {"kind": kind, "n": n, "method": method,
                         "reps": len(cell)}
                for key in ("tpr", "fpr", "f_score", "pauc"):
                    vals = np.array([r[key] for r in cell])
                    entry[f"{key}_mean"] = float(vals.mean())
                    entry[f"{key}_sd"] = float(vals.std(ddof=1)) if len(
                        vals
                    ) > 1 else 0.0
                summary.append(entry)
    return SimResult(rows=rows, summary=summary, n_failed=len(failed))


@dataclass(frozen=True)
class SplitConfig:
    n_small: int
    resamples: int = 100
    seed: int = 0
    alpha: float = 0.1
    e_v: float = DEFAULT_EV
    methods: tuple = METHODS
    threads: int = 1
    em_tol: float = 1e-3
    em_max_iter: int = 1000
    validate_on_large: bool = True


def _run_split_task(args):
    values, gene_ids, sample_ids, cfg, split_idx, seed_seq = args
    m = ExpressionMatrix(values, gene_ids, sample_ids)
    rng = np.random.default_rng(seed_seq)
    small, large = random_split(m, cfg.n_small, rng=rng)
    out = {}
    for method in cfg.methods:
        em = EmConfig(
            tol=cfg.em_tol,
            max_iter=cfg.em_max_iter,
            global_shrinkage=(method == "shrinknet"),
        )
        res_small = infer_network(standardize(small), em_config=em,
                                  alpha=cfg.alpha, pre_standardized=True)
        entry = {
            "selected_small": sorted(res_small.selection.selected),
            "kappa_bar_small": [e.kappa_bar for e in res_small.ranking],
            "edge_order_small": [(e.i, e.j) for e in res_small.ranking],
        }
        if cfg.validate_on_large:
            res_large = infer_network(standardize(large), em_config=em,
                                      alpha=cfg.alpha, pre_standardized=True)
            entry["selected_large"] = sorted(res_large.selection.selected)
        out[method] = entry
    return split_idx, out


@dataclass
class SplitHarnessResult:
    stability: dict  # method -> StabilityReport
    per_split: list  # list of per-split dicts, split order
    validation: dict  # method -> list of (tpr, fpr) vs own large-split set
    config: SplitConfig = None


def run_split_harness(m: ExpressionMatrix, cfg: SplitConfig) -> SplitHarnessResult:
    """Repeated random splits: stability frequencies and, optionally,
    small-split selections validated against the method's own large-split
    selection."""
    p = m.n_genes
    big_p = p * (p - 1) // 2
    root = np.random.SeedSequence(cfg.seed)
    children = root.spawn(cfg.resamples)
    tasks = [
        (m.values, m.gene_ids, m.sample_ids, cfg, idx, child)
        for idx, child in enumerate(children)
    ]
    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(_run_split_task, tasks))
    else:
        results = [_run_split_task(t) for t in tasks]
    results.sort(key=lambda t: t[0])
    per_split = [out for _, out in results]
    stability = {}
    validation = {}
    for method in cfg.methods:
        selections = [out[method]["selected_small"] for out in per_split]
        stability[method] = stability_report(selections, cfg.e_v, big_p)
        if cfg.validate_on_large:
            pairs = []
            for out in per_split:
                bench_edges = {tuple(e) for e in out[method]["selected_large"]}
                small_sel = {tuple(e) for e in out[method]["selected_small"]}
                tp = len(small_sel & bench_edges)
                fp = len(small_sel - bench_edges)
                fn = len(bench_edges - small_sel)
                tn = big_p - tp - fp - fn
                tpr = tp / (tp + fn) if tp + fn else 0.0
                fpr = fp / (fp + tn) if fp + tn else 0.0
                pairs.append((tpr, fpr))
            validation[method] = pairs
    return SplitHarnessResult(
        stability=stability,
        per_split=per_split,
        validation=validation,
        config=cfg,
    )


def mean_pairwise_rank_correlation(per_split, method: str,
                                   max_pairs: int | None = None,
                                   rng=None) -> float:
    """Average Spearman correlation of the edge scores across split pairs.

    Scores are aligned on the common edge universe before correlating.
    """
    from .metrics import rank_correlation

    vectors = []
    for out in per_split:
        order = [tuple(e) for e in out[method]["edge_order_small"]]
        kb = out[method]["kappa_bar_small"]
        lookup = dict(zip(order, kb))
        universe = sorted(lookup)
        vectors.append(np.array([lookup[e] for e in universe]))
    n = len(vectors)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if max_pairs is not None and len(pairs) > max_pairs:
        rng = np.random.default_rng(rng)
        idx = rng.choice(len(pairs), size=max_pairs, replace=False)
        pairs = [pairs[k] for k in idx]
    rhos = [rank_correlation(vectors[i], vectors[j]) for i, j in pairs]
    return float(np.mean(rhos))
