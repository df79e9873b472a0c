"""Network reconstruction from expression data with global-local shrinkage."""

__version__ = "0.1.0"

from .data import (  # noqa: F401
    ExpressionMatrix,
    RegressionProblem,
    ReducedProblem,
    back_transform,
    build_problem,
    load_expression_matrix,
    standardize,
    svd_reduce,
)
from .em import (  # noqa: F401
    EmConfig,
    SemFit,
    eb_update_approx,
    eb_update_fixedpoint,
    fit_sem,
)
from .pipeline import InferenceResult, infer_network  # noqa: F401
from .selection import (  # noqa: F401
    EdgeRanking,
    SelectionResult,
    StopConfig,
    estimate_p0,
    forward_select,
    kappa_scores,
    rank_edges,
    selection_bayes_factor,
    threshold_gamma,
)
from .simulate import (  # noqa: F401
    GraphSpec,
    PrecisionMatrix,
    make_structure,
    partial_correlations,
    sample_mvn,
    sample_precision,
)
from .vb import (  # noqa: F401
    HyperParameters,
    VariationalPosterior,
    expected_moments,
    fit_local,
    lower_bound,
    vb_sweep,
)
