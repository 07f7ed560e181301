"""Joint mirror multiple testing across K experiments.

Detects features whose signal is present simultaneously in every one of
K experiments, with finite-sample control of the false discovery rate.
P-values are masked by folding around the rejection cut, candidate
features are revealed one at a time along a partial order, and the
running false discovery estimate decides when to stop.
"""

from .engine import (
    DirectionalResult,
    JMConfig,
    JMResult,
    default_threshold_grid,
    run_directional,
    run_jm,
)
from .io import InputDataError, ingest, write_matrix
from .poset import ORDER_KINDS, build_index, dominance_matrix, transitive_reduction
from .regions import (
    MaskingScheme,
    OUTSIDE,
    REJECTION,
    STANDARD_SCHEME,
    classify,
    classify_all,
    classify_directional,
    dfdp_hat,
    fdp_hat,
    proj,
    proj_h,
)
from .simulate import (
    ExpectedCounts,
    FeatureClass,
    MediationConfig,
    Metrics,
    ReplicabilityConfig,
    TruthTable,
    bh_max_p,
    expected_counts,
    gen_directional,
    gen_mediation,
    gen_pointmass,
    gen_replicability,
    generate_preset,
    metrics,
    metrics_directional,
    run_replications,
)
from .unmask import QHatState, kernel_weight, silverman_bandwidth

__version__ = "0.1.0"

__all__ = [
    "DirectionalResult",
    "ExpectedCounts",
    "FeatureClass",
    "InputDataError",
    "JMConfig",
    "JMResult",
    "MaskingScheme",
    "MediationConfig",
    "Metrics",
    "ORDER_KINDS",
    "OUTSIDE",
    "QHatState",
    "REJECTION",
    "ReplicabilityConfig",
    "STANDARD_SCHEME",
    "TruthTable",
    "bh_max_p",
    "build_index",
    "classify",
    "classify_all",
    "classify_directional",
    "default_threshold_grid",
    "dfdp_hat",
    "dominance_matrix",
    "expected_counts",
    "fdp_hat",
    "gen_directional",
    "gen_mediation",
    "gen_pointmass",
    "gen_replicability",
    "generate_preset",
    "ingest",
    "kernel_weight",
    "metrics",
    "metrics_directional",
    "proj",
    "proj_h",
    "run_directional",
    "run_jm",
    "run_replications",
    "silverman_bandwidth",
    "transitive_reduction",
    "write_matrix",
    "__version__",
]
