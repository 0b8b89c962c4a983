"""Error-controlled nonlinear feature selection for ultra-high-dimensional,
highly correlated data.

The pipeline renders marginals Gaussian with a rank-based transform,
screens features by a characteristic-function dependence statistic,
clusters the survivors along the estimated conditional-dependence graph,
ranks cluster representatives by how long they survive an L1 path through
a residual network, and selects clusters whose bootstrap-rank stability
keeps the estimated false discovery rate below the target level.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .cleaning import (
    BootstrapRanks,
    SelectionResult,
    bootstrap_ranks,
    detect_kappa,
    estimate_e0,
    ranks_from_scores,
    select_clusters,
)
from .data_model import (
    AUTO,
    ConfigError,
    Dataset,
    RunConfig,
    TruthSpec,
    ValidationError,
    derive_seed,
    load_csv,
    validate,
    write_csv,
)
from .evaluate import ExperimentSummary, fit_predict, power_fdr, run_experiment
from .graph_cluster import ClusterSet, PrecisionSupport, build_clusters, lasso_cd, nodewise_support
from .lassonet import (
    ImportanceScores,
    ResidualNet,
    forward,
    hier_prox,
    lasso_path,
    train_dense,
)
from .nonparanormal import TransformedDataset, npn_transform, truncated_ecdf
from .pipeline import PipelineResult, build_report, select_features, selected_feature_union
from .screening import ScreeningResult, hz_bandwidth, hz_statistic, screen
from .simgen import SimDesign, generate, toeplitz_cholesky

__version__ = "0.1.0"

__all__ = [
    "AUTO",
    "BootstrapRanks",
    "ClusterSet",
    "ConfigError",
    "Dataset",
    "ExperimentSummary",
    "ImportanceScores",
    "KERNEL_BACKEND",
    "PipelineResult",
    "PrecisionSupport",
    "ResidualNet",
    "RunConfig",
    "ScreeningResult",
    "SelectionResult",
    "SimDesign",
    "TransformedDataset",
    "TruthSpec",
    "ValidationError",
    "bootstrap_ranks",
    "build_clusters",
    "build_report",
    "derive_seed",
    "detect_kappa",
    "estimate_e0",
    "fit_predict",
    "forward",
    "generate",
    "hier_prox",
    "hz_bandwidth",
    "hz_statistic",
    "lasso_cd",
    "lasso_path",
    "load_csv",
    "nodewise_support",
    "npn_transform",
    "power_fdr",
    "ranks_from_scores",
    "run_experiment",
    "screen",
    "select_clusters",
    "select_features",
    "selected_feature_union",
    "toeplitz_cholesky",
    "train_dense",
    "truncated_ecdf",
    "validate",
    "write_csv",
]
