"""Sparse interaction additive networks.

Train additive models whose shape functions are small neural networks,
select which feature interactions deserve a shape function via a
heredity-guided search driven by a higher-order Archipelago detector, and
verify the machinery against brute-force oracles on pseudo-boolean
functions.
"""

from .anova import (
    AnovaDecomposition,
    FourierTable,
    TheoryParams,
    anova_decompose,
    cube_lookup,
    cube_points,
    downward_closure,
    exact_archipelago_expectation,
    fourier_transform,
    histogram_benefit,
    interaction_mass,
    inverse_fourier,
    sample_spectrum_masses,
    upper_cone_mass,
    zeta_even,
)
from .data import (
    CsvSchema,
    Dataset,
    SplitPlan,
    Standardizer,
    auprc,
    auroc,
    fold_summary,
    load_csv,
    metrics,
    standardize,
)
from .detect import (
    ArchipelagoReport,
    DetectionContext,
    ScoreRecord,
    aggregate,
    aggregate_detailed,
    archi_score,
    score_family,
    two_point_score,
)
from .errors import (
    ArchitectureError,
    ConfigError,
    DataError,
    DegenerateDirectionError,
    DetectionImpossibleError,
    DomainError,
    FamilyLookupError,
    FormatError,
    MeasureError,
    ResourceLimitError,
    ShapeMismatchError,
    SianError,
    StaleCacheError,
    TrainingDivergedError,
    UndefinedMetricError,
)
from .fis import (
    FisConfig,
    InteractionFamily,
    SkippedCandidateWarning,
    family_from_json,
    family_to_architecture,
    family_to_json,
    heredity_score,
    load_family,
    save_family,
    select_interactions,
)
from .model import (
    GamArchitecture,
    InteractionSet,
    ShapeGrid,
    SianModel,
    SianTrainResult,
    build_sian,
    convert_mode,
    default_grid_points,
    eval_shape,
    load_sian,
    n_params,
    save_sian,
    sian_forward,
    train_sian,
)
from .nn import CLASSIFICATION, REGRESSION, Mlp, TaskHead, TrainConfig
from .oracle import SUITES, CheckResult, SuiteReport, run_suite
from .tensor import (
    BlockDiagMatrix,
    CsrMatrix,
    Matrix,
    Rng,
    block_forward,
    from_csr,
    matmul,
    to_csr,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # linear algebra and randomness
    "Matrix", "BlockDiagMatrix", "CsrMatrix", "Rng",
    "matmul", "block_forward", "to_csr", "from_csr",
    # networks and training
    "Mlp", "TaskHead", "REGRESSION", "CLASSIFICATION", "TrainConfig",
    # additive models
    "InteractionSet", "GamArchitecture", "SianModel", "SianTrainResult",
    "ShapeGrid", "build_sian", "sian_forward", "train_sian", "convert_mode",
    "save_sian", "load_sian", "eval_shape", "default_grid_points", "n_params",
    # interaction detection
    "DetectionContext", "ScoreRecord", "ArchipelagoReport",
    "archi_score", "two_point_score", "aggregate", "aggregate_detailed",
    "score_family",
    # interaction selection
    "FisConfig", "InteractionFamily", "SkippedCandidateWarning",
    "select_interactions", "heredity_score", "family_to_architecture",
    "family_to_json", "family_from_json", "save_family", "load_family",
    # exact analysis on the hypercube and on grids
    "FourierTable", "fourier_transform", "inverse_fourier",
    "cube_points", "cube_lookup", "upper_cone_mass",
    "exact_archipelago_expectation", "downward_closure",
    "AnovaDecomposition", "anova_decompose",
    "TheoryParams", "zeta_even", "interaction_mass",
    "histogram_benefit", "sample_spectrum_masses",
    # data handling and metrics
    "Dataset", "CsvSchema", "load_csv", "SplitPlan", "Standardizer",
    "standardize", "auroc", "auprc", "metrics", "fold_summary",
    # verification suites
    "CheckResult", "SuiteReport", "SUITES", "run_suite",
    # errors
    "SianError", "ShapeMismatchError", "FormatError", "StaleCacheError",
    "ArchitectureError", "FamilyLookupError", "MeasureError", "DomainError",
    "DegenerateDirectionError", "DetectionImpossibleError",
    "ResourceLimitError", "TrainingDivergedError", "DataError",
    "ConfigError", "UndefinedMetricError",
]
