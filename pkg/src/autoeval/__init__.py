"""Label-free accuracy estimation from dataset-level feature statistics."""
from .classifier import (
    FeatureBundle,
    LabeledImageSet,
    TinyClassifier,
    TrainConfig,
    accuracy,
    bundle_accuracy,
    extract_features,
    train_classifier,
)
from .config import ExperimentConfig, dump_config, load_config
from .errors import (
    AutoEvalError,
    ConfigError,
    DegenerateInputError,
    FormatError,
    InsufficientDataError,
    NumericalError,
    ParameterError,
    ShapeError,
    TrainingError,
    ValidationError,
)
from .formats import read_bundle, read_stats, write_bundle, write_stats
from .harness import (
    PredictionReport,
    Workbench,
    run_correlation_study,
    run_method_comparison,
    run_robustness_suite,
    run_size_ablation,
)
from .predictors import (
    DatasetRepresentation,
    LinearPredictor,
    NeuralConfig,
    NeuralPredictor,
    assemble_representation,
    fit_linear,
    fit_neural,
    predict_confidence,
    predict_linear,
    predict_neural,
)
from .stats import DatasetStats, compute_stats, frechet_distance, mae, rmse, spearman_rho, sqrtm_psd

__version__ = "0.1.0"


__all__ = [
    "accuracy",
    "assemble_representation",
    "AutoEvalError",
    "bundle_accuracy",
    "compute_stats",
    "ConfigError",
    "DatasetRepresentation",
    "DatasetStats",
    "DegenerateInputError",
    "dump_config",
    "ExperimentConfig",
    "extract_features",
    "FeatureBundle",
    "fit_linear",
    "fit_neural",
    "FormatError",
    "frechet_distance",
    "InsufficientDataError",
    "LabeledImageSet",
    "LinearPredictor",
    "load_config",
    "mae",
    "NeuralConfig",
    "NeuralPredictor",
    "NumericalError",
    "ParameterError",
    "predict_confidence",
    "predict_linear",
    "predict_neural",
    "PredictionReport",
    "read_bundle",
    "read_stats",
    "rmse",
    "run_correlation_study",
    "run_method_comparison",
    "run_robustness_suite",
    "run_size_ablation",
    "ShapeError",
    "spearman_rho",
    "sqrtm_psd",
    "TinyClassifier",
    "train_classifier",
    "TrainConfig",
    "TrainingError",
    "ValidationError",
    "Workbench",
    "write_bundle",
    "write_stats",
]
