"""Local Bayesian linear regression for learning stochastic dynamics."""
from .errors import (
    ContractViolation,
    HBLRError,
    InvalidInputError,
    InvalidParameterError,
    ModelFileError,
    NumericalFailure,
    ParseError,
    SchemaError,
)
from .dataset import Dataset
from .features import feature_matrix, feature_vector, rbf_weight, rbf_weights
from .fileio import load_model, read_dataset, save_model, write_dataset
from .predictor import evaluate, predict_averaged, predict_distribution, predict_many
from .segmentation import SegmentedModel, train_segmented
from .trainer import BatchModel, HyperParams, LocalModel, fit_batch

__version__ = "0.1.0"
