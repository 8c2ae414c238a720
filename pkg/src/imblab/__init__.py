"""Tools for studying how the positive weight scalar interacts with model
complexity on class-imbalanced binary classification tasks.

The package bundles seeded synthetic data generators, the two standard
imbalance mechanisms (cost-sensitive weights and biased resampling),
from-scratch trainers for logistic regression, gradient boosted trees and
small MLPs, a resumable sweep harness, and OLS diagnostics for relating
the best weight scalar to hyperparameters.
"""

__version__ = "0.1.0"

from imblab.dataio import Dataset, GeneratorConfig, LogisticGroundTruth
from imblab.metrics import ConfusionCounts, MetricsReport
from imblab.reweight import PwsConfig, WeightedDataset

__all__ = [
    "Dataset",
    "GeneratorConfig",
    "LogisticGroundTruth",
    "ConfusionCounts",
    "MetricsReport",
    "PwsConfig",
    "WeightedDataset",
    "__version__",
]
