"""survmix: deep survival clustering.

A VAE with a Gaussian-mixture latent prior and cluster-specific Weibull
survival heads, plus benchmark generators, baselines, and survival /
clustering evaluation metrics.
"""

from .datagen import SurvivalDataset, SurvMnistConfig, SyntheticConfig
from .metrics import MetricsReport
from .model import ModelParams, Prediction, TrainConfig, fit, predict

__all__ = [
    "SurvivalDataset",
    "SurvMnistConfig",
    "SyntheticConfig",
    "MetricsReport",
    "ModelParams",
    "Prediction",
    "TrainConfig",
    "fit",
    "predict",
]

__version__ = "0.1.0"
