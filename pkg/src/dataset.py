"""
Dataset, scaler and split data structures
"""
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from src.constants import SPLIT_TRAIN, SPLIT_VAL_FRACTION
from src.errors import InvalidArgumentError


@dataclass
class Scaler:
    """Per-column affine standardization, (v - mean) / std"""

    feature_mean: np.ndarray
    feature_std: np.ndarray
    target_mean: float = 0.0
    target_std: float = 1.0
    scale_targets: bool = True
    statistic: str = "population"  # divide-by-n standard deviation

    def __post_init__(self):
        self.feature_mean = np.asarray(self.feature_mean, dtype=np.float64).reshape(-1)
        self.feature_std = np.asarray(self.feature_std, dtype=np.float64).reshape(-1)
        if np.any(self.feature_std <= 0) or self.target_std <= 0:
            raise InvalidArgumentError("scaler standard deviations must be positive")

    def transform_features(self, features: np.ndarray) -> np.ndarray:
        return (features - self.feature_mean) / self.feature_std

    def inverse_features(self, features: np.ndarray) -> np.ndarray:
        return features * self.feature_std + self.feature_mean

    def transform_targets(self, targets: np.ndarray) -> np.ndarray:
        if not self.scale_targets:
            return targets
        return (targets - self.target_mean) / self.target_std

    def inverse_targets(self, targets: np.ndarray) -> np.ndarray:
        if not self.scale_targets:
            return targets
        return targets * self.target_std + self.target_mean


@dataclass
class Dataset:
    """Feature matrix, target column, column names and optional scaler"""

    features: np.ndarray
    targets: np.ndarray
    feature_names: List[str] = field(default_factory=list)
    target_name: str = "y"
    scaler: Optional[Scaler] = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64).reshape(-1, 1)
        if self.features.ndim != 2:
            raise InvalidArgumentError(f"features must be n x d, got shape {self.features.shape}")
        if self.features.shape[0] != self.targets.shape[0]:
            raise InvalidArgumentError(
                f"{self.features.shape[0]} feature rows but {self.targets.shape[0]} targets")
        if not self.feature_names:
            self.feature_names = [f"x{i}" for i in range(self.features.shape[1])]
        if len(self.feature_names) != self.features.shape[1]:
            raise InvalidArgumentError("one feature name is needed per column")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: np.ndarray) -> "Dataset":
        """Rows at the given indices, sharing names and scaler"""
        return Dataset(self.features[indices], self.targets[indices], list(self.feature_names),
                       self.target_name, self.scaler)


@dataclass
class SplitSpec:
    """Train count, validation share of the remainder, shuffle seed"""

    train: int = SPLIT_TRAIN
    val_fraction: float = SPLIT_VAL_FRACTION
    seed: int = 0

    def validate(self, n: int):
        if not 0 < self.train < n:
            raise InvalidArgumentError(f"train count {self.train} must lie in [1, {n - 1}] for {n} rows")
        if not 0.0 < self.val_fraction < 1.0:
            raise InvalidArgumentError(f"validation fraction must lie in (0, 1), got {self.val_fraction}")


@dataclass
class DatasetSplit:
    """An exact partition of one dataset"""

    train: Dataset
    validation: Dataset
    test: Dataset
    train_index: np.ndarray
    validation_index: np.ndarray
    test_index: np.ndarray


@dataclass
class DomainStats:
    """Per-feature population mean and standard deviation"""

    mean: np.ndarray
    std: np.ndarray
    low: Optional[np.ndarray] = None
    high: Optional[np.ndarray] = None
