"""
Supervised fitting of teacher networks on real data
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from src.constants import STUDENT_WEIGHT_DECAY, TEACHER_BATCH_SIZE, TEACHER_EPOCHS, TEACHER_LR
from src.dataset import Dataset, DatasetSplit
from src.errors import InvalidArgumentError
from src.models import DifferentiableModel
from src.optim import OptimizerState, optimizer_step
from src.systems.distillation import evaluate
from src.tensor import GradTape, Tensor2, loss_op

logger = logging.getLogger(__name__)


@dataclass
class FitConfig:
    epochs: int = TEACHER_EPOCHS
    batch_size: int = TEACHER_BATCH_SIZE
    lr: float = TEACHER_LR
    weight_decay: float = STUDENT_WEIGHT_DECAY
    loss: str = "mse"
    seed: int = 0
    log_every: int = 20

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise InvalidArgumentError("teacher epochs must be >= 0 and batch size >= 1")


@dataclass
class FitReport:
    """Per-split errors of a fitted model"""

    rmse: Dict[str, float] = field(default_factory=dict)


def fit_network(model: DifferentiableModel, train: Dataset, config: FitConfig,
                validation: Optional[Dataset] = None) -> DifferentiableModel:
    """Mini-batch RMSProp on the training set; returns the best-validation copy when validation is given"""
    if train.n_features != model.input_dim:
        raise InvalidArgumentError(f"model expects {model.input_dim} features, data has {train.n_features}")
    rng = np.random.default_rng(config.seed)
    state = OptimizerState("rmsprop", config.lr, weight_decay=config.weight_decay)
    best, best_rmse = model.copy(), None
    n = train.n_samples

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            rows = order[start:start + config.batch_size]
            tape = GradTape()
            weights = [tape.watch(w) for w in model.weights]
            pred = model.forward(Tensor2._wrap(train.features[rows]), weights)
            loss = loss_op(config.loss, pred, train.targets[rows])
            grads = tape.gradient(loss, weights)
            flat = np.concatenate([g.reshape(-1) for g in grads])
            model.set_flat(optimizer_step(state, model.get_flat(), flat))

        if validation is not None and validation.n_samples > 0:
            rmse = evaluate(model, validation, "rmse")
            if best_rmse is None or rmse < best_rmse:
                best, best_rmse = model.copy(), rmse
            if epoch % config.log_every == 0:
                logger.info("Teacher epoch %d/%d: validation RMSE %.6g", epoch, config.epochs, rmse)
        elif epoch % config.log_every == 0:
            logger.info("Teacher epoch %d/%d: train RMSE %.6g", epoch, config.epochs,
                        evaluate(model, train, "rmse"))

    return best if best_rmse is not None else model


def split_report(model, data: DatasetSplit) -> FitReport:
    """RMSE on every non-empty split"""
    report = FitReport()
    for name in ("train", "validation", "test"):
        part = getattr(data, name)
        if part.n_samples > 0:
            report.rmse[name] = evaluate(model, part, "rmse")
            logger.info("Teacher %s RMSE: %.6g", name, report.rmse[name])
    return report
