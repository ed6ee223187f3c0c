"""
First-order optimizers over flat parameter vectors
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.constants import RMSPROP_EPS, RMSPROP_RHO, STUDENT_LR
from src.errors import InvalidArgumentError

OPTIMIZER_KINDS = ("vanilla-gd", "rmsprop")


@dataclass
class OptimizerState:
    """Optimizer settings plus the per-parameter RMSProp accumulators"""

    kind: str = "rmsprop"
    learning_rate: float = STUDENT_LR
    rho: float = RMSPROP_RHO
    eps: float = RMSPROP_EPS
    weight_decay: float = 0.0
    accumulators: Optional[np.ndarray] = None  # second moments, set on first step

    def __post_init__(self):
        if self.kind not in OPTIMIZER_KINDS:
            raise InvalidArgumentError(f"unknown optimizer '{self.kind}', expected one of {OPTIMIZER_KINDS}")
        if self.learning_rate < 0:
            raise InvalidArgumentError(f"learning rate must be >= 0, got {self.learning_rate}")
        if not 0.0 < self.rho < 1.0:
            raise InvalidArgumentError(f"rho must lie in (0, 1), got {self.rho}")
        if self.eps <= 0:
            raise InvalidArgumentError(f"eps must be positive, got {self.eps}")
        if self.weight_decay < 0:
            raise InvalidArgumentError(f"weight decay must be >= 0, got {self.weight_decay}")

    def initialize(self, size: int):
        """Zero the accumulators for a parameter vector of the given length"""
        self.accumulators = np.zeros(size)

    def fresh(self) -> "OptimizerState":
        """Same settings, no accumulated state"""
        return OptimizerState(self.kind, self.learning_rate, self.rho, self.eps, self.weight_decay)


def optimizer_step(state: OptimizerState, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """One update; weight decay enters as an additive lambda * p gradient term"""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape:
        raise InvalidArgumentError(f"params {params.shape} and grads {grads.shape} differ in shape")

    step = grads
    if state.weight_decay:
        step = grads + state.weight_decay * params

    if state.kind == "vanilla-gd":
        return params - state.learning_rate * step

    if state.accumulators is None:
        state.initialize(params.size)
    elif state.accumulators.size != params.size:
        raise InvalidArgumentError(
            f"optimizer holds {state.accumulators.size} accumulators, got {params.size} parameters")
    flat_grads = grads.reshape(-1)
    # accumulator sees the raw gradient, before weight decay
    state.accumulators = state.rho * state.accumulators + (1.0 - state.rho) * flat_grads * flat_grads
    denom = np.sqrt(state.accumulators + state.eps).reshape(params.shape)
    return params - state.learning_rate * step / denom
