"""
Executable checks of the displacement and norm guarantees for synthetic inputs
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from src.errors import CapabilityError, InvalidArgumentError
from src.systems.synthesis import OptimizeTrace
from src.tensor import GradTape, Tensor2, sum_all

logger = logging.getLogger(__name__)

SLACK = 1e-12
K_CONVENTIONS = ("trace", "initial")


@dataclass
class BoundReport:
    """One bound check: satisfied means observed <= bound within SLACK"""

    check: str
    t: int
    d: int
    eta: Optional[float]
    k_hat: float
    k_convention: str
    bound: float
    observed: float
    exact_bound: Optional[float] = None
    advisory: bool = False
    trace: str = ""

    @property
    def satisfied(self) -> bool:
        return bool(self.observed <= self.bound + SLACK)

    @property
    def exact_satisfied(self) -> Optional[bool]:
        if self.exact_bound is None:
            return None
        return bool(self.observed <= self.exact_bound + SLACK)


Objective = Union[Callable[[Tensor2], Tensor2], object]


def _row_objective(objective: Objective) -> Callable[[Tensor2], Tensor2]:
    if hasattr(objective, "gradient_capable"):
        if not objective.gradient_capable:
            kind = getattr(objective, "kind", type(objective).__name__)
            raise CapabilityError(f"cannot estimate a gradient bound for gradient-free '{kind}'")
        return objective.forward
    if not callable(objective):
        raise InvalidArgumentError("objective must be callable or a model")
    return objective


def estimate_lipschitz(objective: Objective, samples) -> float:
    """Largest per-coordinate gradient magnitude of a row-wise objective over the samples"""
    function = _row_objective(objective)
    x = Tensor2(samples).data
    if x.shape[0] < 1:
        raise InvalidArgumentError("need at least one sample")
    tape = GradTape()
    leaf = tape.watch(x)
    grad = tape.gradient(sum_all(function(leaf)), leaf)
    return float(np.max(np.abs(grad)))


def _row_norms(array: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(array * array, axis=1))


def check_displacement_bound(trace: OptimizeTrace, eta: Optional[float] = None,
                             k_hat: Optional[float] = None, k_convention: str = "trace",
                             label: str = "") -> BoundReport:
    """Distance moved by plain gradient descent against eta * t * sqrt(d) * K and eta * sum ||g_s||.

    Rows of the batch are checked separately and the report carries the
    largest displacement. K is estimated from the gradients recorded along
    the trace ("trace") or at the starting point only ("initial") unless
    given explicitly.
    """
    if trace.method != "gd":
        raise InvalidArgumentError(f"displacement bounds cover plain gradient descent, not {trace.method}")
    if k_convention not in K_CONVENTIONS:
        raise InvalidArgumentError(f"unknown K convention '{k_convention}', expected one of {K_CONVENTIONS}")
    if not trace.final:
        raise InvalidArgumentError("trace does not end at the returned point; record it with record_final=True")
    eta = trace.lr if eta is None else eta
    points = trace.points
    grads = trace.grads
    if not points:
        raise InvalidArgumentError("trace holds no points")
    t = len(points) - 1
    if len(grads) < t:
        raise InvalidArgumentError(f"trace has {t} steps but only {len(grads)} gradients")
    d = points[0].shape[1]

    if k_hat is None:
        if not grads:
            k_hat = 0.0
        elif k_convention == "trace":
            k_hat = float(max(np.max(np.abs(g)) for g in grads))
        else:
            k_hat = float(np.max(np.abs(grads[0])))
    else:
        k_convention = "given"

    moved = _row_norms(points[-1] - points[0])
    path = eta * sum((_row_norms(g) for g in grads[:t]), np.zeros(points[0].shape[0]))
    # shifted so that observed <= exact_bound iff every row meets its own path bound
    worst = int(np.argmax(moved - path))
    report = BoundReport("displacement", t, d, eta, k_hat, k_convention,
                         bound=eta * t * np.sqrt(d) * k_hat, observed=float(moved.max()),
                         exact_bound=float(path[worst] + moved.max() - moved[worst]), trace=label)
    if not report.satisfied:
        logger.debug("displacement bound failed with %s K: %.6g > %.6g", k_convention, report.observed, report.bound)
    return report


def check_generator_norm_bound(x_g, beta: float, k_hat: float, d: Optional[int] = None,
                               converged: bool = False, label: str = "") -> BoundReport:
    """Largest row norm of a generator batch against sqrt(d) * K / (2 beta).

    The bound describes a generator at a stationary point; before that the
    report is advisory.
    """
    if beta <= 0:
        raise InvalidArgumentError(f"the norm bound needs beta > 0, got {beta}")
    if k_hat < 0:
        raise InvalidArgumentError(f"K must be >= 0, got {k_hat}")
    x = Tensor2(x_g).data
    d = x.shape[1] if d is None else d
    return BoundReport("generator-norm", 0, d, None, float(k_hat), "given",
                       bound=float(np.sqrt(d) * k_hat / (2.0 * beta)), observed=float(_row_norms(x).max()),
                       advisory=not converged, trace=label)


def local_curvature(trace: OptimizeTrace) -> float:
    """Largest ||g_{s+1} - g_s|| / ||x_{s+1} - x_s|| along the trace"""
    points, grads = trace.points, trace.grads
    worst = 0.0
    for s in range(min(len(points), len(grads)) - 1):
        step = np.linalg.norm(points[s + 1] - points[s])
        if step > 0:
            worst = max(worst, float(np.linalg.norm(grads[s + 1] - grads[s]) / step))
    return worst


def check_descent(trace: OptimizeTrace, label: str = "") -> BoundReport:
    """Largest loss increase between consecutive iterates, against zero.

    Plain gradient descent only promises descent when the step size is
    below 2 / curvature, so the report is advisory whenever the measured
    curvature exceeds that.
    """
    if trace.method != "gd":
        raise InvalidArgumentError(f"descent checks cover plain gradient descent, not {trace.method}")
    losses = np.asarray(trace.losses)
    rise = float(np.max(np.diff(losses))) if losses.size > 1 else 0.0
    curvature = local_curvature(trace)
    d = trace.points[0].shape[1] if trace.points else 0
    return BoundReport("descent", max(losses.size - 1, 0), d, trace.lr, curvature, "curvature",
                       bound=0.0, observed=max(rise, 0.0), advisory=curvature * trace.lr > 2.0, trace=label)
