"""
Synthetic data generation: the generator loss, direct optimization of
inputs (gradient descent, RMSProp, differential evolution) and adversarial
generator rounds
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from src.constants import (DE_CR, DE_F, DE_ITERATIONS, DE_MIN_POPULATION, DE_POPULATION, DIRECT_LR,
                           DIRECT_STEPS, LOSS_BETA, LOSS_EPSILON, LOSS_GAMMA)
from src.errors import CapabilityError, InvalidArgumentError
from src.models import DifferentiableModel, Generator, TeacherOracle
from src.optim import OptimizerState, optimizer_step
from src.systems.evolution import evolve_rows, row_generators
from src.systems.sampling import SamplerSpec, project, sample
from src.tensor import (GradTape, Tensor2, absolute, add, logcosh, mean_all, row_sum, scale, square,
                        sub)

logger = logging.getLogger(__name__)

DISCREPANCIES = ("squared", "logcosh")
INPUT_PENALTIES = ("l2-squared", "l1")
OUTPUT_PENALTIES = ("student-squared", "teacher-to-random", "input-squared", "none")
TARGET_POLICIES = ("none", "integer", "real")
OPTIMIZE_METHODS = ("gd", "rmsprop", "differential-evolution")
DE_STRATEGIES = ("best2bin",)


@dataclass
class GenLossSpec:
    """Weights and forms of the terms in the synthetic-data objective"""

    discrepancy: str = "squared"
    epsilon: float = LOSS_EPSILON
    input_penalty: str = "l2-squared"
    beta: float = LOSS_BETA
    output_penalty: str = "student-squared"
    gamma: float = LOSS_GAMMA
    y_rand: str = "none"  # integer: uniform on 0..9, real: uniform on [0, 1]

    def __post_init__(self):
        if self.discrepancy not in DISCREPANCIES:
            raise InvalidArgumentError(f"unknown discrepancy '{self.discrepancy}'")
        if self.input_penalty not in INPUT_PENALTIES:
            raise InvalidArgumentError(f"unknown input penalty '{self.input_penalty}'")
        if self.output_penalty not in OUTPUT_PENALTIES:
            raise InvalidArgumentError(f"unknown output penalty '{self.output_penalty}'")
        if self.y_rand not in TARGET_POLICIES:
            raise InvalidArgumentError(f"unknown random-target policy '{self.y_rand}'")
        if min(self.epsilon, self.beta, self.gamma) < 0:
            raise InvalidArgumentError("loss weights must be >= 0")
        output_weight = self.gamma if self.output_penalty != "none" else 0.0
        if max(self.epsilon, self.beta, output_weight) <= 0:
            raise InvalidArgumentError("at least one loss term needs a positive weight")
        if (self.y_rand == "none") != (self.output_penalty != "teacher-to-random"):
            raise InvalidArgumentError("a random-target policy goes with, and only with, teacher-to-random")

    @property
    def uses_teacher(self) -> bool:
        return self.epsilon > 0 or (self.output_penalty == "teacher-to-random" and self.gamma > 0)

    def draw_target(self, rng: np.random.Generator) -> Optional[float]:
        """One random target per batch, or None"""
        if self.y_rand == "integer":
            return float(rng.integers(0, 10))
        if self.y_rand == "real":
            return float(rng.uniform(0.0, 1.0))
        return None


@dataclass
class OptimizeSpec:
    """How synthetic inputs are optimized: step rule, step size, step count, DE settings"""

    method: str = "rmsprop"
    lr: float = DIRECT_LR
    steps: int = DIRECT_STEPS
    population: int = DE_POPULATION
    f: float = DE_F
    cr: float = DE_CR
    strategy: str = "best2bin"
    iterations: int = DE_ITERATIONS

    def __post_init__(self):
        if self.method not in OPTIMIZE_METHODS:
            raise InvalidArgumentError(f"unknown optimize method '{self.method}'")
        if self.lr <= 0:
            raise InvalidArgumentError(f"step size must be positive, got {self.lr}")
        if self.steps < 0 or self.iterations < 0:
            raise InvalidArgumentError("step and iteration counts must be >= 0")
        if not 0.0 <= self.f <= 2.0:
            raise InvalidArgumentError(f"F must lie in [0, 2], got {self.f}")
        if not 0.0 <= self.cr <= 1.0:
            raise InvalidArgumentError(f"CR must lie in [0, 1], got {self.cr}")
        if self.strategy not in DE_STRATEGIES:
            raise InvalidArgumentError(f"unsupported DE strategy '{self.strategy}'")
        if self.population < DE_MIN_POPULATION:
            raise InvalidArgumentError(f"DE population must be >= {DE_MIN_POPULATION}")

    @property
    def gradient_free(self) -> bool:
        return self.method == "differential-evolution"

    @property
    def step_count(self) -> int:
        """tau_max: gradient steps, or DE iterations"""
        return self.iterations if self.gradient_free else self.steps


@dataclass
class TraceStep:
    step: int
    x: Optional[np.ndarray]
    loss: float
    grad: Optional[np.ndarray] = None


@dataclass
class OptimizeTrace:
    """Every iterate of one direct optimization run"""

    method: str
    lr: float
    y_rand: Optional[float] = None
    steps: List[TraceStep] = field(default_factory=list)
    final: bool = False  # last step holds the loss and gradient at the returned point

    @property
    def points(self) -> List[np.ndarray]:
        return [step.x for step in self.steps if step.x is not None]

    @property
    def losses(self) -> List[float]:
        return [step.loss for step in self.steps]

    @property
    def grads(self) -> List[np.ndarray]:
        return [step.grad for step in self.steps if step.grad is not None]


def gen_loss_rows(spec: GenLossSpec, x: Tensor2, teacher: TeacherOracle, student: DifferentiableModel,
                  y_rand: Optional[float]) -> Tensor2:
    """Per-row objective: -eps disc(T, S) + beta pen(x) + gamma outpen, as an n x 1 tensor"""
    teacher = TeacherOracle(teacher)
    if x.cols != student.input_dim:
        raise InvalidArgumentError(f"batch width {x.cols} does not match student input {student.input_dim}")
    t_out = teacher.forward(x) if spec.uses_teacher else None
    s_out = None
    terms = []

    if spec.epsilon > 0:
        s_out = student.forward(x)
        gap = sub(t_out, s_out)
        disc = square(gap) if spec.discrepancy == "squared" else logcosh(gap)
        terms.append(scale(disc, -spec.epsilon))
    if spec.beta > 0:
        pen = square(x) if spec.input_penalty == "l2-squared" else absolute(x)
        terms.append(scale(row_sum(pen), spec.beta))
    if spec.gamma > 0 and spec.output_penalty != "none":
        if spec.output_penalty == "student-squared":
            out = square(s_out if s_out is not None else student.forward(x))
        elif spec.output_penalty == "teacher-to-random":
            if y_rand is None:
                raise InvalidArgumentError("teacher-to-random penalty needs a random target")
            out = square(sub(t_out, Tensor2._wrap(np.full((1, 1), y_rand))))
        else:
            out = row_sum(square(x))
        terms.append(scale(out, spec.gamma))

    total = terms[0]
    for term in terms[1:]:
        total = add(total, term)
    return total


def gen_loss(spec: GenLossSpec, x_g, teacher, student: DifferentiableModel,
             rng: Optional[np.random.Generator] = None, y_rand: Optional[float] = None) -> float:
    """Batch-mean objective; y_rand is drawn from rng when not given"""
    if y_rand is None and rng is not None:
        y_rand = spec.draw_target(rng)
    return mean_all(gen_loss_rows(spec, Tensor2(x_g), teacher, student, y_rand)).item()


def gen_loss_and_grad(spec: GenLossSpec, x_g, teacher, student: DifferentiableModel,
                      rng: Optional[np.random.Generator] = None,
                      y_rand: Optional[float] = None) -> Tuple[float, np.ndarray]:
    """Batch-mean objective and its gradient with respect to x_g"""
    teacher = TeacherOracle(teacher)
    if spec.uses_teacher and not teacher.gradient_capable:
        raise CapabilityError(f"gradient requested through a '{teacher.kind}' teacher")
    if y_rand is None and rng is not None:
        y_rand = spec.draw_target(rng)
    tape = GradTape()
    x_leaf = tape.watch(x_g)
    loss = mean_all(gen_loss_rows(spec, x_leaf, teacher, student, y_rand))
    return loss.item(), tape.gradient(loss, x_leaf)


def direct_optimize(x0, teacher, student: DifferentiableModel, loss: GenLossSpec, opt: OptimizeSpec,
                    rng: np.random.Generator, sampler: Optional[SamplerSpec] = None,
                    record_final: bool = True) -> Tuple[np.ndarray, OptimizeTrace]:
    """Perturb x0 towards a large teacher/student discrepancy.

    gd and rmsprop optimize the batch-mean loss jointly; differential
    evolution optimizes each row in its own sub-population. With
    record_final the trace also holds the loss and gradient at the last
    iterate.
    """
    teacher = TeacherOracle(teacher)
    x = Tensor2(x0).data
    y_rand = loss.draw_target(rng)
    trace = OptimizeTrace(opt.method, opt.lr, y_rand)

    if opt.step_count == 0:
        trace.steps.append(TraceStep(0, x.copy(), gen_loss(loss, x, teacher, student, y_rand=y_rand)))
        trace.final = True
        return x, trace

    if opt.gradient_free:
        return _evolve(x, teacher, student, loss, opt, rng, sampler, trace)

    if loss.uses_teacher and not teacher.gradient_capable:
        raise CapabilityError(f"{opt.method} needs teacher gradients; use differential-evolution")
    state = OptimizerState("vanilla-gd" if opt.method == "gd" else "rmsprop", opt.lr)
    for step in range(opt.steps):
        value, grad = gen_loss_and_grad(loss, x, teacher, student, y_rand=y_rand)
        trace.steps.append(TraceStep(step, x.copy(), value, grad))
        x = optimizer_step(state, x, grad)
    if record_final:
        value, grad = gen_loss_and_grad(loss, x, teacher, student, y_rand=y_rand)
        trace.steps.append(TraceStep(opt.steps, x.copy(), value, grad))
        trace.final = True
    return x, trace


def _evolve(x0: np.ndarray, teacher: TeacherOracle, student: DifferentiableModel, loss: GenLossSpec,
            opt: OptimizeSpec, rng: np.random.Generator, sampler: Optional[SamplerSpec],
            trace: OptimizeTrace) -> Tuple[np.ndarray, OptimizeTrace]:
    n, d = x0.shape
    rngs = row_generators(rng, n)
    population = np.empty((n, opt.population, d))
    for row, row_rng in enumerate(rngs):
        population[row, 0] = x0[row]
        if sampler is not None:
            population[row, 1:] = sample(sampler, opt.population - 1, row_rng)
        else:
            population[row, 1:] = x0[row] + row_rng.standard_normal((opt.population - 1, d))

    def objective(rows: np.ndarray) -> np.ndarray:
        return gen_loss_rows(loss, Tensor2._wrap(rows), teacher, student, trace.y_rand).data[:, 0]

    constrain = (lambda rows: project(sampler, rows)) if sampler is not None else None
    result = evolve_rows(objective, population, opt.f, opt.cr, opt.iterations, rngs, constrain)
    last = len(result.history) - 1
    for step, best_values in enumerate(result.history):
        point = x0.copy() if step == 0 else (result.best.copy() if step == last else None)
        trace.steps.append(TraceStep(step, point, float(best_values.mean())))
    trace.final = True
    logger.debug("DE finished: mean best loss %.6g -> %.6g", result.history[0].mean(), result.history[-1].mean())
    return result.best, trace


def generator_loss(G: Generator, z: np.ndarray, teacher, student: DifferentiableModel, loss: GenLossSpec,
                   y_rand: Optional[float]) -> Tuple[float, List[np.ndarray], np.ndarray]:
    """Mean objective over G(z), its gradient for every generator weight, and the emitted batch"""
    teacher = TeacherOracle(teacher)
    if not teacher.gradient_capable:
        raise CapabilityError(f"the generator strategy needs teacher gradients, '{teacher.kind}' has none")
    tape = GradTape()
    weights = [tape.watch(w) for w in G.weights]
    x_g = G.forward(Tensor2._wrap(np.asarray(z, dtype=np.float64)), weights)
    value = mean_all(gen_loss_rows(loss, x_g, teacher, student, y_rand))
    return value.item(), tape.gradient(value, weights), x_g.data


def generator_round(G: Generator, teacher, student: DifferentiableModel, loss: GenLossSpec,
                    opt_state: OptimizerState, m: int, rng: np.random.Generator,
                    reemit: bool = True) -> Tuple[np.ndarray, float]:
    """One adversarial update of G, then x_g from the post-update generator (or the pre-update batch)"""
    z = rng.standard_normal((m, G.latent_dim))
    y_rand = loss.draw_target(rng)
    value, grads, x_before = generator_loss(G, z, teacher, student, loss, y_rand)
    flat = np.concatenate([g.reshape(-1) for g in grads])
    G.set_flat(optimizer_step(opt_state, G.get_flat(), flat))
    x_g = G.predict(z) if reemit else x_before
    return x_g, value
