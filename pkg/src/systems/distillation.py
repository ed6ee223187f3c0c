"""
Data-free distillation: alpha schedules, the synthetic-data system, the
student training loop with validation checkpointing, and evaluation
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from src.constants import (BATCH_SIZE, BATCHES_PER_EPOCH, EPOCHS, GENERATOR_LR, GENERATOR_ROUNDS,
                           STUDENT_LR, STUDENT_WEIGHT_DECAY, VALIDATE_EVERY)
from src.dataset import Dataset
from src.errors import CapabilityError, InvalidArgumentError
from src.models import DifferentiableModel, GeneratorSpec, TeacherOracle, build_generator
from src.optim import OptimizerState, optimizer_step
from src.systems.sampling import SamplerSpec, project, sample
from src.systems.synthesis import GenLossSpec, OptimizeSpec, direct_optimize, generator_round
from src.tensor import LOSS_KINDS, GradTape, Tensor2, add, loss_op, scale

logger = logging.getLogger(__name__)

ALPHA_KINDS = ("constant", "linear")
SYNTH_METHODS = ("random", "generator", "direct")
METRICS = ("rmse", "mae")


@dataclass
class AlphaSchedule:
    """Weight of the synthetic batch in the student loss, per epoch"""

    kind: str = "linear"
    value: float = 1.0  # constant
    start: float = 1.0  # linear
    end: float = 0.0

    def __post_init__(self):
        if self.kind not in ALPHA_KINDS:
            raise InvalidArgumentError(f"unknown alpha schedule '{self.kind}', expected one of {ALPHA_KINDS}")
        for name in ("value", "start", "end"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidArgumentError(f"alpha {name} must lie in [0, 1], got {getattr(self, name)}")

    @property
    def edge(self) -> Optional[float]:
        """0 or 1 for a constant schedule sitting on the edge, else None"""
        if self.kind == "constant" and self.value in (0.0, 1.0):
            return self.value
        return None

    @property
    def always_zero(self) -> bool:
        """True when no epoch gives the synthetic batch any weight"""
        if self.kind == "constant":
            return self.value == 0.0
        return self.start == 0.0 and self.end == 0.0


def alpha_at(schedule: AlphaSchedule, epoch: int, t_max: int) -> float:
    if not 0 <= epoch <= max(t_max, 0):
        raise InvalidArgumentError(f"epoch {epoch} outside [0, {t_max}]")
    if schedule.kind == "constant":
        return schedule.value
    if t_max == 0:
        return schedule.start
    alpha = schedule.start + (schedule.end - schedule.start) * epoch / t_max
    return float(min(1.0, max(0.0, alpha)))


def combined_loss(alpha: float, loss_g, loss_p):
    """alpha * L_g + (1 - alpha) * L_p; works on floats and on taped 1x1 tensors"""
    if not 0.0 <= alpha <= 1.0:
        raise InvalidArgumentError(f"alpha must lie in [0, 1], got {alpha}")
    if alpha == 1.0:
        return loss_g
    if alpha == 0.0:
        return loss_p
    if isinstance(loss_g, Tensor2) or isinstance(loss_p, Tensor2):
        return add(scale(loss_g, alpha), scale(loss_p, 1.0 - alpha))
    return alpha * loss_g + (1.0 - alpha) * loss_p


@dataclass
class SynthSpec:
    """Which strategy produces x_g and how"""

    method: str = "direct"
    loss: GenLossSpec = field(default_factory=GenLossSpec)
    optimize: OptimizeSpec = field(default_factory=OptimizeSpec)
    generator: Optional[GeneratorSpec] = None  # defaults to the student's input width
    generator_lr: float = GENERATOR_LR
    generator_rounds: int = GENERATOR_ROUNDS
    reemit: bool = True
    sampler: Optional[SamplerSpec] = None  # x0 sampler; the x_p sampler when unset

    def __post_init__(self):
        if self.method not in SYNTH_METHODS:
            raise InvalidArgumentError(f"unknown synthesis method '{self.method}', expected one of {SYNTH_METHODS}")
        if self.generator_rounds < 1:
            raise InvalidArgumentError("generator rounds must be >= 1")
        if self.generator_lr < 0:
            raise InvalidArgumentError("generator learning rate must be >= 0")

    @property
    def needs_teacher_gradient(self) -> bool:
        if self.method == "generator":
            return True
        return self.method == "direct" and not self.optimize.gradient_free and self.loss.uses_teacher


@dataclass
class DistillConfig:
    epochs: int = EPOCHS
    batches: int = BATCHES_PER_EPOCH
    batch_size: int = BATCH_SIZE
    alpha: AlphaSchedule = field(default_factory=AlphaSchedule)
    double_at_edge: bool = True
    student_optimizer: OptimizerState = field(
        default_factory=lambda: OptimizerState("rmsprop", STUDENT_LR, weight_decay=STUDENT_WEIGHT_DECAY))
    student_loss: str = "mse"
    synth: SynthSpec = field(default_factory=SynthSpec)
    sampler: Optional[SamplerSpec] = None  # x_p sampler
    validate_every: int = VALIDATE_EVERY
    seed_data: int = 0  # x_p stream
    seed_init: int = 1  # generator initialization
    seed_synth: int = 2  # x_g stream
    log_every: int = 100

    def __post_init__(self):
        if self.epochs < 0:
            raise InvalidArgumentError(f"epochs must be >= 0, got {self.epochs}")
        if self.batches < 1 or self.batch_size < 1:
            raise InvalidArgumentError("batches per epoch and batch size must be >= 1")
        if self.validate_every < 1:
            raise InvalidArgumentError("validation cadence must be >= 1")
        if self.student_loss not in LOSS_KINDS:
            raise InvalidArgumentError(f"unknown student loss '{self.student_loss}'")

    def samples_for(self, alpha: float) -> int:
        """Per-branch batch size; doubled when a constant schedule sits on 0 or 1"""
        if self.double_at_edge and self.alpha.edge is not None and alpha == self.alpha.edge:
            return 2 * self.batch_size
        return self.batch_size


@dataclass
class MetricsRow:
    epoch: int
    loss_combined: float
    loss_xg: Optional[float]
    loss_xp: Optional[float]
    alpha: float
    val_rmse: Optional[float]
    wall_s: float


@dataclass
class DistillResult:
    best_student: DifferentiableModel
    final_student: DifferentiableModel
    metrics: List[MetricsRow] = field(default_factory=list)
    best_epoch: Optional[int] = None
    best_val_rmse: Optional[float] = None
    generator: Optional[DifferentiableModel] = None


def evaluate(model, dataset: Dataset, metric: str = "rmse") -> float:
    """RMSE or MAE of the model's predictions against the dataset targets"""
    if metric not in METRICS:
        raise InvalidArgumentError(f"unknown metric '{metric}', expected one of {METRICS}")
    if dataset.n_samples < 1:
        raise InvalidArgumentError("cannot evaluate on an empty dataset")
    if model.input_dim != dataset.n_features:
        raise InvalidArgumentError(f"model expects {model.input_dim} features, dataset has {dataset.n_features}")
    errors = model.predict(dataset.features) - dataset.targets
    if metric == "rmse":
        return float(np.sqrt(np.mean(errors * errors)))
    return float(np.mean(np.abs(errors)))


class SyntheticDataSystem:
    """Produces x_g batches with the configured strategy, keeping generator state between batches"""

    def __init__(self, spec: SynthSpec, sampler: SamplerSpec, teacher, input_dim: int,
                 seed_init: int, seed_synth: int, check_capability: bool = True):
        self.spec = spec
        self.sampler = spec.sampler or sampler
        self.teacher = TeacherOracle(teacher)
        self.rng = np.random.default_rng(seed_synth)
        self.generator = None
        self.generator_state = None
        if check_capability and spec.needs_teacher_gradient and not self.teacher.gradient_capable:
            raise CapabilityError(f"strategy '{spec.method}' with {spec.optimize.method} needs teacher "
                                  f"gradients, '{self.teacher.kind}' has none")
        if spec.method == "generator":
            gen_spec = spec.generator or GeneratorSpec(output_dim=input_dim)
            if gen_spec.output_dim != input_dim:
                raise InvalidArgumentError(f"generator emits {gen_spec.output_dim} features, student takes {input_dim}")
            self.generator = build_generator(gen_spec, seed_init)
            self.generator_state = OptimizerState("rmsprop", spec.generator_lr)

    def emit(self, student: DifferentiableModel, m: int) -> np.ndarray:
        """m synthetic rows from the configured strategy.

        Direct optimization output is projected onto the sampler's clip
        bounds and simplex when it has them, whatever the optimizer, so
        the student only ever trains on feasible inputs. Generator output
        is returned unprojected.
        """
        if self.spec.method == "random":
            return sample(self.sampler, m, self.rng)

        if self.spec.method == "generator":
            x_g = None
            for _ in range(self.spec.generator_rounds):
                x_g, value = generator_round(self.generator, self.teacher, student, self.spec.loss,
                                             self.generator_state, m, self.rng, self.spec.reemit)
                logger.debug("generator round loss %.6g", value)
            return x_g

        x0 = sample(self.sampler, m, self.rng)
        x_g, _ = direct_optimize(x0, self.teacher, student, self.spec.loss, self.spec.optimize,
                                 self.rng, sampler=self.sampler, record_final=False)
        if self.sampler.has_bounds or self.sampler.simplex:
            x_g = project(self.sampler, x_g)
        return x_g


class DistillationSystem:
    """Runs the student training loop one epoch at a time"""

    def __init__(self, config: DistillConfig, teacher, student: DifferentiableModel,
                 validation: Optional[Dataset] = None):
        self.config = config
        self.teacher = TeacherOracle(teacher)
        self.student = student
        if self.teacher.input_dim != student.input_dim:
            raise InvalidArgumentError(f"teacher takes {self.teacher.input_dim} features, "
                                       f"student takes {student.input_dim}")
        self.sampler = config.sampler or SamplerSpec("gaussian", student.input_dim)
        if self.sampler.dim != student.input_dim:
            raise InvalidArgumentError(f"sampler emits {self.sampler.dim} features, student takes {student.input_dim}")
        self.validation = validation if validation is not None and validation.n_samples > 0 else None
        self.synthetic = SyntheticDataSystem(config.synth, self.sampler, self.teacher, student.input_dim,
                                             config.seed_init, config.seed_synth,
                                             check_capability=not config.alpha.always_zero)
        self.data_rng = np.random.default_rng(config.seed_data)
        self.optimizer = config.student_optimizer.fresh()
        self.metrics: List[MetricsRow] = []
        self.best_student = student.copy()
        self.best_epoch = None
        self.best_val_rmse = None
        self.started = time.perf_counter()

    def _branch_loss(self, x: np.ndarray, weights) -> Tensor2:
        targets = self.teacher.predict(x)
        return loss_op(self.config.student_loss, self.student.forward(Tensor2._wrap(x), weights), targets)

    def train_batch(self, alpha: float):
        """One optimizer step on the combined loss; a branch with zero weight is never sampled"""
        x_g = self.synthetic.emit(self.student, self.config.samples_for(alpha)) if alpha > 0.0 else None
        x_p = sample(self.sampler, self.config.samples_for(alpha), self.data_rng) if alpha < 1.0 else None

        tape = GradTape()
        weights = [tape.watch(w) for w in self.student.weights]
        loss_g = self._branch_loss(x_g, weights) if x_g is not None else None
        loss_p = self._branch_loss(x_p, weights) if x_p is not None else None
        total = combined_loss(alpha, loss_g, loss_p)
        grads = tape.gradient(total, weights)
        flat = np.concatenate([g.reshape(-1) for g in grads])
        self.student.set_flat(optimizer_step(self.optimizer, self.student.get_flat(), flat))
        return (total.item(), loss_g.item() if loss_g is not None else None,
                loss_p.item() if loss_p is not None else None)

    def run_epoch(self, epoch: int) -> MetricsRow:
        """Train epoch `epoch` (1-based); alpha comes from the schedule at epoch - 1"""
        alpha = alpha_at(self.config.alpha, epoch - 1, self.config.epochs)
        totals, on_g, on_p = [], [], []
        for _ in range(self.config.batches):
            total, loss_g, loss_p = self.train_batch(alpha)
            totals.append(total)
            if loss_g is not None:
                on_g.append(loss_g)
            if loss_p is not None:
                on_p.append(loss_p)

        val_rmse = None
        if self.validation is not None and epoch % self.config.validate_every == 0:
            val_rmse = evaluate(self.student, self.validation, "rmse")
            if self.best_val_rmse is None or val_rmse < self.best_val_rmse:
                self.best_val_rmse = val_rmse
                self.best_epoch = epoch
                self.best_student = self.student.copy()

        row = MetricsRow(epoch, float(np.mean(totals)), float(np.mean(on_g)) if on_g else None,
                         float(np.mean(on_p)) if on_p else None, alpha, val_rmse,
                         time.perf_counter() - self.started)
        self.metrics.append(row)
        if epoch % self.config.log_every == 0 or epoch == self.config.epochs:
            logger.info("Epoch %d/%d: loss %.6g, alpha %.3f, val_rmse %s", epoch, self.config.epochs,
                        row.loss_combined, alpha, "-" if val_rmse is None else f"{val_rmse:.6g}")
        return row

    def result(self) -> DistillResult:
        best = self.best_student if self.best_epoch is not None else self.student.copy()
        return DistillResult(best, self.student.copy(), list(self.metrics), self.best_epoch,
                             self.best_val_rmse, self.synthetic.generator)


EpochHook = Callable[[int, DistillationSystem], None]


def distill_run(config: DistillConfig, teacher, student: DifferentiableModel,
                validation: Optional[Dataset] = None, on_epoch: Optional[EpochHook] = None) -> DistillResult:
    """Train the student from teacher labels on synthetic and random inputs.

    The student is updated in place. on_epoch, when given, is called with
    epoch 0 before training and after every epoch.
    """
    system = DistillationSystem(config, teacher, student, validation)
    logger.info("Distilling for %d epochs: %s strategy, %s alpha, %d x %d samples per epoch",
                config.epochs, config.synth.method, config.alpha.kind, config.batches, config.batch_size)
    if on_epoch is not None:
        on_epoch(0, system)
    for epoch in range(1, config.epochs + 1):
        system.run_epoch(epoch)
        if on_epoch is not None:
            on_epoch(epoch, system)
    result = system.result()
    if result.best_epoch is not None:
        logger.info("Best validation RMSE %.6g at epoch %d", result.best_val_rmse, result.best_epoch)
    return result
