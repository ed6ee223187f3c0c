"""
Experiment state and the work behind each CLI command
"""
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import List, Optional

import numpy as np

from src.config import RunConfig
from src.constants import QMC_BOUND
from src.data_loader import (domain_stats, load_csv, load_idx, make_digit_benchmark, make_protein_benchmark,
                             make_tabular_benchmark, split, standardize)
from src.dataset import Dataset, DatasetSplit, SplitSpec
from src.errors import ConfigError, InvalidArgumentError
from src.model_io import load_model, save_model
from src.models import (CommandPredictor, GeneratorSpec, MlpSpec, RbfStudentSpec, TeacherOracle, build_mlp,
                        build_rbf, krr_fit)
from src.optim import OptimizerState
from src.reports.csv_writers import (gen_dump_rows, write_bounds, write_evaluation, write_gen_dump,
                                     write_metrics, write_split)
from src.systems.bounds import (BoundReport, check_descent, check_displacement_bound,
                                check_generator_norm_bound, estimate_lipschitz)
from src.systems.distillation import (AlphaSchedule, DistillConfig, DistillResult, DistillationSystem, SynthSpec,
                                      SyntheticDataSystem, distill_run, evaluate)
from src.systems.sampling import SamplerSpec, sample
from src.systems.synthesis import GenLossSpec, OptimizeSpec, direct_optimize, gen_loss_rows, generator_round
from src.systems.training import FitConfig, FitReport, fit_network, split_report
from src.tensor import Tensor2

logger = logging.getLogger(__name__)


@contextmanager
def config_section(name: str):
    """Report invalid settings in a config section as config errors"""
    try:
        yield
    except InvalidArgumentError as err:
        raise ConfigError(f"invalid {name} settings: {err}") from None


class Experiment:
    """Config, data, models and output directory of one run"""

    def __init__(self, config: RunConfig, output_dir: Optional[str] = None):
        self.config = config
        self.output_dir = Path(output_dir or config["output_dir"])
        self.data: Optional[DatasetSplit] = None
        self.dataset: Optional[Dataset] = None
        self._teacher: Optional[TeacherOracle] = None

    def setup(self):
        """Create the output directory and write the resolved config"""
        self.output_dir.mkdir(parents=True, exist_ok=True)
        (self.output_dir / "resolved.conf").write_text(self.config.to_text())
        logger.info("Output directory: %s", self.output_dir)

    def path(self, name: str) -> Path:
        return self.output_dir / name

    # --- data ---------------------------------------------------------------

    def load_dataset(self) -> Dataset:
        cfg = self.config
        source = cfg["data.source"]
        samples = cfg["data.samples"]
        seed = cfg["seeds.data"]
        if source == "csv":
            return load_csv(cfg.require("data.path"), cfg.require("data.target"))
        if source == "idx":
            return load_idx(cfg.require("data.images"), cfg.require("data.labels"), cfg["data.image_size"] or None)
        with config_section("data"):
            if source == "synthetic-tabular":
                return make_tabular_benchmark(samples or 8192, cfg["data.features"], seed=seed)
            if source == "synthetic-protein":
                return make_protein_benchmark(samples or 3148, seed=seed)
            return make_digit_benchmark(samples or 5000, cfg["data.image_size"] or 8, seed=seed)

    def prepare_data(self) -> DatasetSplit:
        """Load, split and (optionally) standardize; writes split.csv"""
        if self.data is not None:
            return self.data
        cfg = self.config
        dataset = self.load_dataset()
        with config_section("split"):
            spec = SplitSpec(cfg["split.train"], cfg["split.val_fraction"], cfg["seeds.data"])
            spec.validate(dataset.n_samples)
        raw = split(dataset, spec)
        if cfg["data.standardize"]:
            fit_rows = raw.train_index if cfg["data.scale_scope"] == "train" else None
            dataset = standardize(dataset, cfg["data.scale_targets"], fit_rows)
        self.dataset = dataset
        self.data = DatasetSplit(dataset.subset(raw.train_index), dataset.subset(raw.validation_index),
                                 dataset.subset(raw.test_index), raw.train_index, raw.validation_index,
                                 raw.test_index)
        write_split(self.path("split.csv"), self.data)
        return self.data

    @property
    def input_dim(self) -> int:
        return self.prepare_data().train.n_features

    def sampler_spec(self) -> SamplerSpec:
        """Sampler for x_p and x0; qMC boxes fall back to the validation range, then +-3"""
        cfg = self.config
        data = self.prepare_data()
        kind, d = cfg["synth.sampler"], self.input_dim
        low, high = cfg["synth.low"], cfg["synth.high"]
        with config_section("sampler"):
            if (low is None) != (high is None):
                raise InvalidArgumentError("synth.low and synth.high must be set together")
            if kind == "domain":
                return SamplerSpec.from_domain(domain_stats(data.train), low, high, cfg["synth.simplex"])
            if low is None and kind in ("halton", "latin-hypercube"):
                if data.validation.n_samples > 0:
                    low, high = data.validation.features.min(axis=0), data.validation.features.max(axis=0)
                else:
                    low, high = -QMC_BOUND, QMC_BOUND
            return SamplerSpec(kind, d, low=low, high=high, simplex=cfg["synth.simplex"])

    # --- models -------------------------------------------------------------

    def teacher_path(self) -> Path:
        return Path(self.config["teacher.path"] or self.path("teacher.model"))

    def teacher(self) -> TeacherOracle:
        """The saved (or command-backed) teacher"""
        if self._teacher is None:
            if self.config["teacher.kind"] == "command":
                backing = CommandPredictor(self.config.require("teacher.command"), self.input_dim)
            else:
                backing = load_model(self.teacher_path())
            if backing.input_dim != self.input_dim:
                raise InvalidArgumentError(f"teacher takes {backing.input_dim} features, data has {self.input_dim}")
            self._teacher = TeacherOracle(backing)
        return self._teacher

    def build_student(self):
        cfg = self.config
        if cfg["student.path"]:
            return load_model(cfg["student.path"])
        with config_section("student"):
            if cfg["student.kind"] == "rbf":
                spec = RbfStudentSpec(self.input_dim, cfg["student.centers"])
                centers = sample(self.sampler_spec(), spec.centers, cfg["seeds.init"])
                return build_rbf(spec, cfg["seeds.init"], centers)
            return build_mlp(MlpSpec(self.input_dim, cfg["student.hidden"], cfg["student.activation"]),
                             cfg["seeds.init"])

    def loss_spec(self) -> GenLossSpec:
        cfg = self.config
        with config_section("loss"):
            return GenLossSpec(cfg["loss.discrepancy"], cfg["loss.epsilon"], cfg["loss.input_penalty"],
                               cfg["loss.beta"], cfg["loss.output_penalty"], cfg["loss.gamma"], cfg["loss.y_rand"])

    def optimize_spec(self) -> OptimizeSpec:
        cfg = self.config
        with config_section("optimizer"):
            return OptimizeSpec(cfg["opt.method"], cfg["opt.lr"], cfg["opt.steps"], cfg["de.population"],
                                cfg["de.f"], cfg["de.cr"], "best2bin", cfg["de.iterations"])

    def synth_spec(self) -> SynthSpec:
        cfg = self.config
        with config_section("generator"):
            generator = GeneratorSpec(self.input_dim, cfg["generator.latent"], cfg["generator.hidden"])
            return SynthSpec(cfg["synth.method"], self.loss_spec(), self.optimize_spec(), generator,
                             cfg["generator.lr"], cfg["generator.rounds"], cfg["generator.reemit"])

    def distill_config(self) -> DistillConfig:
        cfg = self.config
        with config_section("distillation"):
            alpha = AlphaSchedule(cfg["alpha.schedule"], cfg["alpha.value"], cfg["alpha.start"], cfg["alpha.end"])
            optimizer = OptimizerState("rmsprop", cfg["student.lr"], weight_decay=cfg["student.weight_decay"])
            return DistillConfig(cfg["epochs"], cfg["batches"], cfg["batch_size"], alpha, cfg["alpha.double_at_edge"],
                                 optimizer, cfg["student.loss"], self.synth_spec(), self.sampler_spec(),
                                 cfg["validate_every"], cfg["seeds.data"], cfg["seeds.init"], cfg["seeds.synth"],
                                 max(cfg["log_every"], 1))

    # --- commands -----------------------------------------------------------

    def train_teacher(self) -> FitReport:
        """Fit the configured teacher on the training split and save it"""
        cfg = self.config
        data = self.prepare_data()
        kind = cfg["teacher.kind"]
        if kind == "command":
            raise ConfigError("command teachers are trained outside regraft", "teacher.kind")
        if kind == "krr":
            support = data.train if cfg["teacher.support"] <= 0 else data.train.subset(np.arange(
                min(cfg["teacher.support"], data.train.n_samples)))
            with config_section("teacher"):
                model = krr_fit(support.features, support.targets, cfg["teacher.sigma"], cfg["teacher.ridge"])
        else:
            with config_section("teacher"):
                spec = MlpSpec(self.input_dim, cfg["teacher.hidden"], cfg["teacher.activation"])
                fit = FitConfig(cfg["teacher.epochs"], cfg["teacher.batch"], cfg["teacher.lr"],
                                cfg["teacher.weight_decay"], seed=cfg["seeds.data"])
            logger.info("Training %s teacher %s for %d epochs", spec.activation, spec.hidden, fit.epochs)
            model = fit_network(build_mlp(spec, cfg["seeds.init"]), data.train, fit, data.validation)
        report = split_report(model, data)
        save_model(model, self.teacher_path())
        self._teacher = TeacherOracle(model)
        logger.info("Saved teacher to %s", self.teacher_path())
        return report

    def distill(self) -> DistillResult:
        """Distill a fresh (or loaded) student and write metrics and model files"""
        data = self.prepare_data()
        config = self.distill_config()
        teacher = self.teacher()
        student = self.build_student()
        logger.info("Student %s with %d parameters", student.kind, student.num_params)
        result = distill_run(config, teacher, student, data.validation)
        write_metrics(self.path("metrics.csv"), result.metrics)
        save_model(result.best_student, self.path("best.model"))
        save_model(result.final_student, self.path("final.model"))
        if data.test.n_samples > 0:
            for name, model in (("best", result.best_student), ("final", result.final_student)):
                rmse = evaluate(model, data.test, "rmse")
                write_evaluation(self.path("evaluate.csv"), name, "test", "rmse", rmse)
                logger.info("%s student test RMSE: %.6g", name.capitalize(), rmse)
        return result

    def evaluate(self) -> float:
        """The configured metric of a saved model on one split; appended to evaluate.csv"""
        cfg = self.config
        data = self.prepare_data()
        target = cfg["evaluate.model"] or str(self.path("best.model"))
        model = self.teacher() if target == "teacher" else load_model(target)
        part = getattr(data, cfg["evaluate.split"])
        value = evaluate(model, part, cfg["evaluate.metric"])
        write_evaluation(self.path("evaluate.csv"), target, cfg["evaluate.split"], cfg["evaluate.metric"], value)
        return value

    def _dump_rows(self, synthetic: SyntheticDataSystem, student, tag: str, rng: np.random.Generator) -> list:
        cfg = self.config
        teacher = self.teacher()
        m = cfg["batch_size"]
        batches = [(synthetic.emit(student, m), tag) for _ in range(cfg["gen_dump.batches"])]
        if cfg["gen_dump.random"]:
            batches += [(sample(synthetic.sampler, m, rng), f"{tag}-random") for _ in range(cfg["gen_dump.batches"])]
        rows = []
        for x, label in batches:
            t_pred, s_pred = teacher.predict(x), student.predict(x)
            gap = t_pred - s_pred
            if cfg["student.loss"] == "logcosh":
                loss = np.abs(gap) + np.log1p(np.exp(-2.0 * np.abs(gap))) - np.log(2.0)
            else:
                loss = gap * gap
            rows += gen_dump_rows(x, t_pred, s_pred, loss, label)
        return rows

    def gen_dump(self) -> Path:
        """Synthetic points with teacher/student predictions, for plotting outside regraft"""
        cfg = self.config
        teacher = self.teacher()
        sampler = self.sampler_spec()
        synth = self.synth_spec()
        rows = []
        epochs = sorted(set(cfg["gen_dump.epochs"]))
        if not epochs:
            synthetic = SyntheticDataSystem(synth, sampler, teacher, self.input_dim, cfg["seeds.init"],
                                            cfg["seeds.synth"])
            rows = self._dump_rows(synthetic, self.build_student(), cfg["gen_dump.tag"],
                                   np.random.default_rng(cfg["seeds.data"]))
        else:
            config = self.distill_config()
            config.epochs = epochs[-1]

            def dump(epoch: int, system: DistillationSystem):
                if epoch not in epochs:
                    return
                synthetic = SyntheticDataSystem(synth, sampler, teacher, self.input_dim, cfg["seeds.init"],
                                                cfg["seeds.synth"] + epoch)
                if system.synthetic.generator is not None:
                    synthetic.generator = system.synthetic.generator.copy()
                rows.extend(self._dump_rows(synthetic, system.student.copy(), f"epoch{epoch}",
                                            np.random.default_rng(cfg["seeds.data"] + epoch)))

            distill_run(config, teacher, self.build_student(), self.prepare_data().validation, on_epoch=dump)
        path = write_gen_dump(self.path("gen_dump.csv"), self.input_dim, rows)
        logger.info("Wrote %d synthetic points to %s", len(rows), path)
        return path

    def bounds_check(self) -> List[BoundReport]:
        """Displacement and descent checks on plain gradient-descent traces, plus the generator norm check"""
        cfg = self.config
        teacher = self.teacher()
        student = self.build_student()
        sampler = self.sampler_spec()
        loss = self.loss_spec()
        with config_section("bounds"):
            plain_gd = OptimizeSpec("gd", cfg["bounds.lr"], cfg["bounds.steps"])
        rng = np.random.default_rng(cfg["seeds.synth"])
        reports = []
        for index in range(cfg["bounds.traces"]):
            label = f"trace{index}"
            x0 = sample(sampler, cfg["bounds.samples"], rng)
            _, trace = direct_optimize(x0, teacher, student, loss, plain_gd, rng, record_final=True)
            reports.append(check_displacement_bound(trace, k_convention="trace", label=label))
            reports.append(check_displacement_bound(trace, k_convention="initial", label=label))
            reports.append(check_descent(trace, label=label))

        if cfg["synth.method"] == "generator":
            reports.append(self._generator_norm_report(teacher, student, loss, rng))

        write_bounds(self.path("bounds.csv"), reports)
        for check in ("displacement", "descent", "generator-norm"):
            chosen = [r for r in reports if r.check == check]
            if chosen:
                logger.info("%s: %d/%d satisfied", check, sum(r.satisfied for r in chosen), len(chosen))
        return reports

    def _generator_norm_report(self, teacher, student, loss: GenLossSpec, rng: np.random.Generator) -> BoundReport:
        cfg = self.config
        synth = self.synth_spec()
        synthetic = SyntheticDataSystem(synth, self.sampler_spec(), teacher, self.input_dim, cfg["seeds.init"],
                                        cfg["seeds.synth"])
        m = cfg["batch_size"]
        for _ in range(cfg["generator.rounds"]):
            x_g, _ = generator_round(synthetic.generator, teacher, student, loss, synthetic.generator_state, m, rng)
        k_hat = 0.0
        if loss.epsilon > 0:
            with config_section("loss"):
                discrepancy = GenLossSpec(loss.discrepancy, loss.epsilon, beta=0.0, output_penalty="none",
                                          gamma=0.0)
            k_hat = estimate_lipschitz(lambda x: gen_loss_rows(discrepancy, x, teacher, student, None), x_g)
        with config_section("loss"):
            return check_generator_norm_bound(Tensor2(x_g).data, loss.beta, k_hat, label="generator")
