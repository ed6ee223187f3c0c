"""
Run configuration: the flat `key = value` format, its key schema, and
resolution of defaults, presets, file keys, overrides and the seed variable
"""
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from src import constants as c
from src.errors import ConfigError
from src.presets import PresetManager

logger = logging.getLogger(__name__)

TRUE_WORDS = ("true", "yes", "on", "1")
FALSE_WORDS = ("false", "no", "off", "0")


def _parse_bool(raw: str) -> bool:
    word = raw.lower()
    if word in TRUE_WORDS:
        return True
    if word in FALSE_WORDS:
        return False
    raise ValueError("expected true or false")


def _parse_int_list(raw: str) -> List[int]:
    return [int(part) for part in raw.split(",") if part.strip()]


def _parse_optional(parse: Callable[[str], Any]) -> Callable[[str], Any]:
    def parser(raw: str):
        if raw == "" or raw.lower() == "none":
            return None
        return parse(raw)
    return parser


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    return str(value)


@dataclass
class KeySpec:
    """Type, default and allowed values of one config key"""
    key: str
    type_name: str
    default: Any
    choices: Tuple[str, ...] = ()
    help: str = ""

    def parse(self, raw: str):
        parser = PARSERS[self.type_name]
        value = parser(raw)
        if self.choices and value not in self.choices:
            raise ValueError(f"expected one of {', '.join(self.choices)}")
        return value


PARSERS: Dict[str, Callable[[str], Any]] = {
    "int": int,
    "float": float,
    "str": str,
    "bool": _parse_bool,
    "int-list": _parse_int_list,
    "optional-int": _parse_optional(int),
    "optional-float": _parse_optional(float),
}


def _schema() -> Dict[str, KeySpec]:
    keys = [
        KeySpec("seed", "int", 0, help="master seed; seeds.* default to seed, seed+1, seed+2"),
        KeySpec("output_dir", "str", "runs/default"),
        KeySpec("strategy", "str", "", help="preset applied before the file's keys"),
        # data
        KeySpec("data.source", "str", "csv",
                ("csv", "idx", "synthetic-tabular", "synthetic-protein", "synthetic-digits")),
        KeySpec("data.path", "str", ""),
        KeySpec("data.target", "str", ""),
        KeySpec("data.images", "str", ""),
        KeySpec("data.labels", "str", ""),
        KeySpec("data.samples", "int", 0, help="0 keeps the benchmark's own size"),
        KeySpec("data.features", "int", 10),
        KeySpec("data.image_size", "int", 0, help="0 keeps idx images at full size, digits at 8"),
        KeySpec("data.standardize", "bool", True),
        KeySpec("data.scale_targets", "bool", True),
        KeySpec("data.scale_scope", "str", "whole", ("whole", "train")),
        KeySpec("split.train", "int", c.SPLIT_TRAIN),
        KeySpec("split.val_fraction", "float", c.SPLIT_VAL_FRACTION),
        # teacher
        KeySpec("teacher.kind", "str", "mlp", ("mlp", "krr", "command")),
        KeySpec("teacher.hidden", "int-list", [c.TEACHER_HIDDEN]),
        KeySpec("teacher.activation", "str", "tanh", ("tanh", "relu", "softplus")),
        KeySpec("teacher.epochs", "int", c.TEACHER_EPOCHS),
        KeySpec("teacher.lr", "float", c.TEACHER_LR),
        KeySpec("teacher.batch", "int", c.TEACHER_BATCH_SIZE),
        KeySpec("teacher.weight_decay", "float", c.STUDENT_WEIGHT_DECAY),
        KeySpec("teacher.path", "str", "", help="saved teacher; defaults to <output_dir>/teacher.model"),
        KeySpec("teacher.command", "str", ""),
        KeySpec("teacher.sigma", "optional-float", None),
        KeySpec("teacher.ridge", "float", c.KRR_RIDGE),
        KeySpec("teacher.support", "int", 0, help="kernel ridge support points, 0 = whole training split"),
        # student
        KeySpec("student.kind", "str", "mlp", ("mlp", "rbf")),
        KeySpec("student.hidden", "int-list", [c.STUDENT_HIDDEN]),
        KeySpec("student.activation", "str", "tanh", ("tanh", "relu", "softplus")),
        KeySpec("student.centers", "int", c.RBF_CENTERS),
        KeySpec("student.lr", "float", c.STUDENT_LR),
        KeySpec("student.weight_decay", "float", c.STUDENT_WEIGHT_DECAY),
        KeySpec("student.loss", "str", "mse", ("mse", "logcosh")),
        KeySpec("student.path", "str", "", help="student to start from or inspect"),
        # synthetic data
        KeySpec("synth.method", "str", "direct", ("random", "generator", "direct")),
        KeySpec("synth.sampler", "str", "gaussian", ("gaussian", "latin-hypercube", "halton", "domain")),
        KeySpec("synth.low", "optional-float", None),
        KeySpec("synth.high", "optional-float", None),
        KeySpec("synth.simplex", "bool", False),
        KeySpec("loss.discrepancy", "str", "squared", ("squared", "logcosh")),
        KeySpec("loss.epsilon", "float", c.LOSS_EPSILON),
        KeySpec("loss.input_penalty", "str", "l2-squared", ("l2-squared", "l1")),
        KeySpec("loss.beta", "float", c.LOSS_BETA),
        KeySpec("loss.output_penalty", "str", "student-squared",
                ("student-squared", "teacher-to-random", "input-squared", "none")),
        KeySpec("loss.gamma", "float", c.LOSS_GAMMA),
        KeySpec("loss.y_rand", "str", "none", ("none", "integer", "real")),
        KeySpec("opt.method", "str", "rmsprop", ("gd", "rmsprop", "differential-evolution")),
        KeySpec("opt.lr", "float", c.DIRECT_LR),
        KeySpec("opt.steps", "int", c.DIRECT_STEPS),
        KeySpec("de.population", "int", c.DE_POPULATION),
        KeySpec("de.f", "float", c.DE_F),
        KeySpec("de.cr", "float", c.DE_CR),
        KeySpec("de.iterations", "int", c.DE_ITERATIONS),
        KeySpec("generator.latent", "int", c.GENERATOR_LATENT),
        KeySpec("generator.hidden", "int-list", [c.GENERATOR_HIDDEN]),
        KeySpec("generator.lr", "float", c.GENERATOR_LR),
        KeySpec("generator.rounds", "int", c.GENERATOR_ROUNDS),
        KeySpec("generator.reemit", "bool", True),
        # training loop
        KeySpec("alpha.schedule", "str", "linear", ("constant", "linear")),
        KeySpec("alpha.value", "float", 1.0),
        KeySpec("alpha.start", "float", 1.0),
        KeySpec("alpha.end", "float", 0.0),
        KeySpec("alpha.double_at_edge", "bool", True),
        KeySpec("epochs", "int", c.EPOCHS),
        KeySpec("batches", "int", c.BATCHES_PER_EPOCH),
        KeySpec("batch_size", "int", c.BATCH_SIZE),
        KeySpec("validate_every", "int", c.VALIDATE_EVERY),
        KeySpec("log_every", "int", 100),
        KeySpec("seeds.data", "optional-int", None),
        KeySpec("seeds.init", "optional-int", None),
        KeySpec("seeds.synth", "optional-int", None),
        # commands
        KeySpec("evaluate.model", "str", "", help="defaults to <output_dir>/best.model"),
        KeySpec("evaluate.split", "str", "test", ("train", "validation", "test")),
        KeySpec("evaluate.metric", "str", "rmse", ("rmse", "mae")),
        KeySpec("gen_dump.tag", "str", "epoch0"),
        KeySpec("gen_dump.batches", "int", 1),
        KeySpec("gen_dump.epochs", "int-list", [], help="train and dump at these epochs instead"),
        KeySpec("gen_dump.random", "bool", True, help="also dump plain sampler batches"),
        KeySpec("bounds.traces", "int", 100),
        KeySpec("bounds.steps", "int", 10),
        KeySpec("bounds.lr", "float", 0.1),
        KeySpec("bounds.samples", "int", 1, help="rows per gradient-descent trace"),
    ]
    return {spec.key: spec for spec in keys}


SCHEMA = _schema()
SEED_KEYS = {"seeds.data": 0, "seeds.init": 1, "seeds.synth": 2}


@dataclass
class Assignment:
    key: str
    raw: str
    line: Optional[int] = None
    origin: str = "file"


@dataclass
class RunConfig:
    """Typed settings for one run, with where each value came from"""
    values: Dict[str, Any] = field(default_factory=dict)
    origins: Dict[str, str] = field(default_factory=dict)

    def __getitem__(self, key: str):
        if key not in self.values:
            raise ConfigError("unknown key", key)
        return self.values[key]

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def require(self, key: str):
        """The value of a key that this run cannot do without"""
        value = self[key]
        if value in ("", None):
            raise ConfigError("missing required key", key)
        return value

    def to_text(self) -> str:
        """Fully resolved `key = value` text that parses back to this config"""
        lines = ["# resolved configuration"]
        for key in SCHEMA:
            lines.append(f"{key} = {_format(self.values[key])}")
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        changed = [key for key, origin in self.origins.items() if origin != "default"]
        return ", ".join(f"{key}={_format(self.values[key])}" for key in changed)


def parse_assignments(text: str, origin: str = "file") -> List[Assignment]:
    """Split config text into key assignments; `#` starts a comment line"""
    found = {}
    assignments = []
    for number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=number)
        key, raw = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", line=number)
        if key not in SCHEMA:
            raise ConfigError("unknown key", key, number)
        if key in found:
            raise ConfigError(f"duplicate key, first set on line {found[key]}", key, number)
        found[key] = number
        assignments.append(Assignment(key, raw, number, origin))
    return assignments


def parse_override(text: str) -> Assignment:
    """One `key=value` command-line override"""
    if "=" not in text:
        raise ConfigError(f"override '{text}' is not key=value")
    key, raw = (part.strip() for part in text.split("=", 1))
    if key not in SCHEMA:
        raise ConfigError("unknown key", key)
    return Assignment(key, raw, None, "override")


def _typed(assignment: Assignment):
    try:
        return SCHEMA[assignment.key].parse(assignment.raw)
    except ValueError as err:
        raise ConfigError(f"bad value {assignment.raw!r}: {err}", assignment.key, assignment.line) from None


def resolve(assignments: Sequence[Assignment], overrides: Iterable[Assignment] = (),
            env: Optional[Mapping[str, str]] = None, presets: Optional[PresetManager] = None) -> RunConfig:
    """defaults < preset named by `strategy` < file keys < overrides < the seed variable"""
    presets = presets or PresetManager()
    env = os.environ if env is None else env
    explicit = list(assignments) + list(overrides)

    config = RunConfig({key: spec.default for key, spec in SCHEMA.items()},
                       {key: "default" for key in SCHEMA})
    for assignment in explicit:
        if assignment.key == "strategy":
            config.values["strategy"] = _typed(assignment)

    strategy = config.values["strategy"]
    if strategy:
        preset = presets.get_preset(strategy)
        if preset is None:
            line = next((a.line for a in reversed(explicit) if a.key == "strategy"), None)
            names = ", ".join(p.preset_id for p in presets.get_all_presets())
            raise ConfigError(f"unknown strategy '{strategy}'; available: {names}", "strategy", line)
        for key, raw in preset.values.items():
            config.values[key] = _typed(Assignment(key, raw, None, "preset"))
            config.origins[key] = f"preset {strategy}"

    for assignment in explicit:
        config.values[assignment.key] = _typed(assignment)
        config.origins[assignment.key] = assignment.origin

    raw_seed = env.get(c.SEED_ENV_VAR)
    if raw_seed:
        try:
            config.values["seed"] = int(raw_seed)
        except ValueError:
            raise ConfigError(f"{c.SEED_ENV_VAR}={raw_seed!r} is not an integer", "seed") from None
        config.origins["seed"] = "environment"

    for key, offset in SEED_KEYS.items():
        if config.values[key] is None:
            config.values[key] = config.values["seed"] + offset
    return config


def parse_config(text: str, overrides: Sequence[str] = (), env: Optional[Mapping[str, str]] = None) -> RunConfig:
    """Parse and resolve config text plus `key=value` overrides"""
    return resolve(parse_assignments(text), [parse_override(item) for item in overrides], env)


def load_config(path, overrides: Sequence[str] = (), env: Optional[Mapping[str, str]] = None) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as err:
        raise ConfigError(f"cannot read config file {path}: {err.strerror}") from None
    try:
        config = parse_config(text, overrides, env)
    except ConfigError as err:
        raise ConfigError(err.message, err.key, err.line, str(path)) from None
    logger.info("Loaded config %s (%s)", path, config.summary() or "all defaults")
    return config
