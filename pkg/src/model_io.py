"""
Versioned plain-text model files
"""
import logging
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from src.constants import FLOAT_FORMAT, MODEL_FORMAT_TAG, MODEL_FORMAT_VERSION
from src.errors import InvalidArgumentError, ParseError
from src.models import ACTIVATIONS, Generator, KernelRidgePredictor, Mlp, RbfNet, TeacherOracle

logger = logging.getLogger(__name__)

MODEL_KINDS = ("mlp", "generator", "rbf", "krr")
FIELDS = {
    "mlp": ("layers", "activation"),
    "generator": ("layers", "activation"),
    "rbf": ("input_dim", "centers"),
    "krr": ("input_dim", "support_count", "sigma", "ridge"),
}


def _header(model) -> Tuple[List[Tuple[str, str]], np.ndarray]:
    if isinstance(model, KernelRidgePredictor):
        fields = [
            ("input_dim", str(model.input_dim)),
            ("support_count", str(model.support.shape[0])),
            ("sigma", FLOAT_FORMAT % model.sigma),
            ("ridge", FLOAT_FORMAT % model.ridge),
        ]
        return fields, np.concatenate([model.support.reshape(-1), model.dual_coef])
    return model.shape_fields(), model.get_flat()


def save_model(model, path):
    """Write the header, shape fields and every parameter at 17 significant digits"""
    if isinstance(model, TeacherOracle):
        model = model.backing
    if model.kind not in MODEL_KINDS:
        raise InvalidArgumentError(f"models of kind '{model.kind}' cannot be saved")
    fields, values = _header(model)
    lines = [f"{MODEL_FORMAT_TAG} {MODEL_FORMAT_VERSION} {model.kind}"]
    lines += [f"{key} {value}" for key, value in fields]
    lines.append(f"param_count {values.size}")
    lines += [FLOAT_FORMAT % v for v in values]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    logger.debug("Saved %s model with %d parameters to %s", model.kind, values.size, path)


def _int_field(fields: Dict[str, Tuple[int, str]], key: str, path: str) -> int:
    line, text = fields[key]
    try:
        value = int(text)
    except ValueError:
        raise ParseError(f"{key} must be an integer, got {text!r}", line, path) from None
    if value < 1:
        raise ParseError(f"{key} must be >= 1", line, path)
    return value


def _float_field(fields: Dict[str, Tuple[int, str]], key: str, path: str, low: float = 0.0,
                 strict: bool = False) -> float:
    line, text = fields[key]
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"{key} must be a number, got {text!r}", line, path) from None
    if not np.isfinite(value) or value < low or (strict and value == low):
        relation = ">" if strict else ">="
        raise ParseError(f"{key} must be finite and {relation} {low:g}, got {text!r}", line, path)
    return value


def load_model(path):
    """Parse a model file written by save_model"""
    path = str(path)
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ParseError("empty model file", 1, path)

    header = lines[0].split()
    if len(header) != 3 or header[0] != MODEL_FORMAT_TAG:
        raise ParseError(f"expected '{MODEL_FORMAT_TAG} {MODEL_FORMAT_VERSION} <kind>'", 1, path)
    if header[1] != MODEL_FORMAT_VERSION:
        raise ParseError(f"unsupported version {header[1]!r}", 1, path)
    kind = header[2]
    if kind not in MODEL_KINDS:
        raise ParseError(f"unknown model kind {kind!r}", 1, path)

    fields: Dict[str, Tuple[int, str]] = {}
    index = 1
    while index < len(lines):
        number = index + 1
        key, _, rest = lines[index].partition(" ")
        index += 1
        if key == "param_count":
            fields[key] = (number, rest.strip())
            break
        if key not in FIELDS[kind]:
            raise ParseError(f"unexpected field {key!r} for a {kind} model", number, path)
        fields[key] = (number, rest.strip())
    for key in FIELDS[kind] + ("param_count",):
        if key not in fields:
            raise ParseError(f"missing field {key!r}", index, path)

    count_line, _ = fields["param_count"]
    declared = _int_field(fields, "param_count", path)
    values_text = lines[index:]
    if len(values_text) != declared:
        raise ParseError(f"declared {declared} parameters but found {len(values_text)}", count_line, path)
    values = np.empty(declared)
    for offset, text in enumerate(values_text):
        try:
            values[offset] = float(text)
        except ValueError:
            raise ParseError(f"not a number: {text!r}", index + offset + 1, path) from None
        if not np.isfinite(values[offset]):
            raise ParseError(f"non-finite parameter {text!r}", index + offset + 1, path)

    if kind in ("mlp", "generator"):
        layer_line, layer_text = fields["layers"]
        try:
            sizes = [int(token) for token in layer_text.split()]
        except ValueError:
            raise ParseError(f"layer sizes must be integers, got {layer_text!r}", layer_line, path) from None
        if len(sizes) < 2 or min(sizes) < 1:
            raise ParseError("need at least input and output layer sizes", layer_line, path)
        expected = sum((fan_in + 1) * fan_out for fan_in, fan_out in zip(sizes[:-1], sizes[1:]))
        if expected != declared:
            raise ParseError(f"layers {sizes} need {expected} parameters, declared {declared}", count_line, path)
        shapes = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            shapes += [(fan_in, fan_out), (1, fan_out)]
        activation_line, activation = fields["activation"]
        if activation not in ACTIVATIONS:
            raise ParseError(f"unknown activation {activation!r}", activation_line, path)
        cls = Generator if kind == "generator" else Mlp
        model = cls(sizes, activation, [np.zeros(shape) for shape in shapes])
        model.set_flat(values)
    elif kind == "rbf":
        d = _int_field(fields, "input_dim", path)
        k = _int_field(fields, "centers", path)
        expected = k * d + k + k + 1
        if expected != declared:
            raise ParseError(f"rbf {k}x{d} needs {expected} parameters, declared {declared}", count_line, path)
        model = RbfNet(np.zeros((k, d)), np.zeros(k), np.zeros(k), np.zeros(1))
        model.set_flat(values)
    else:
        d = _int_field(fields, "input_dim", path)
        n = _int_field(fields, "support_count", path)
        if n * d + n != declared:
            raise ParseError(f"{n} support points in {d} dims need {n * d + n} values", count_line, path)
        model = KernelRidgePredictor(values[:n * d].reshape(n, d), values[n * d:],
                                     _float_field(fields, "sigma", path, strict=True),
                                     _float_field(fields, "ridge", path))
    logger.debug("Loaded %s model with %d parameters from %s", kind, declared, path)
    return model
