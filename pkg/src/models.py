"""
Model zoo: MLP teachers and students, RBF student, generator network,
kernel-ridge and external-command predictors, and the teacher oracle
"""
import logging
import shlex
import subprocess
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist

from src.constants import FLOAT_FORMAT, GENERATOR_HIDDEN, GENERATOR_LATENT, KRR_RIDGE, RBF_CENTERS
from src.errors import CapabilityError, InvalidArgumentError, NumericError, ParseError, RegraftError
from src.tensor import Tensor2, add, exp, matmul, mul, relu, scale, softplus, sqdist, tanh

logger = logging.getLogger(__name__)

ACTIVATIONS = {"tanh": tanh, "relu": relu, "softplus": softplus}


@dataclass
class MlpSpec:
    """Dense regression network: d inputs, tanh/relu/softplus hidden layers, one output"""

    input_dim: int
    hidden: List[int] = field(default_factory=list)
    activation: str = "tanh"
    output_dim: int = 1

    def __post_init__(self):
        self.hidden = list(self.hidden)
        if self.input_dim < 1:
            raise InvalidArgumentError(f"input dim must be >= 1, got {self.input_dim}")
        if any(size < 1 for size in self.hidden):
            raise InvalidArgumentError(f"hidden sizes must be >= 1, got {self.hidden}")
        if self.activation not in ACTIVATIONS:
            raise InvalidArgumentError(f"unknown activation '{self.activation}'")
        if self.output_dim != 1:
            raise InvalidArgumentError("regression networks have exactly one output")


@dataclass
class GeneratorSpec:
    """Generator G(z): latent noise to a synthetic input row"""

    output_dim: int
    latent_dim: int = GENERATOR_LATENT
    hidden: List[int] = field(default_factory=lambda: [GENERATOR_HIDDEN])
    activation: str = "relu"

    def __post_init__(self):
        self.hidden = list(self.hidden)
        if self.latent_dim < 1:
            raise InvalidArgumentError(f"latent dim must be >= 1, got {self.latent_dim}")
        if self.output_dim < 1:
            raise InvalidArgumentError(f"output dim must be >= 1, got {self.output_dim}")
        if any(size < 1 for size in self.hidden):
            raise InvalidArgumentError(f"hidden sizes must be >= 1, got {self.hidden}")
        if self.activation not in ACTIVATIONS:
            raise InvalidArgumentError(f"unknown activation '{self.activation}'")


@dataclass
class RbfStudentSpec:
    """Gaussian RBF layer with trainable centers and widths, then a linear output"""

    input_dim: int
    centers: int = RBF_CENTERS

    def __post_init__(self):
        if self.input_dim < 1:
            raise InvalidArgumentError(f"input dim must be >= 1, got {self.input_dim}")
        if self.centers < 1:
            raise InvalidArgumentError(f"center count must be >= 1, got {self.centers}")


def _as_batch(batch, input_dim: int) -> np.ndarray:
    """Validate an n x d batch and return it as a float64 array"""
    array = np.asarray(batch.data if isinstance(batch, Tensor2) else batch, dtype=np.float64)
    if array.ndim == 1 and input_dim == 1:
        array = array.reshape(-1, 1)
    if array.ndim != 2 or array.shape[1] != input_dim:
        raise InvalidArgumentError(f"expected a batch of width {input_dim}, got shape {array.shape}")
    if array.shape[0] < 1:
        raise InvalidArgumentError("batch must contain at least one row")
    return array


class DifferentiableModel:
    """A parameterized network whose forward pass runs on the gradient tape"""

    kind = "model"
    gradient_capable = True

    def __init__(self, input_dim: int, output_dim: int, weights: List[np.ndarray]):
        self.input_dim = input_dim
        self.output_dim = output_dim
        self.weights = [np.array(w, dtype=np.float64) for w in weights]

    def forward(self, x: Tensor2, weights: Optional[Sequence[Tensor2]] = None) -> Tensor2:
        raise NotImplementedError

    def _weights_or_constants(self, weights):
        if weights is None:
            return [Tensor2._wrap(w) for w in self.weights]
        if len(weights) != len(self.weights):
            raise InvalidArgumentError(f"expected {len(self.weights)} weight arrays, got {len(weights)}")
        return list(weights)

    def predict(self, batch) -> np.ndarray:
        """Evaluate on an n x d batch, returning n x output_dim"""
        x = _as_batch(batch, self.input_dim)
        return self.forward(Tensor2._wrap(x)).data

    @property
    def num_params(self) -> int:
        return sum(w.size for w in self.weights)

    def get_flat(self) -> np.ndarray:
        """All weights concatenated in storage order"""
        return np.concatenate([w.reshape(-1) for w in self.weights])

    def set_flat(self, vector: np.ndarray):
        """Overwrite all weights from a flat vector"""
        vector = np.asarray(vector, dtype=np.float64)
        if vector.size != self.num_params:
            raise InvalidArgumentError(f"expected {self.num_params} values, got {vector.size}")
        offset = 0
        for w in self.weights:
            w[...] = vector[offset:offset + w.size].reshape(w.shape)
            offset += w.size

    def copy(self) -> "DifferentiableModel":
        raise NotImplementedError

    def shape_fields(self) -> List[Tuple[str, str]]:
        """Header fields that describe the architecture in a model file"""
        raise NotImplementedError


class Mlp(DifferentiableModel):
    """Fully connected network; the output layer is linear"""

    kind = "mlp"

    def __init__(self, layer_sizes: List[int], activation: str, weights: List[np.ndarray]):
        super().__init__(layer_sizes[0], layer_sizes[-1], weights)
        self.layer_sizes = list(layer_sizes)
        self.activation = activation
        expected = 2 * (len(layer_sizes) - 1)
        if len(self.weights) != expected:
            raise InvalidArgumentError(f"{len(layer_sizes)} layers need {expected} weight arrays")
        for index, (fan_in, fan_out) in enumerate(zip(layer_sizes[:-1], layer_sizes[1:])):
            if self.weights[2 * index].shape != (fan_in, fan_out):
                raise InvalidArgumentError(f"layer {index} weight must be {fan_in}x{fan_out}")
            if self.weights[2 * index + 1].shape != (1, fan_out):
                raise InvalidArgumentError(f"layer {index} bias must be 1x{fan_out}")

    @property
    def hidden(self) -> List[int]:
        return self.layer_sizes[1:-1]

    def forward(self, x: Tensor2, weights: Optional[Sequence[Tensor2]] = None) -> Tensor2:
        weights = self._weights_or_constants(weights)
        act = ACTIVATIONS[self.activation]
        h = x
        layers = len(self.layer_sizes) - 1
        for index in range(layers):
            h = add(matmul(h, weights[2 * index]), weights[2 * index + 1])
            if index < layers - 1:
                h = act(h)
        return h

    def copy(self) -> "Mlp":
        return type(self)(self.layer_sizes, self.activation, self.weights)

    def shape_fields(self) -> List[Tuple[str, str]]:
        return [
            ("layers", " ".join(str(size) for size in self.layer_sizes)),
            ("activation", self.activation),
        ]


class Generator(Mlp):
    """Mlp mapping latent noise to input space"""

    kind = "generator"

    @property
    def latent_dim(self) -> int:
        return self.input_dim


class RbfNet(DifferentiableModel):
    """Gaussian RBF hidden layer followed by a linear output unit"""

    kind = "rbf"

    def __init__(self, centers: np.ndarray, log_widths: np.ndarray,
                 out_weights: np.ndarray, bias: np.ndarray):
        centers = np.asarray(centers, dtype=np.float64)
        k, d = centers.shape
        weights = [centers, np.reshape(log_widths, (1, k)), np.reshape(out_weights, (k, 1)),
                   np.reshape(bias, (1, 1))]
        super().__init__(d, 1, weights)

    @property
    def num_centers(self) -> int:
        return self.weights[0].shape[0]

    def _hidden(self, x: Tensor2, weights: Sequence[Tensor2]) -> Tensor2:
        centers, log_widths = weights[0], weights[1]
        inv_two_var = scale(exp(scale(log_widths, -2.0)), 0.5)  # 1 / (2 sigma^2)
        return exp(scale(mul(sqdist(x, centers), inv_two_var), -1.0))

    def hidden_activations(self, batch) -> np.ndarray:
        """Gaussian unit responses, n x centers"""
        x = _as_batch(batch, self.input_dim)
        return self._hidden(Tensor2._wrap(x), self._weights_or_constants(None)).data

    def forward(self, x: Tensor2, weights: Optional[Sequence[Tensor2]] = None) -> Tensor2:
        weights = self._weights_or_constants(weights)
        hidden = self._hidden(x, weights)
        return add(matmul(hidden, weights[2]), weights[3])

    def copy(self) -> "RbfNet":
        return RbfNet(*self.weights)

    def shape_fields(self) -> List[Tuple[str, str]]:
        return [("input_dim", str(self.input_dim)), ("centers", str(self.num_centers))]


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _dense_weights(layer_sizes: List[int], seed: int) -> List[np.ndarray]:
    rng = np.random.default_rng(seed)
    weights = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        weights.append(_glorot(rng, fan_in, fan_out))
        weights.append(np.zeros((1, fan_out)))
    return weights


def build_mlp(spec: MlpSpec, seed: int) -> Mlp:
    """Glorot-uniform weights, zero biases"""
    sizes = [spec.input_dim] + spec.hidden + [spec.output_dim]
    return Mlp(sizes, spec.activation, _dense_weights(sizes, seed))


def build_generator(spec: GeneratorSpec, seed: int) -> Generator:
    sizes = [spec.latent_dim] + spec.hidden + [spec.output_dim]
    return Generator(sizes, spec.activation, _dense_weights(sizes, seed))


def build_rbf(spec: RbfStudentSpec, seed: int, centers: Optional[np.ndarray] = None) -> RbfNet:
    """Centers come from the caller's sampler when given, else standard normal draws"""
    rng = np.random.default_rng(seed)
    if centers is None:
        centers = rng.standard_normal((spec.centers, spec.input_dim))
    centers = np.asarray(centers, dtype=np.float64)
    if centers.shape != (spec.centers, spec.input_dim):
        raise InvalidArgumentError(f"centers must be {spec.centers}x{spec.input_dim}, got {centers.shape}")
    out_weights = _glorot(rng, spec.centers, 1)
    return RbfNet(centers, np.zeros((1, spec.centers)), out_weights, np.zeros((1, 1)))


def linear_model(slope: float, intercept: float = 0.0) -> Mlp:
    """The 1-d model y = slope * x + intercept"""
    return Mlp([1, 1], "tanh", [np.array([[slope]]), np.array([[intercept]])])


class KernelRidgePredictor:
    """Closed-form Gaussian-kernel ridge regression, used as a black-box teacher"""

    kind = "krr"
    gradient_capable = False

    def __init__(self, support: np.ndarray, dual_coef: np.ndarray, sigma: float, ridge: float):
        self.support = np.asarray(support, dtype=np.float64)
        self.dual_coef = np.asarray(dual_coef, dtype=np.float64).reshape(-1)
        self.sigma = float(sigma)
        self.ridge = float(ridge)
        if self.dual_coef.size != self.support.shape[0]:
            raise InvalidArgumentError("one dual coefficient is needed per support point")
        if self.sigma <= 0:
            raise InvalidArgumentError(f"bandwidth must be positive, got {self.sigma}")

    @property
    def input_dim(self) -> int:
        return self.support.shape[1]

    def kernel(self, batch: np.ndarray) -> np.ndarray:
        return np.exp(-cdist(batch, self.support, "sqeuclidean") / (2.0 * self.sigma ** 2))

    def predict(self, batch) -> np.ndarray:
        x = _as_batch(batch, self.input_dim)
        return (self.kernel(x) @ self.dual_coef).reshape(-1, 1)


def krr_fit(X, y, sigma: Optional[float] = None, ridge: float = KRR_RIDGE) -> KernelRidgePredictor:
    """Solve (K + ridge I) a = y with K_ij = exp(-||x_i - x_j||^2 / (2 sigma^2))"""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.ndim != 2 or X.shape[0] < 1:
        raise InvalidArgumentError(f"X must be a non-empty n x d matrix, got shape {X.shape}")
    if y.size != X.shape[0]:
        raise InvalidArgumentError(f"{X.shape[0]} points but {y.size} targets")
    if sigma is None:
        sigma = float(np.sqrt(X.shape[1]))
    if sigma <= 0:
        raise InvalidArgumentError(f"bandwidth must be positive, got {sigma}")
    if ridge < 0:
        raise InvalidArgumentError(f"ridge must be >= 0, got {ridge}")

    gram = np.exp(-cdist(X, X, "sqeuclidean") / (2.0 * sigma ** 2))
    gram[np.diag_indices_from(gram)] += ridge
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            dual = scipy.linalg.solve(gram, y, assume_a="pos")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as err:
        raise NumericError(f"kernel system is singular (ridge={ridge}): {err}") from err
    logger.info("Fitted kernel ridge teacher on %d points (sigma=%.4g, ridge=%.3g)", X.shape[0], sigma, ridge)
    return KernelRidgePredictor(X, dual, sigma, ridge)


class CommandPredictor:
    """Runs a local executable: CSV rows on stdin, one prediction per stdout line"""

    kind = "command"
    gradient_capable = False

    def __init__(self, command: Union[str, List[str]], input_dim: int, timeout: float = 600.0):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.input_dim = input_dim
        self.timeout = timeout
        if not self.command:
            raise InvalidArgumentError("teacher command is empty")

    def predict(self, batch) -> np.ndarray:
        x = _as_batch(batch, self.input_dim)
        payload = "\n".join(",".join(FLOAT_FORMAT % v for v in row) for row in x) + "\n"
        try:
            result = subprocess.run(self.command, input=payload, capture_output=True, text=True,
                                    timeout=self.timeout, check=False)
        except subprocess.TimeoutExpired:
            raise RegraftError(f"teacher command timed out after {self.timeout}s") from None
        if result.returncode != 0:
            raise RegraftError(f"teacher command exited with {result.returncode}: {result.stderr.strip()}")
        lines = [line for line in result.stdout.splitlines() if line.strip()]
        if len(lines) != x.shape[0]:
            raise ParseError(f"teacher command returned {len(lines)} predictions for {x.shape[0]} rows")
        values = []
        for number, line in enumerate(lines, start=1):
            try:
                values.append(float(line))
            except ValueError:
                raise ParseError(f"not a number: {line!r}", line=number) from None
        return Tensor2(np.array(values)).data


class TeacherOracle:
    """Prediction-only view of a teacher; gradients only when backed by a network"""

    def __init__(self, backing):
        if isinstance(backing, TeacherOracle):
            backing = backing.backing
        self.backing = backing

    @property
    def gradient_capable(self) -> bool:
        return isinstance(self.backing, DifferentiableModel)

    @property
    def input_dim(self) -> int:
        return self.backing.input_dim

    @property
    def kind(self) -> str:
        return self.backing.kind

    @property
    def model(self) -> DifferentiableModel:
        """The differentiable network behind the oracle"""
        if not self.gradient_capable:
            raise CapabilityError(f"teacher of kind '{self.kind}' exposes no gradients")
        return self.backing

    def predict(self, batch) -> np.ndarray:
        return self.backing.predict(batch)

    def forward(self, x: Tensor2) -> Tensor2:
        """Taped forward pass when x is taped; constant predictions otherwise"""
        if self.gradient_capable:
            return self.backing.forward(x)
        if x.on_tape:
            raise CapabilityError(f"teacher of kind '{self.kind}' cannot be differentiated")
        return Tensor2._wrap(self.predict(x.data))


def predict(model, batch) -> np.ndarray:
    """n x 1 predictions from any teacher, student or oracle"""
    return model.predict(batch)
