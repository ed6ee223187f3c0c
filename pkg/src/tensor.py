"""
Dense 2-D tensors, a reverse-mode gradient tape, and loss functions
"""
import logging
import math
from typing import Callable, Dict, List, Optional, Set, Tuple

import numpy as np

from src.constants import GRADCHECK_STEP
from src.errors import InvalidArgumentError, NumericError

logger = logging.getLogger(__name__)

LOSS_KINDS = ("mse", "logcosh")
LOG2 = math.log(2.0)

Vjp = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


class Tensor2:
    """A rows x cols matrix of 64-bit floats, optionally recorded on a GradTape"""

    __slots__ = ("data", "tape", "node")

    def __init__(self, data, tape: Optional["GradTape"] = None, node: Optional[int] = None):
        if isinstance(data, Tensor2):
            data = data.data
        array = np.array(data, dtype=np.float64)
        if array.ndim == 0:
            array = array.reshape(1, 1)
        elif array.ndim == 1:
            array = array.reshape(-1, 1)  # a flat sequence is a column
        elif array.ndim != 2:
            raise InvalidArgumentError(f"Tensor2 needs at most 2 dimensions, got {array.ndim}")
        _check_finite(array)
        self.data = array
        self.tape = tape
        self.node = node

    @classmethod
    def _wrap(cls, array: np.ndarray, tape: Optional["GradTape"] = None,
              node: Optional[int] = None) -> "Tensor2":
        """Wrap an op result without copying"""
        _check_finite(array)
        tensor = cls.__new__(cls)
        tensor.data = array
        tensor.tape = tape
        tensor.node = node
        return tensor

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.data.shape

    @property
    def on_tape(self) -> bool:
        return self.tape is not None

    def item(self) -> float:
        """Value of a 1x1 tensor"""
        if self.data.shape != (1, 1):
            raise InvalidArgumentError(f"item() needs a 1x1 tensor, got {self.rows}x{self.cols}")
        return float(self.data[0, 0])

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        flag = ", taped" if self.on_tape else ""
        return f"Tensor2({self.rows}x{self.cols}{flag})"


def _check_finite(array: np.ndarray):
    if not np.all(np.isfinite(array)):
        raise NumericError("non-finite value produced")


class GradTape:
    """Records primitive operations so gradients can be replayed backward"""

    def __init__(self):
        self._records: List[Tuple[int, Tuple[Tensor2, ...], Vjp]] = []
        self._watched: Set[int] = set()
        self._next_node = 0
        self._seed: Optional[Tensor2] = None

    def __len__(self):
        return len(self._records)

    def _new_node(self) -> int:
        node = self._next_node
        self._next_node += 1
        return node

    def watch(self, value) -> Tensor2:
        """Register a leaf (parameter or input batch) to differentiate against"""
        tensor = Tensor2(value)
        tensor.tape = self
        tensor.node = self._new_node()
        self._watched.add(tensor.node)
        return tensor

    def record(self, result: np.ndarray, parents: Tuple[Tensor2, ...], vjp: Vjp) -> Tensor2:
        """Append one primitive and return its taped output"""
        out = Tensor2._wrap(result, self, self._new_node())
        self._records.append((out.node, parents, vjp))
        return out

    def seed(self, loss: Tensor2):
        """Mark the scalar loss that backward() differentiates"""
        if loss.shape != (1, 1):
            raise InvalidArgumentError(f"loss must be a 1x1 scalar, got {loss.rows}x{loss.cols}")
        if loss.tape is not None and loss.tape is not self:
            raise InvalidArgumentError("loss was recorded on a different tape")
        self._seed = loss

    def gradient(self, loss: Tensor2, wrt):
        """Seed with loss and return d(loss)/d(wrt)"""
        self.seed(loss)
        return backward(self, wrt)


def backward(tape: GradTape, wrt):
    """Replay the tape from its seeded loss; returns one gradient per entry of wrt"""
    if tape._seed is None:
        raise InvalidArgumentError("tape has no seeded loss")
    single = isinstance(wrt, Tensor2)
    targets = [wrt] if single else list(wrt)
    for target in targets:
        if target.tape is not tape or target.node not in tape._watched:
            raise InvalidArgumentError("gradient requested for a value not registered on this tape")

    loss = tape._seed
    grads: Dict[int, np.ndarray] = {}
    if loss.tape is tape:
        grads[loss.node] = np.ones((1, 1))
        for node, parents, vjp in reversed(tape._records):
            upstream = grads.pop(node, None)
            if upstream is None:
                continue
            for parent, grad in zip(parents, vjp(upstream)):
                if grad is None or parent.tape is not tape:
                    continue
                if parent.node in grads:
                    grads[parent.node] = grads[parent.node] + grad
                else:
                    grads[parent.node] = grad

    results = []
    for target in targets:
        grad = grads.get(target.node)
        results.append(np.zeros_like(target.data) if grad is None else np.array(grad))
    return results[0] if single else results


# --- primitives -------------------------------------------------------------

def _lift(value) -> Tensor2:
    return value if isinstance(value, Tensor2) else Tensor2(value)


def _tape_of(*tensors: Tensor2) -> Optional[GradTape]:
    tape = None
    for tensor in tensors:
        if tensor.tape is None:
            continue
        if tape is None:
            tape = tensor.tape
        elif tensor.tape is not tape:
            raise InvalidArgumentError("operands were recorded on different tapes")
    return tape


def _apply(result: np.ndarray, parents: Tuple[Tensor2, ...], vjp: Vjp) -> Tensor2:
    tape = _tape_of(*parents)
    if tape is None:
        return Tensor2._wrap(result)
    return tape.record(result, parents, vjp)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    for axis in (0, 1):
        if shape[axis] == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(a: Tensor2, b: Tensor2) -> Tuple[int, int]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise InvalidArgumentError(f"shapes {a.shape} and {b.shape} do not broadcast") from None


def add(a, b) -> Tensor2:
    a, b = _lift(a), _lift(b)
    _broadcast_shape(a, b)
    return _apply(a.data + b.data, (a, b),
                  lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor2:
    a, b = _lift(a), _lift(b)
    _broadcast_shape(a, b)
    return _apply(a.data - b.data, (a, b),
                  lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)))


def mul(a, b) -> Tensor2:
    a, b = _lift(a), _lift(b)
    _broadcast_shape(a, b)
    return _apply(a.data * b.data, (a, b),
                  lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def scale(a, factor: float) -> Tensor2:
    a = _lift(a)
    return _apply(a.data * factor, (a,), lambda g: (g * factor,))


def matmul(a, b) -> Tensor2:
    a, b = _lift(a), _lift(b)
    if a.cols != b.rows:
        raise InvalidArgumentError(f"cannot multiply {a.rows}x{a.cols} by {b.rows}x{b.cols}")
    return _apply(a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def tanh(a) -> Tensor2:
    a = _lift(a)
    out = np.tanh(a.data)
    return _apply(out, (a,), lambda g: (g * (1.0 - out * out),))


def relu(a) -> Tensor2:
    a = _lift(a)
    mask = a.data > 0.0
    return _apply(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def softplus(a) -> Tensor2:
    a = _lift(a)
    out = np.logaddexp(0.0, a.data)
    return _apply(out, (a,), lambda g: (g * (1.0 - np.exp(-out)),))


def exp(a) -> Tensor2:
    a = _lift(a)
    out = np.exp(a.data)
    return _apply(out, (a,), lambda g: (g * out,))


def square(a) -> Tensor2:
    a = _lift(a)
    return _apply(a.data * a.data, (a,), lambda g: (2.0 * g * a.data,))


def absolute(a) -> Tensor2:
    a = _lift(a)
    return _apply(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),))


def logcosh(a) -> Tensor2:
    """log(cosh(a)) in the overflow-safe form |a| + log1p(exp(-2|a|)) - log 2"""
    a = _lift(a)
    mag = np.abs(a.data)
    out = mag + np.log1p(np.exp(-2.0 * mag)) - LOG2
    return _apply(out, (a,), lambda g: (g * np.tanh(a.data),))


def sum_all(a) -> Tensor2:
    a = _lift(a)
    return _apply(np.array([[a.data.sum()]]), (a,), lambda g: (np.full(a.shape, g[0, 0]),))


def mean_all(a) -> Tensor2:
    a = _lift(a)
    count = a.data.size
    return _apply(np.array([[a.data.mean()]]), (a,),
                  lambda g: (np.full(a.shape, g[0, 0] / count),))


def row_sum(a) -> Tensor2:
    a = _lift(a)
    return _apply(a.data.sum(axis=1, keepdims=True), (a,),
                  lambda g: (np.broadcast_to(g, a.shape).copy(),))


def sqdist(x, centers) -> Tensor2:
    """Pairwise squared distances: out[i, j] = ||x_i - c_j||^2"""
    x, centers = _lift(x), _lift(centers)
    if x.cols != centers.cols:
        raise InvalidArgumentError(f"points have {x.cols} columns, centers have {centers.cols}")
    diff = x.data[:, None, :] - centers.data[None, :, :]
    out = np.einsum("nkd,nkd->nk", diff, diff)

    def vjp(g):
        weighted = g[:, :, None] * diff
        return 2.0 * weighted.sum(axis=1), -2.0 * weighted.sum(axis=0)

    return _apply(out, (x, centers), vjp)


# --- losses -----------------------------------------------------------------

def _check_pair(pred: Tensor2, target: Tensor2):
    if pred.shape != target.shape:
        raise InvalidArgumentError(f"pred {pred.shape} and target {target.shape} differ in shape")
    if pred.rows < 1:
        raise InvalidArgumentError("loss needs at least one row")


def loss_op(kind: str, pred, target) -> Tensor2:
    """Mean loss as a 1x1 tensor, differentiable when its inputs are taped"""
    pred, target = _lift(pred), _lift(target)
    _check_pair(pred, target)
    diff = sub(pred, target)
    if kind == "mse":
        return mean_all(square(diff))
    if kind == "logcosh":
        return mean_all(logcosh(diff))
    raise InvalidArgumentError(f"unknown loss kind '{kind}', expected one of {LOSS_KINDS}")


def loss_eval(kind: str, pred, target) -> float:
    """Mean squared error or mean log-cosh of pred - target"""
    return loss_op(kind, pred, target).item()


# --- gradient checking ------------------------------------------------------

def finite_diff_check(model, point, step: float = GRADCHECK_STEP) -> float:
    """Max relative error between taped gradients and central differences.

    The objective is the sum of the model outputs over the batch; both the
    weights and the input point are perturbed one coordinate at a time.
    """
    if step <= 0:
        raise InvalidArgumentError(f"step must be positive, got {step}")
    x0 = Tensor2(point).data
    weights0 = [np.array(w, dtype=np.float64) for w in model.weights]

    def objective(x: np.ndarray, weights: List[np.ndarray]) -> float:
        out = model.forward(Tensor2._wrap(x), [Tensor2._wrap(w) for w in weights])
        return float(out.data.sum())

    tape = GradTape()
    x_leaf = tape.watch(x0)
    w_leaves = [tape.watch(w) for w in weights0]
    total = sum_all(model.forward(x_leaf, w_leaves))
    grads = tape.gradient(total, [x_leaf] + w_leaves)

    arrays = [x0] + weights0
    worst = 0.0
    for slot, (array, grad) in enumerate(zip(arrays, grads)):
        for index in np.ndindex(array.shape):
            original = array[index]
            array[index] = original + step
            upper = objective(arrays[0], arrays[1:])
            array[index] = original - step
            lower = objective(arrays[0], arrays[1:])
            array[index] = original
            numeric = (upper - lower) / (2.0 * step)
            analytic = grad[index]
            worst = max(worst, abs(analytic - numeric) / max(1.0, abs(analytic)))
    logger.debug("finite difference check over %d arrays: max relative error %.3e", len(arrays), worst)
    return worst
