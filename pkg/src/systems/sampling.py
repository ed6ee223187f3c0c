"""
Random and quasi-random samplers for synthetic inputs
"""
import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.stats import qmc

from src.dataset import DomainStats
from src.errors import InvalidArgumentError

logger = logging.getLogger(__name__)

SAMPLER_KINDS = ("gaussian", "latin-hypercube", "halton", "domain")

Seed = Union[int, np.random.Generator, None]


def _as_vector(value, dim: int, name: str) -> Optional[np.ndarray]:
    if value is None:
        return None
    vector = np.broadcast_to(np.asarray(value, dtype=np.float64), (dim,)).copy()
    if not np.all(np.isfinite(vector)):
        raise InvalidArgumentError(f"{name} must be finite")
    return vector


@dataclass
class SamplerSpec:
    """Sampler kind, dimension and optional domain constraints"""

    kind: str
    dim: int
    mean: Optional[np.ndarray] = None  # domain sampler only
    std: Optional[np.ndarray] = None
    low: Optional[np.ndarray] = None  # box / clip bounds
    high: Optional[np.ndarray] = None
    simplex: bool = False  # renormalize rows to sum to 1

    def __post_init__(self):
        if self.kind not in SAMPLER_KINDS:
            raise InvalidArgumentError(f"unknown sampler '{self.kind}', expected one of {SAMPLER_KINDS}")
        if self.dim < 1:
            raise InvalidArgumentError(f"dimension must be >= 1, got {self.dim}")
        self.mean = _as_vector(self.mean, self.dim, "mean")
        self.std = _as_vector(self.std, self.dim, "std")
        self.low = _as_vector(self.low, self.dim, "low")
        self.high = _as_vector(self.high, self.dim, "high")
        if (self.low is None) != (self.high is None):
            raise InvalidArgumentError("low and high bounds must be given together")
        if self.low is not None and np.any(self.low > self.high):
            raise InvalidArgumentError("low bound exceeds high bound")
        if self.std is not None and np.any(self.std < 0):
            raise InvalidArgumentError("std must be >= 0")
        if self.simplex and not (self.has_bounds and np.all(self.low == 0.0) and np.all(self.high == 1.0)):
            raise InvalidArgumentError("simplex renormalization requires clip bounds [0, 1]")

    @property
    def has_bounds(self) -> bool:
        return self.low is not None

    @classmethod
    def from_domain(cls, stats: DomainStats, low=None, high=None, simplex: bool = False) -> "SamplerSpec":
        """Per-feature normal(mean, std) sampler built from training statistics"""
        return cls("domain", len(stats.mean), stats.mean, stats.std, low, high, simplex)


def _generator(seed: Seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample(spec: SamplerSpec, n: int, seed: Seed = None) -> np.ndarray:
    """Draw an n x d batch"""
    if n < 1:
        raise InvalidArgumentError(f"sample count must be >= 1, got {n}")
    rng = _generator(seed)

    if spec.kind == "gaussian":
        return rng.standard_normal((n, spec.dim))

    if spec.kind in ("halton", "latin-hypercube"):
        if not spec.has_bounds:
            raise InvalidArgumentError(f"{spec.kind} sampling needs finite low/high bounds")
        if spec.kind == "halton":
            engine = qmc.Halton(d=spec.dim, scramble=False)
            engine.fast_forward(1)  # skip the all-zeros first point
        else:
            engine = qmc.LatinHypercube(d=spec.dim, seed=rng)
        unit = engine.random(n)
        return spec.low + unit * (spec.high - spec.low)

    if spec.mean is None or spec.std is None:
        raise InvalidArgumentError("domain sampling needs per-feature mean and std")
    x = rng.normal(spec.mean, spec.std, size=(n, spec.dim))
    return project(spec, x)


def project(spec: SamplerSpec, x: np.ndarray) -> np.ndarray:
    """Clip to the spec's bounds and renormalize onto the simplex when flagged"""
    if spec.has_bounds:
        x = np.clip(x, spec.low, spec.high)
    if spec.simplex:
        totals = x.sum(axis=1, keepdims=True)
        empty = totals[:, 0] == 0.0
        x = x / np.where(totals == 0.0, 1.0, totals)
        x[empty] = 1.0 / spec.dim
    return x


def axis_discrepancy(points: np.ndarray, low: np.ndarray, high: np.ndarray) -> float:
    """Largest per-dimension Kolmogorov-Smirnov distance from the uniform law on [low, high]"""
    unit = np.sort((points - low) / (high - low), axis=0)
    n = unit.shape[0]
    upper = np.arange(1, n + 1)[:, None] / n - unit
    lower = unit - np.arange(0, n)[:, None] / n
    return float(np.max(np.maximum(upper, lower)))
