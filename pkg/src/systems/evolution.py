"""
Row-wise differential evolution (best/2/bin)
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from src.constants import DE_MIN_POPULATION
from src.errors import InvalidArgumentError

logger = logging.getLogger(__name__)

RowObjective = Callable[[np.ndarray], np.ndarray]


@dataclass
class EvolutionResult:
    """Best member of every sub-population and the per-iteration best values"""

    best: np.ndarray  # n x d
    best_values: np.ndarray  # n
    history: List[np.ndarray] = field(default_factory=list)  # best values after each iteration, incl. initial


def _evaluate(objective: RowObjective, population: np.ndarray) -> np.ndarray:
    n, size, d = population.shape
    values = np.asarray(objective(population.reshape(n * size, d)), dtype=np.float64).reshape(n, size)
    return np.where(np.isnan(values), np.inf, values)


def _best2_trials(population: np.ndarray, best: np.ndarray, f: float, cr: float,
                  rng: np.random.Generator) -> np.ndarray:
    """best + F(r0 - r2) + F(r1 - r3), binomial crossover, one sub-population"""
    size, d = population.shape
    keys = rng.random((size, size))
    np.fill_diagonal(keys, np.inf)  # a member never partners with itself
    partners = np.argsort(keys, axis=1)[:, :4]
    r0, r1, r2, r3 = (population[partners[:, k]] for k in range(4))
    mutants = best + f * (r0 + r1 - r2 - r3)
    crossover = rng.random((size, d)) < cr
    crossover[np.arange(size), rng.integers(0, d, size=size)] = True  # at least one mutant coordinate
    return np.where(crossover, mutants, population)


def evolve_rows(objective: RowObjective, population: np.ndarray, f: float, cr: float,
                iterations: int, rngs: Sequence[np.random.Generator],
                project: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> EvolutionResult:
    """Evolve n independent sub-populations (n x P x d) against a row-wise objective.

    objective maps an m x d matrix to m values; every sub-population i uses
    its own generator rngs[i], so results do not depend on evaluation order.
    Selection is greedy (a trial replaces its parent when not worse).
    """
    population = np.array(population, dtype=np.float64)
    if population.ndim != 3:
        raise InvalidArgumentError(f"population must be n x P x d, got shape {population.shape}")
    n, size, d = population.shape
    if size < DE_MIN_POPULATION:
        raise InvalidArgumentError(f"best/2/bin needs a population of at least {DE_MIN_POPULATION}")
    if len(rngs) != n:
        raise InvalidArgumentError(f"{n} sub-populations but {len(rngs)} generators")
    if not 0.0 <= f <= 2.0 or not 0.0 <= cr <= 1.0:
        raise InvalidArgumentError(f"need F in [0, 2] and CR in [0, 1], got F={f}, CR={cr}")

    values = _evaluate(objective, population)
    history = [values.min(axis=1)]
    for iteration in range(iterations):
        best_index = np.argmin(values, axis=1)
        trials = np.empty_like(population)
        for row in range(n):
            trials[row] = _best2_trials(population[row], population[row, best_index[row]], f, cr, rngs[row])
        if project is not None:
            trials = project(trials.reshape(n * size, d)).reshape(n, size, d)
        trial_values = _evaluate(objective, trials)
        accepted = trial_values <= values
        population[accepted] = trials[accepted]
        values[accepted] = trial_values[accepted]
        history.append(values.min(axis=1))
        logger.debug("DE iteration %d: mean best %.6g, accepted %d/%d",
                     iteration + 1, history[-1].mean(), int(accepted.sum()), accepted.size)

    best_index = np.argmin(values, axis=1)
    best = population[np.arange(n), best_index]
    return EvolutionResult(best, values[np.arange(n), best_index], history)


def row_generators(rng: np.random.Generator, count: int) -> List[np.random.Generator]:
    """Split one generator into independent per-row generators"""
    root = np.random.SeedSequence(int(rng.integers(0, 2 ** 63 - 1)))
    return [np.random.default_rng(child) for child in root.spawn(count)]


def rastrigin(x: np.ndarray) -> np.ndarray:
    """Row-wise Rastrigin function, minimum 0 at the origin"""
    return 10.0 * x.shape[1] + np.sum(x * x - 10.0 * np.cos(2.0 * np.pi * x), axis=1)
