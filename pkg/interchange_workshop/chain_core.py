"""
chain_core.py - The Measuring Bench of the Interchange Workshop

This module houses the primitives every other department leans on: one
application of a transition matrix to a distribution, m-step marginals, and
the two distances used to compare marginals (plain and weighted total
variation, both in the L1 convention with range [0, 2] for the plain one).
"""

import logging
import math
from typing import Iterator

import numpy as np

from interchange_workshop.errors import (
    DimensionError,
    PreconditionError,
    StochasticityError,
)
from interchange_workshop.specs.data_models import (
    ProbDist,
    StochasticMatrix,
    WeightFunction,
)

logger = logging.getLogger(__name__)

# Drift from total mass 1 that a single step may absorb by renormalizing.
RENORMALIZATION_LIMIT = 1e-10


def advance_vector(
    vector: np.ndarray, matrix: StochasticMatrix, operation: str = "propagate"
) -> np.ndarray:
    """Dense row vector times matrix, renormalized to absorb rounding only."""
    result = matrix.transposed @ vector
    total = float(result.sum())
    if not abs(total - 1.0) < RENORMALIZATION_LIMIT:
        raise StochasticityError(
            f"mass after one step is {total!r}; the matrix is not stochastic",
            operation,
        )
    return result / total


def iterate_vectors(
    matrix: StochasticMatrix, start: np.ndarray, steps: int
) -> Iterator[np.ndarray]:
    """Yields the marginals for m = 0, 1, ..., steps as dense vectors."""
    vector = start
    yield vector
    for _ in range(steps):
        vector = advance_vector(vector, matrix, "iterate_vectors")
        yield vector


def delta_vector(matrix: StochasticMatrix, x: int, operation: str) -> np.ndarray:
    vector = np.zeros(matrix.dimension)
    vector[matrix.check_state(x, operation)] = 1.0
    return vector


def propagate(distribution: ProbDist, matrix: StochasticMatrix) -> ProbDist:
    if distribution.support_max >= matrix.dimension:
        raise DimensionError(
            f"state {distribution.support_max} outside dimension {matrix.dimension}",
            "propagate",
        )
    vector = advance_vector(distribution.to_dense(matrix.dimension), matrix)
    return ProbDist.from_dense(vector)


def marginal_vector(matrix: StochasticMatrix, x: int, m: int) -> np.ndarray:
    if m < 0:
        raise PreconditionError(f"step count must be >= 0, got {m}", "marginal")
    vector = delta_vector(matrix, x, "marginal")
    for _ in range(m):
        vector = advance_vector(vector, matrix, "marginal")
    return vector


def marginal(matrix: StochasticMatrix, x: int, m: int) -> ProbDist:
    """Law of X_m for the chain started at x."""
    return ProbDist.from_dense(marginal_vector(matrix, x, m))


def tv_distance(a: ProbDist, b: ProbDist) -> float:
    left, right = a.as_dict(), b.as_dict()
    return math.fsum(
        abs(left.get(s, 0.0) - right.get(s, 0.0)) for s in left.keys() | right.keys()
    )


def weighted_tv_distance(a: ProbDist, b: ProbDist, w: WeightFunction) -> float:
    left, right = a.as_dict(), b.as_dict()
    return math.fsum(
        w(s) * abs(left.get(s, 0.0) - right.get(s, 0.0))
        for s in left.keys() | right.keys()
    )


def tv_between_vectors(u: np.ndarray, v: np.ndarray) -> float:
    """Plain total variation between two dense vectors of equal length."""
    return float(np.abs(u - v).sum())


def stationarity_residual(pi: ProbDist, matrix: StochasticMatrix) -> float:
    """||pi M - pi||_e without any renormalization."""
    vector = pi.to_dense(matrix.dimension)
    return tv_between_vectors(matrix.transposed @ vector, vector)
