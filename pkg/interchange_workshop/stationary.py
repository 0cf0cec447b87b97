"""
stationary.py - The Equilibrium Desk of the Interchange Workshop

This module houses the stationary-distribution solvers:

    gth              -- Grassmann-Taksar-Heyman elimination, the authoritative
                        solver (no subtractions, stable on nearly uncoupled
                        truncations).
    power_iteration  -- marginal iteration, plain or Cesaro-averaged; a
                        cross-check only.
    ctmc_stationary  -- gth applied to the uniformized generator.
"""

import logging
from typing import List

import numpy as np
from scipy.sparse import csgraph

from interchange_workshop.chain_core import (
    advance_vector,
    delta_vector,
    tv_between_vectors,
)
from interchange_workshop.errors import (
    DegenerateGeneratorError,
    NonConvergenceError,
    PreconditionError,
    StructureError,
)
from interchange_workshop.specs.data_models import (
    PowerIterationResult,
    ProbDist,
    RateMatrix,
    StochasticMatrix,
)

logger = logging.getLogger(__name__)


def closed_classes(matrix: StochasticMatrix) -> List[np.ndarray]:
    """Closed communicating classes, each as a sorted array of states."""
    count, labels = csgraph.connected_components(
        matrix.csr, directed=True, connection="strong"
    )
    coo = matrix.csr.tocoo()
    leaking = np.zeros(count, dtype=bool)
    crossing = labels[coo.row] != labels[coo.col]
    leaking[labels[coo.row[crossing]]] = True
    return [np.flatnonzero(labels == c) for c in range(count) if not leaking[c]]


def _gth_dense(block: np.ndarray) -> np.ndarray:
    """GTH on an irreducible dense stochastic block.

    Only the nonzero parts of the pivot row and column are touched, so banded
    truncations cost O(K^2) instead of O(K^3).
    """
    work = block.copy()
    size = work.shape[0]
    for k in range(size - 1, 0, -1):
        pivot = work[k, :k].sum()
        if not pivot > 0.0:
            raise StructureError(
                f"elimination pivot {pivot!r} at state {k} is not positive", "gth"
            )
        column = np.flatnonzero(work[:k, k])
        row = np.flatnonzero(work[k, :k])
        work[column, k] /= pivot
        work[np.ix_(column, row)] += np.outer(work[column, k], work[k, row])

    pi = np.zeros(size)
    pi[0] = 1.0
    for k in range(1, size):
        pi[k] = pi[:k] @ work[:k, k]
    return pi / pi.sum()


def gth(matrix: StochasticMatrix) -> ProbDist:
    """Stationary distribution of a chain with exactly one closed class."""
    classes = closed_classes(matrix)
    if len(classes) != 1:
        raise StructureError(
            f"expected exactly one closed communicating class, found {len(classes)}",
            "gth",
        )
    states = classes[0]
    block = matrix.csr[states][:, states].toarray()
    pi = np.zeros(matrix.dimension)
    pi[states] = _gth_dense(block)
    if len(states) < matrix.dimension:
        logger.debug(
            f"gth: {matrix.dimension - len(states)} transient state(s) receive mass 0"
        )
    return ProbDist.from_dense(pi)


def power_iteration(
    matrix: StochasticMatrix,
    x0: int,
    tol: float = 1e-10,
    max_steps: int = 100000,
    cesaro: bool = False,
) -> PowerIterationResult:
    """Iterate marginals from x0 until successive iterates are within tol.

    In plain mode `steps` is the index m of the first marginal whose successor
    lies within tol, and the successor is returned. In Cesaro mode the running
    averages a_m = (1/m) sum_{j<m} P^j(x0, .) are only formed at dyadic
    checkpoints m = 2^k, and the stop test is TV(a_{2^k}, a_{2^(k-1)}) < tol,
    not a comparison of consecutive steps. `steps` is then the checkpoint
    2^k, and the error of a_m is of the order of that last gap.
    """
    if not tol > 0:
        raise PreconditionError(f"tol must be positive, got {tol}", "power_iteration")
    vector = delta_vector(matrix, x0, "power_iteration")
    gap = float("inf")

    if not cesaro:
        for step in range(max_steps):
            following = advance_vector(vector, matrix, "power_iteration")
            gap = tv_between_vectors(following, vector)
            vector = following
            if gap < tol:
                return PowerIterationResult(
                    distribution=ProbDist.from_dense(vector, renormalize=True),
                    steps=step,
                    last_gap=gap,
                )
    else:
        running_sum = np.zeros(matrix.dimension)
        previous_average = None
        checkpoint = 2
        for step in range(1, max_steps + 1):
            running_sum += vector
            vector = advance_vector(vector, matrix, "power_iteration")
            if step == checkpoint:
                average = running_sum / step
                if previous_average is not None:
                    gap = tv_between_vectors(average, previous_average)
                    if gap < tol:
                        return PowerIterationResult(
                            distribution=ProbDist.from_dense(average, renormalize=True),
                            steps=step,
                            last_gap=gap,
                        )
                previous_average = average
                checkpoint *= 2
        if previous_average is not None:
            vector = previous_average

    logger.error(f"power_iteration did not settle within {max_steps} steps (gap {gap:.3e})")
    raise NonConvergenceError(
        f"no convergence to tol={tol} within {max_steps} steps",
        "power_iteration",
        last_iterate=ProbDist.from_dense(vector, renormalize=True),
        last_gap=gap,
    )


def ctmc_stationary(generator: RateMatrix) -> ProbDist:
    """Solve pi Q = 0 through gth on P = I + Q / Lambda."""
    from interchange_workshop.jump import uniformize

    if generator.dimension == 1:
        return ProbDist.point_mass(0)
    uniformized, rate = uniformize(generator)
    if rate == 0.0:
        raise DegenerateGeneratorError(
            "every state is absorbing; the stationary law is not unique",
            "ctmc_stationary",
        )
    return gth(uniformized)
