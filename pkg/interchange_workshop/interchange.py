"""
interchange.py - The Comparison Bench of the Interchange Workshop

This module houses the diagnostics that compare the marginals of two chains
started from the same state at every time scale: the finite-horizon sup of
total variation, the certified bound over all times built from stationary
laws, its weighted counterpart, the non-increasing distance-to-stationarity
profile, and probes along diagonal schedules m_n.
"""

import logging
import math
from typing import Callable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from interchange_workshop.chain_core import (
    advance_vector,
    delta_vector,
    marginal,
    stationarity_residual,
    tv_between_vectors,
    tv_distance,
)
from interchange_workshop.errors import (
    DimensionError,
    InternalConsistencyError,
    NonConvergenceError,
    PreconditionError,
)
from interchange_workshop.specs.data_models import (
    DiagonalProbeRow,
    ProbDist,
    StochasticMatrix,
    SupTvProfile,
    UniformBoundReport,
    WeightFunction,
)

logger = logging.getLogger(__name__)

STATIONARITY_TOLERANCE = 1e-8
MONOTONICITY_SLACK = 1e-12
DEFAULT_EPS_MIX = 1e-3
MIN_THRESHOLD_B = 64.0


def _check_pair(a: StochasticMatrix, b: StochasticMatrix, operation: str) -> None:
    if a.dimension != b.dimension:
        raise DimensionError(
            f"chains have dimensions {a.dimension} and {b.dimension}", operation
        )


def _check_stationary(
    pi: ProbDist, matrix: StochasticMatrix, label: str, operation: str
) -> None:
    residual = stationarity_residual(pi, matrix)
    if not residual < STATIONARITY_TOLERANCE:
        raise PreconditionError(
            f"{label} is not stationary: residual {residual:.3e} >= {STATIONARITY_TOLERANCE}",
            operation,
        )


def sup_tv_horizon(
    a: StochasticMatrix, b: StochasticMatrix, x: int, horizon: int
) -> SupTvProfile:
    """max over 0 <= m <= horizon of TV between the two m-step marginals from x."""
    _check_pair(a, b, "sup_tv_horizon")
    if horizon < 0:
        raise PreconditionError(f"horizon must be >= 0, got {horizon}", "sup_tv_horizon")
    vector_a = delta_vector(a, x, "sup_tv_horizon")
    vector_b = vector_a.copy()
    profile = [0.0]
    for _ in range(horizon):
        vector_a = advance_vector(vector_a, a, "sup_tv_horizon")
        vector_b = advance_vector(vector_b, b, "sup_tv_horizon")
        profile.append(tv_between_vectors(vector_a, vector_b))
    argmax = int(np.argmax(profile))
    return SupTvProfile(max_tv=profile[argmax], argmax=argmax, profile=tuple(profile))


def certified_uniform_bound(
    a: StochasticMatrix,
    b_ref: StochasticMatrix,
    pi_a: ProbDist,
    pi_b: ProbDist,
    x: int,
    t: int,
) -> UniformBoundReport:
    """Bound on sup over all m >= 0 of TV(A^m(x, .), B^m(x, .)).

    For m <= t the transient term covers the distance directly. For m > t both
    marginals sit no farther from their stationary laws than at time t, and the
    triangle inequality through pi_a and pi_b gives the other two terms.
    """
    _check_pair(a, b_ref, "certified_uniform_bound")
    if t < 0:
        raise PreconditionError(f"horizon must be >= 0, got {t}", "certified_uniform_bound")
    _check_stationary(pi_a, a, "pi_a", "certified_uniform_bound")
    _check_stationary(pi_b, b_ref, "pi_b", "certified_uniform_bound")

    vector_a = delta_vector(a, x, "certified_uniform_bound")
    vector_b = vector_a.copy()
    worst = 0.0
    for _ in range(t):
        vector_a = advance_vector(vector_a, a, "certified_uniform_bound")
        vector_b = advance_vector(vector_b, b_ref, "certified_uniform_bound")
        worst = max(worst, tv_between_vectors(vector_a, vector_b))

    dense_pi_a = pi_a.to_dense(a.dimension)
    dense_pi_b = pi_b.to_dense(b_ref.dimension)
    return UniformBoundReport.from_terms(
        horizon=t,
        transient=2.0 * worst,
        stationary=2.0 * tv_between_vectors(dense_pi_a, dense_pi_b),
        mixing=2.0 * tv_between_vectors(vector_b, dense_pi_b),
    )


def monotone_tv_profile(
    matrix: StochasticMatrix, pi: ProbDist, x: int, horizon: int
) -> List[float]:
    """(TV(P^m(x, .), pi))_{m=0..horizon}; non-increasing for stationary pi."""
    _check_stationary(pi, matrix, "pi", "monotone_tv_profile")
    dense_pi = pi.to_dense(matrix.dimension)
    vector = delta_vector(matrix, x, "monotone_tv_profile")
    profile = [tv_between_vectors(vector, dense_pi)]
    for m in range(1, horizon + 1):
        vector = advance_vector(vector, matrix, "monotone_tv_profile")
        profile.append(tv_between_vectors(vector, dense_pi))
        if profile[m] > profile[m - 1] + MONOTONICITY_SLACK:
            logger.error(
                f"TV to stationarity rose from {profile[m - 1]!r} to {profile[m]!r} at m={m}"
            )
            raise InternalConsistencyError(
                f"distance to stationarity increased at m={m}", "monotone_tv_profile"
            )
    return profile


def weighted_tail(pi: ProbDist, w: WeightFunction, b: float) -> float:
    """sum_y w(y) pi(y) 1{w(y) > b}."""
    return math.fsum(w(y) * mass for y, mass in pi.pairs() if w(y) > b)


def _weighted_tail_term(
    pi_a: ProbDist, pi_b: ProbDist, x: int, w: WeightFunction, b: float
) -> float:
    anchor = min(pi_a.mass(x), pi_b.mass(x))
    return 2.0 * max(weighted_tail(pi_a, w, b), weighted_tail(pi_b, w, b)) / anchor


def weighted_uniform_bound(
    a: StochasticMatrix,
    b_ref: StochasticMatrix,
    pi_a: ProbDist,
    pi_b: ProbDist,
    x: int,
    t: int,
    w: WeightFunction,
    b: float,
    report: Optional[UniformBoundReport] = None,
) -> float:
    """Bound on sup_m sum_y w(y)|A^m(x, y) - B^m(x, y)|.

    Below the threshold b the weighted distance is at most b times the plain
    one; above it the stationary tails, inflated by 1/pi(x), dominate the
    marginals. A precomputed certified report for the same pair may be passed.
    """
    if not b >= 1.0:
        raise PreconditionError(f"threshold b must be >= 1, got {b}", "weighted_uniform_bound")
    if pi_a.mass(x) <= 0.0 or pi_b.mass(x) <= 0.0:
        raise PreconditionError(
            f"start state {x} has zero stationary mass", "weighted_uniform_bound"
        )
    if report is None:
        report = certified_uniform_bound(a, b_ref, pi_a, pi_b, x, t)
    return b * report.total + _weighted_tail_term(pi_a, pi_b, x, w, b)


def auto_threshold_b(
    total: float,
    pi_a: ProbDist,
    pi_b: ProbDist,
    x: int,
    w: WeightFunction,
    max_doublings: int = 200,
) -> float:
    """max(64, smallest power of two whose tail term is below total / 10)."""
    if pi_a.mass(x) <= 0.0 or pi_b.mass(x) <= 0.0:
        raise PreconditionError(f"start state {x} has zero stationary mass", "auto_threshold_b")
    b = 1.0
    for _ in range(max_doublings):
        tail = _weighted_tail_term(pi_a, pi_b, x, w, b)
        if tail == 0.0 or tail < total / 10.0:
            return max(MIN_THRESHOLD_B, b)
        b *= 2.0
    return max(MIN_THRESHOLD_B, b)


def auto_mixing_horizon(
    matrix: StochasticMatrix,
    pi: ProbDist,
    x: int,
    eps_mix: float = DEFAULT_EPS_MIX,
    max_steps: int = 100000,
) -> int:
    """First m with TV(P^m(x, .), pi) < eps_mix."""
    dense_pi = pi.to_dense(matrix.dimension)
    vector = delta_vector(matrix, x, "auto_mixing_horizon")
    for m in range(max_steps + 1):
        gap = tv_between_vectors(vector, dense_pi)
        if gap < eps_mix:
            return m
        vector = advance_vector(vector, matrix, "auto_mixing_horizon")
    raise NonConvergenceError(
        f"TV to stationarity still {gap:.3e} after {max_steps} steps",
        "auto_mixing_horizon",
        last_iterate=ProbDist.from_dense(vector, renormalize=True),
        last_gap=gap,
    )


Schedule = Union[Callable[[int], int], Mapping[int, int]]


def diagonal_probe(
    family: Union[Mapping[int, StochasticMatrix], Sequence[Tuple[int, StochasticMatrix]]],
    schedule: Schedule,
    x: int,
    target: ProbDist,
) -> List[DiagonalProbeRow]:
    """TV(P_n^{m_n}(x, .), target) along a schedule m_n, in increasing n."""
    members = sorted(family.items() if isinstance(family, Mapping) else family, key=lambda p: p[0])
    steps = [
        int(schedule[n]) if isinstance(schedule, Mapping) else int(schedule(n))
        for n, _ in members
    ]
    if any(later < earlier for earlier, later in zip(steps, steps[1:])):
        raise PreconditionError("schedule m_n must be non-decreasing", "diagonal_probe")
    if len(steps) > 1 and steps[-1] == steps[0]:
        raise PreconditionError(
            "schedule m_n is constant over the supplied n; it must grow without bound",
            "diagonal_probe",
        )
    rows = []
    for (n, matrix), m_n in zip(members, steps):
        matrix.check_state(x, "diagonal_probe")
        tv = tv_distance(marginal(matrix, x, m_n), target)
        logger.debug(f"diagonal probe n={n} m_n={m_n}: TV {tv:.6e}")
        rows.append(DiagonalProbeRow(n=n, m_n=m_n, tv=tv))
    return rows
