"""
fte.py - The Accounting Office of the Interchange Workshop

This module houses first-transition expectations

    u(x) = E_x sum_{j=0}^{T} exp(-sum_{k<j} alpha(X_k)) r(X_j),
    T = first entrance time to the complement of the continue region C,

computed as the minimal non-negative solution of the first-transition system
u = r + G u on C (u = r off C, G(x, y) = exp(-alpha(x)) P(x, y)). Three
solvers are offered: value iteration from zero (always minimal, detects
divergence), a direct sparse solve (only when the system is provably
well-posed), and the regenerative ratio over returns to a fixed state.
"""

import logging
import math
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

from interchange_workshop.errors import (
    IllPosedError,
    IndeterminateError,
    InternalConsistencyError,
    NonConvergenceError,
    PreconditionError,
)
from interchange_workshop.specs.data_models import (
    FteMethod,
    FteSolution,
    ProbDist,
    RewardSpec,
    StochasticMatrix,
    WeightFunction,
)

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-12
DEFAULT_CAP = 1e12
DEFAULT_MAX_ITERS = 10_000_000
PROGRESS_CHECK_INTERVAL = 10_000
STALL_RATIO = 1.0 - 1e-12
ILL_POSED_MARGIN = 1e-8
NEGATIVE_SLACK = 1e-9
MAX_RADIUS_STEPS = 100_000


# --- System assembly ------------------------------------------------------------


def _discounted_matrix(matrix: StochasticMatrix, alpha: np.ndarray) -> sparse.csr_matrix:
    g = (sparse.diags(np.exp(-alpha)) @ matrix.csr).tocsr()
    g.eliminate_zeros()
    return g


def _restricted_system(
    g: sparse.csr_matrix, reward: np.ndarray, inside: np.ndarray
) -> Tuple[sparse.csr_matrix, np.ndarray]:
    """H = G restricted to C and b = r_C + G_{C, C^c} r_{C^c}."""
    outside = np.setdiff1d(np.arange(g.shape[0]), inside)
    rows = g[inside]
    h = rows[:, inside].tocsr()
    h.eliminate_zeros()
    b = reward[inside] + rows[:, outside] @ reward[outside]
    return h, b


def _assemble(
    matrix: StochasticMatrix, spec: RewardSpec
) -> Tuple[np.ndarray, np.ndarray, sparse.csr_matrix, sparse.csr_matrix, np.ndarray]:
    dimension = matrix.dimension
    reward = spec.reward_vector(dimension)
    inside = np.flatnonzero(spec.continue_mask(dimension))
    g = _discounted_matrix(matrix, spec.discount_vector(dimension))
    h, b = _restricted_system(g, reward, inside)
    return reward, inside, g, h, b


def _full_values(reward: np.ndarray, inside: np.ndarray, u_inside: np.ndarray) -> np.ndarray:
    values = reward.copy()
    values[inside] = u_inside
    return values


# --- Value iteration ----------------------------------------------------------------


def _close_infinite(h: sparse.csr_matrix, infinite: np.ndarray) -> np.ndarray:
    """Every state that steps into an infinite state with positive weight is infinite."""
    while True:
        grown = infinite | ((h @ infinite.astype(float)) > 0.0)
        if grown.sum() == infinite.sum():
            return grown
        infinite = grown


def _stalled(
    u: np.ndarray,
    delta: np.ndarray,
    previous: np.ndarray,
    infinite: np.ndarray,
    floor: float,
    cap: float,
) -> np.ndarray:
    """Coordinates whose increments do not shrink geometrically, or whose
    projected limit exceeds cap."""
    active = ~infinite & (delta > floor) & (previous > 0.0)
    ratio = np.zeros_like(u)
    ratio[active] = (delta[active] / previous[active]) ** (1.0 / PROGRESS_CHECK_INTERVAL)
    stalled = active & (ratio >= STALL_RATIO)
    projecting = active & ~stalled
    projected = u[projecting] + delta[projecting] * ratio[projecting] / (1.0 - ratio[projecting])
    stalled[np.flatnonzero(projecting)[projected > cap]] = True
    return stalled


def value_iteration(
    h: sparse.csr_matrix,
    b: np.ndarray,
    tol: float,
    cap: float,
    max_iters: int,
    operation: str,
    infinite: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, int]:
    """Iterate u <- b + H u from u = 0; returns (u, iterations), inf marks divergence."""
    size = len(b)
    u = np.zeros(size)
    infinite = np.zeros(size, dtype=bool) if infinite is None else infinite.copy()
    if infinite.any():
        infinite = _close_infinite(h, infinite)
        u[infinite] = np.inf
    if size == 0 or infinite.all():
        return u, 0

    previous_delta: Optional[np.ndarray] = None
    change = float("inf")
    for iteration in range(1, max_iters + 1):
        finite = ~infinite
        new = b + h @ np.where(finite, u, 0.0)
        new[infinite] = np.inf
        scale = max(1.0, float(np.max(new[finite], initial=0.0)))
        slack = 1e-12 * scale
        if np.any(new[finite] < u[finite] - slack):
            worst = float(np.max(u[finite] - new[finite]))
            raise InternalConsistencyError(
                f"value iteration decreased by {worst:.3e} at iteration {iteration}",
                operation,
            )
        new[finite] = np.maximum(new[finite], u[finite])
        delta = np.where(finite, new - u, 0.0)
        u = new

        diverging = finite & (u > cap)
        if iteration % PROGRESS_CHECK_INTERVAL == 0:
            if previous_delta is not None:
                diverging |= _stalled(u, delta, previous_delta, infinite, tol * scale, cap)
            previous_delta = delta
        if diverging.any():
            infinite = _close_infinite(h, infinite | diverging)
            u[infinite] = np.inf
            previous_delta = None
            logger.info(f"{operation}: {int(infinite.sum())} coordinate(s) diverge to +inf")
            if infinite.all():
                return u, iteration
            continue

        change = float(np.max(delta, initial=0.0))
        if change < tol * scale:
            return u, iteration

    logger.error(f"{operation}: no convergence after {max_iters} iterations (change {change:.3e})")
    raise NonConvergenceError(
        f"value iteration did not converge within {max_iters} iterations",
        operation,
        last_iterate=u,
        last_gap=change,
    )


def _residual(g: sparse.csr_matrix, values: np.ndarray, reward: np.ndarray, inside: np.ndarray) -> float:
    """max |u(x) - r(x) - sum_y G(x, y) u(y)| over finite x in C whose row sees only finite u."""
    if len(inside) == 0:
        return 0.0
    finite = np.isfinite(values)
    rows = g[inside]
    touches_infinite = (rows @ (~finite).astype(float)) > 0.0
    usable = finite[inside] & ~touches_infinite
    if not usable.any():
        return 0.0
    expected = reward[inside] + rows @ np.where(finite, values, 0.0)
    return float(np.max(np.abs(values[inside] - expected)[usable]))


def minimal_solution(
    matrix: StochasticMatrix,
    spec: RewardSpec,
    tol: float = DEFAULT_TOL,
    cap: float = DEFAULT_CAP,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> FteSolution:
    """Minimal non-negative solution by value iteration from zero.

    Stops when the largest increment falls below tol (relative to the largest
    finite value once it exceeds 1). Coordinates that pass cap, or whose
    increments stop shrinking, are reported as +inf.
    """
    if not tol > 0 or not cap > 0:
        raise PreconditionError("tol and cap must be positive", "minimal_solution")
    reward, inside, g, h, b = _assemble(matrix, spec)
    u_inside, iterations = value_iteration(h, b, tol, cap, max_iters, "minimal_solution")
    values = _full_values(reward, inside, u_inside)
    return FteSolution(
        values=tuple(values.tolist()),
        method=FteMethod.VALUE_ITERATION,
        iterations=iterations,
        residual=_residual(g, values, reward, inside),
    )


# --- Direct solve ----------------------------------------------------------------


def spectral_radius_bound(h: sparse.csr_matrix, target: float = 1.0 - ILL_POSED_MARGIN) -> float:
    """Upper bound min_k max(H^k 1)^(1/k) on the spectral radius of H >= 0.

    Stops as soon as the bound drops below target.
    """
    if h.shape[0] == 0:
        return 0.0
    vector = np.ones(h.shape[0])
    best = float("inf")
    for k in range(1, MAX_RADIUS_STEPS + 1):
        vector = h @ vector
        peak = float(vector.max())
        if peak <= 0.0:
            return 0.0
        best = min(best, peak ** (1.0 / k))
        if best < target:
            break
    return best


def linear_solve_fte(matrix: StochasticMatrix, spec: RewardSpec) -> FteSolution:
    """Direct sparse solve of (I - G_CC) u_C = r_C + G_{C, C^c} r_{C^c}."""
    reward, inside, g, h, b = _assemble(matrix, spec)
    radius = spectral_radius_bound(h)
    if radius >= 1.0 - ILL_POSED_MARGIN:
        logger.warning(f"linear_solve_fte: spectral radius bound {radius!r} too close to 1")
        raise IllPosedError(
            f"spectral radius estimate {radius!r} >= 1 - {ILL_POSED_MARGIN}; "
            "use value iteration",
            "linear_solve_fte",
        )
    if len(inside):
        system = (sparse.identity(len(inside), format="csc") - h.tocsc()).tocsc()
        u_inside = np.atleast_1d(sparse_linalg.spsolve(system, b))
    else:
        u_inside = np.zeros(0)
    floor = -NEGATIVE_SLACK * max(1.0, float(np.abs(u_inside).max(initial=0.0)))
    if u_inside.size and u_inside.min() < floor:
        logger.error(f"linear_solve_fte: solve returned {u_inside.min()!r} below {floor!r}")
        raise InternalConsistencyError(
            f"direct solve gave a negative value {u_inside.min()!r}", "linear_solve_fte"
        )
    # round-off only
    values = _full_values(reward, inside, np.maximum(u_inside, 0.0))
    return FteSolution(
        values=tuple(values.tolist()),
        method=FteMethod.LINEAR_SOLVE,
        residual=_residual(g, values, reward, inside),
    )


# --- Regenerative ratio ------------------------------------------------------------


def split_at(matrix: StochasticMatrix, x: int) -> StochasticMatrix:
    """Copy of the chain with one extra absorbing state N that receives every
    transition into x; started at x, hitting N is the first return to x."""
    dimension = matrix.dimension
    coo = matrix.csr.tocoo()
    columns = np.where(coo.col == x, dimension, coo.col)
    rows = np.append(coo.row, dimension)
    columns = np.append(columns, dimension)
    data = np.append(coo.data, 1.0)
    return StochasticMatrix(
        csr=sparse.csr_matrix((data, (rows, columns)), shape=(dimension + 1, dimension + 1))
    )


def _split_spec(spec: RewardSpec, reward_fn: Callable[[int], float], returned: int) -> RewardSpec:
    return RewardSpec(
        continue_region=spec.continue_region,
        reward=lambda y: 0.0 if y == returned else reward_fn(y),
        discount_rate=lambda y: 0.0 if y == returned else spec.discount_rate(y),
    )


def _ratio(numerator: float, denominator: float, operation: str) -> float:
    if math.isinf(numerator):
        return math.inf
    if denominator == 0.0:
        if numerator > 0.0:
            return math.inf
        raise IndeterminateError("cycle reward and exit probability are both 0", operation)
    return numerator / denominator


def regenerative_ratio(
    matrix: StochasticMatrix,
    spec: RewardSpec,
    x: int,
    tol: float = DEFAULT_TOL,
    cap: float = DEFAULT_CAP,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> float:
    """u(x) = (reward over one excursion from x) / (1 - discounted return probability).

    Both quantities are FTEs of the chain split at x, whose stopping set is
    the complement of C plus the absorbing return copy of x. A denominator
    within 10 * tol of zero counts as zero.
    """
    matrix.check_state(x, "regenerative_ratio")
    if x not in spec.continue_region:
        raise PreconditionError(f"start state {x} is not in the continue region", "regenerative_ratio")
    returned = matrix.dimension
    split = split_at(matrix, x)

    cycle = minimal_solution(split, _split_spec(spec, spec.reward, returned), tol, cap, max_iters)
    back = minimal_solution(
        split,
        RewardSpec(
            continue_region=spec.continue_region,
            reward=lambda y: 1.0 if y == returned else 0.0,
            discount_rate=lambda y: 0.0 if y == returned else spec.discount_rate(y),
        ),
        tol,
        cap,
        max_iters,
    )
    numerator = cycle.value(x)
    denominator = 1.0 - back.value(x)
    if denominator <= 10.0 * tol:
        denominator = 0.0
    logger.debug(f"regenerative_ratio at {x}: numerator {numerator!r}, denominator {denominator!r}")
    return _ratio(numerator, denominator, "regenerative_ratio")


# --- Convenience wrappers -----------------------------------------------------------


def mean_hitting_time(
    matrix: StochasticMatrix,
    target_set: Sequence[int],
    x: int,
    tol: float = DEFAULT_TOL,
    cap: float = DEFAULT_CAP,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> float:
    """E_x T for T the hitting time of target_set.

    Uses r = 1 on C, so the hit state itself is not counted; with r = 1
    everywhere the same system returns E_x T + 1.
    """
    matrix.check_state(x, "mean_hitting_time")
    targets = {matrix.check_state(y, "mean_hitting_time") for y in target_set}
    region = frozenset(range(matrix.dimension)) - targets
    spec = RewardSpec(
        continue_region=region, reward=lambda y: 1.0 if y in region else 0.0
    )
    return minimal_solution(matrix, spec, tol, cap, max_iters).value(x)


RewardLike = Union[Callable[[int], float], Sequence[float]]


def _as_reward_fn(reward: RewardLike) -> Callable[[int], float]:
    if callable(reward):
        return reward
    values = list(reward)
    return lambda y: float(values[y])


def discounted_reward(
    matrix: StochasticMatrix,
    alpha0: float,
    reward: RewardLike,
    x: int,
    tol: float = DEFAULT_TOL,
    cap: float = DEFAULT_CAP,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> float:
    """E_x sum_j exp(-alpha0 j) r(X_j) over an infinite horizon."""
    if not alpha0 > 0:
        raise PreconditionError(f"discount rate must be positive, got {alpha0}", "discounted_reward")
    matrix.check_state(x, "discounted_reward")
    spec = RewardSpec(
        continue_region=frozenset(range(matrix.dimension)),
        reward=_as_reward_fn(reward),
        discount_rate=lambda y: alpha0,
    )
    return minimal_solution(matrix, spec, tol, cap, max_iters).value(x)


def stationary_weighted_mean(pi: ProbDist, w: WeightFunction) -> float:
    return math.fsum(mass * w(state) for state, mass in pi.pairs())


def regenerative_stationary_mean(
    matrix: StochasticMatrix,
    w: WeightFunction,
    x: int,
    tol: float = DEFAULT_TOL,
    cap: float = DEFAULT_CAP,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> float:
    """sum_y pi(y) w(y) as E_x[sum_{j < tau} w(X_j)] / E_x tau, tau the return time to x."""
    matrix.check_state(x, "regenerative_stationary_mean")
    returned = matrix.dimension
    split = split_at(matrix, x)
    region = frozenset(range(returned))
    cycle = minimal_solution(
        split,
        RewardSpec(continue_region=region, reward=lambda y: 0.0 if y == returned else w(y)),
        tol,
        cap,
        max_iters,
    ).value(x)
    length = minimal_solution(
        split,
        RewardSpec(continue_region=region, reward=lambda y: 0.0 if y == returned else 1.0),
        tol,
        cap,
        max_iters,
    ).value(x)
    if not math.isfinite(length):
        raise PreconditionError(
            f"state {x} is not positive recurrent (infinite mean return time)",
            "regenerative_stationary_mean",
        )
    return cycle / length


def fte_residual(matrix: StochasticMatrix, spec: RewardSpec, solution: FteSolution) -> float:
    """Largest substitution residual of the first-transition system on C."""
    reward, inside, g, _, _ = _assemble(matrix, spec)
    return _residual(g, solution.as_array(), reward, inside)
