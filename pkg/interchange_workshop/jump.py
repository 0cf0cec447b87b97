"""
jump.py - The Clockwork Department of the Interchange Workshop

This module houses the continuous-time layer: the embedded jump chain of a
rate matrix, uniformization, transient laws by Poisson mixtures of the
uniformized chain, unit-step skeletons, the certified all-time bound for two
generators, and integral rewards up to the exit time of a region.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Tuple

import numpy as np
from scipy import sparse
from scipy.special import gammaln

from interchange_workshop.chain_core import advance_vector
from interchange_workshop.errors import PreconditionError
from interchange_workshop.fte import DEFAULT_CAP, DEFAULT_MAX_ITERS, DEFAULT_TOL, value_iteration
from interchange_workshop.interchange import STATIONARITY_TOLERANCE, certified_uniform_bound
from interchange_workshop.specs.data_models import (
    JumpChain,
    ProbDist,
    RateMatrix,
    RewardSpec,
    StochasticMatrix,
    UniformBoundReport,
)

logger = logging.getLogger(__name__)

DEFAULT_EPS = 1e-12


def embedded_chain(generator: RateMatrix) -> JumpChain:
    """Holding rates lambda(x) = -Q(x, x) and jump matrix R = Q / lambda off the diagonal.

    States with lambda(x) = 0 jump to themselves so R stays stochastic.
    """
    rates = generator.holding_rates.copy()
    coo = generator.csr.tocoo()
    off_diagonal = coo.row != coo.col
    rows, cols, data = coo.row[off_diagonal], coo.col[off_diagonal], coo.data[off_diagonal]
    moving = rates[rows] > 0.0
    absorbing = np.flatnonzero(rates == 0.0)
    jump = sparse.csr_matrix(
        (
            np.concatenate([data[moving] / rates[rows[moving]], np.ones(len(absorbing))]),
            (np.concatenate([rows[moving], absorbing]), np.concatenate([cols[moving], absorbing])),
        ),
        shape=generator.csr.shape,
    )
    return JumpChain(holding_rates=tuple(rates.tolist()), jump_matrix=StochasticMatrix(csr=jump))


def reconstruct_generator(chain: JumpChain) -> RateMatrix:
    rates = np.array(chain.holding_rates)
    moves = (sparse.diags(rates) @ chain.jump_matrix.csr).tolil()
    moves.setdiag(-rates)
    return RateMatrix(csr=moves.tocsr())


def uniformize(generator: RateMatrix) -> Tuple[StochasticMatrix, float]:
    """P = I + Q / Lambda with Lambda = max_x lambda(x); Lambda = 0 gives P = I."""
    rate = generator.max_rate
    if rate == 0.0:
        return StochasticMatrix.identity(generator.dimension), 0.0
    uniformized = sparse.identity(generator.dimension, format="csr") + generator.csr / rate
    return StochasticMatrix(csr=uniformized), rate


def poisson_tail_bound(a: float, k: int) -> float:
    """Bound on P(N > k) for N ~ Poisson(a), valid when k + 2 > a."""
    if k + 2 <= a:
        return math.inf
    log_term = -a + (k + 1) * math.log(a) - float(gammaln(k + 2)) if a > 0 else -math.inf
    return math.exp(log_term) / (1.0 - a / (k + 2))


def _uniformized_vector(
    uniformized: StochasticMatrix, rate: float, start: np.ndarray, t: float, eps: float
) -> np.ndarray:
    a = rate * t
    if a == 0.0:
        return start.copy()
    log_a = math.log(a)
    vector = start
    total = math.exp(-a) * start
    k = 0
    while poisson_tail_bound(a, k) >= eps:
        k += 1
        vector = advance_vector(vector, uniformized, "transient")
        weight = math.exp(-a + k * log_a - float(gammaln(k + 1)))
        total = total + weight * vector
    deficit = 1.0 - float(total.sum())
    if deficit >= eps:
        logger.warning(f"transient: Poisson mass deficit {deficit:.3e} exceeds eps={eps:.1e}")
    return total / total.sum()


def _check_time(t: float, eps: float) -> None:
    if not t >= 0.0:
        raise PreconditionError(f"time must be >= 0, got {t}", "transient")
    if not eps > 0.0:
        raise PreconditionError(f"eps must be positive, got {eps}", "transient")


def transient_from(
    generator: RateMatrix, initial: ProbDist, t: float, eps: float = DEFAULT_EPS
) -> ProbDist:
    """Law of X(t) for X(0) ~ initial, by uniformization."""
    _check_time(t, eps)
    uniformized, rate = uniformize(generator)
    start = initial.to_dense(generator.dimension)
    return ProbDist.from_dense(
        _uniformized_vector(uniformized, rate, start, t, eps), renormalize=True
    )


def transient(generator: RateMatrix, x: int, t: float, eps: float = DEFAULT_EPS) -> ProbDist:
    """e^{Qt} started from x; the truncated Poisson tail is below eps."""
    generator.check_state(x, "transient")
    return transient_from(generator, ProbDist.point_mass(x), t, eps)


def skeleton_matrix(
    generator: RateMatrix, step: float = 1.0, eps: float = DEFAULT_EPS, threads: int = 1
) -> StochasticMatrix:
    """The step-h skeleton e^{Qh}, one transient law per row."""
    _check_time(step, eps)
    uniformized, rate = uniformize(generator)
    dimension = generator.dimension

    def row(x: int) -> np.ndarray:
        start = np.zeros(dimension)
        start[x] = 1.0
        return _uniformized_vector(uniformized, rate, start, step, eps)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(row, range(dimension)))
    else:
        rows = [row(x) for x in range(dimension)]
    return StochasticMatrix(csr=sparse.csr_matrix(np.vstack(rows)))


def extend_generator(generator: RateMatrix, dimension: int, z: int = 0) -> RateMatrix:
    """Pad a generator to `dimension` states; each added state jumps to z at rate 1."""
    n = generator.dimension
    if dimension < n or not 0 <= z < n:
        raise PreconditionError(
            f"cannot extend an N={n} generator to {dimension} states through z={z}", "extend_generator"
        )
    if dimension == n:
        return generator
    added = np.arange(n, dimension)
    padding = sparse.csr_matrix(
        (
            np.concatenate([np.ones(len(added)), -np.ones(len(added))]),
            (np.concatenate([added - n, added - n]), np.concatenate([np.full(len(added), z), added])),
        ),
        shape=(len(added), dimension),
    )
    top = sparse.hstack([generator.csr, sparse.csr_matrix((n, dimension - n))])
    return RateMatrix(csr=sparse.vstack([top, padding], format="csr"))


def generator_residual(pi: ProbDist, generator: RateMatrix) -> float:
    """max_y |sum_x pi(x) Q(x, y)|."""
    return float(np.max(np.abs(generator.transposed @ pi.to_dense(generator.dimension))))


def ctmc_certified_uniform_bound(
    q_a: RateMatrix,
    q_ref: RateMatrix,
    pi_a: ProbDist,
    pi_ref: ProbDist,
    x: int,
    t: int,
    eps: float = DEFAULT_EPS,
    step: float = 1.0,
    threads: int = 1,
) -> UniformBoundReport:
    """Certified bound for the two transient laws, through their step skeletons.

    The skeleton construction costs up to 4 * eps * N in total variation,
    reported as skeleton_slack next to the total.
    """
    for label, pi, generator in (("pi_a", pi_a, q_a), ("pi_ref", pi_ref, q_ref)):
        residual = generator_residual(pi, generator)
        if not residual < STATIONARITY_TOLERANCE:
            raise PreconditionError(
                f"{label} is not stationary: max |pi Q| = {residual:.3e}",
                "ctmc_certified_uniform_bound",
            )
    skeleton_a = skeleton_matrix(q_a, step, eps, threads)
    skeleton_ref = skeleton_matrix(q_ref, step, eps, threads)
    report = certified_uniform_bound(skeleton_a, skeleton_ref, pi_a, pi_ref, x, t)
    return UniformBoundReport.from_terms(
        horizon=report.horizon,
        transient=report.term_transient,
        stationary=report.term_stationary,
        mixing=report.term_mixing,
        skeleton_slack=4.0 * eps * q_a.dimension,
    )


def _transformed_system(
    generator: RateMatrix, spec: RewardSpec
) -> Tuple[np.ndarray, sparse.csr_matrix, np.ndarray, np.ndarray]:
    """Embedded-chain FTE data: reward r / (lambda + alpha) and step
    lambda / (lambda + alpha) * R on C; zero reward off C."""
    dimension = generator.dimension
    chain = embedded_chain(generator)
    rates = np.array(chain.holding_rates)
    reward = spec.reward_vector(dimension)
    alpha = spec.discount_vector(dimension)
    inside = np.flatnonzero(spec.continue_mask(dimension))

    exit_rate = rates + alpha
    moving = exit_rate > 0.0
    safe = np.where(moving, exit_rate, 1.0)
    step_scale = np.where(moving, rates / safe, 0.0)
    transformed_reward = np.where(moving, reward / safe, 0.0)
    h = (sparse.diags(step_scale) @ chain.jump_matrix.csr).tocsr()[inside][:, inside].tocsr()
    h.eliminate_zeros()
    frozen_with_reward = (~moving & (reward > 0.0))[inside]
    return inside, h, transformed_reward[inside], frozen_with_reward


def ctmc_fte(
    generator: RateMatrix,
    spec: RewardSpec,
    x: int,
    tol: float = DEFAULT_TOL,
    cap: float = DEFAULT_CAP,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> float:
    """E_x integral_0^T exp(-integral_0^s alpha(X(u)) du) r(X(s)) ds, T the exit time of C.

    A state of C that never moves and never discounts (lambda + alpha = 0)
    with r > 0 accumulates reward forever and is reported as +inf.
    """
    generator.check_state(x, "ctmc_fte")
    if x not in spec.continue_region:
        raise PreconditionError(f"start state {x} is not in the continue region", "ctmc_fte")
    inside, h, b, frozen = _transformed_system(generator, spec)
    u, _ = value_iteration(h, b, tol, cap, max_iters, "ctmc_fte", infinite=frozen)
    return float(u[int(np.searchsorted(inside, x))])


def simulate_ctmc_fte(
    generator: RateMatrix,
    spec: RewardSpec,
    x: int,
    samples: int,
    seed: int,
    max_jumps: int = 1_000_000,
) -> Tuple[float, float]:
    """Monte-Carlo estimate (mean, standard error) of the ctmc_fte functional.

    Paths are advanced jump by jump, all samples at once; holding times are
    exponential and the next state is drawn from the jump matrix.
    """
    generator.check_state(x, "simulate_ctmc_fte")
    dimension = generator.dimension
    chain = embedded_chain(generator)
    rates = np.array(chain.holding_rates)
    reward = spec.reward_vector(dimension)
    alpha = spec.discount_vector(dimension)
    inside = spec.continue_mask(dimension)
    cumulative = np.cumsum(chain.jump_matrix.to_dense(), axis=1)
    rng = np.random.default_rng(np.random.SeedSequence(seed))

    state = np.full(samples, x)
    total = np.zeros(samples)
    survival = np.ones(samples)
    alive = np.full(samples, bool(inside[x]))
    for _ in range(max_jumps):
        if not alive.any():
            break
        idx = np.flatnonzero(alive)
        here = state[idx]
        rate, disc, gain = rates[here], alpha[here], reward[here]

        frozen = rate == 0.0
        hold = np.full(len(idx), np.inf)
        hold[~frozen] = rng.exponential(1.0 / rate[~frozen])
        with np.errstate(divide="ignore", invalid="ignore"):
            integral = np.where(
                disc > 0.0,
                gain * (1.0 - np.exp(-disc * hold)) / np.where(disc > 0.0, disc, 1.0),
                np.where(gain > 0.0, gain * hold, 0.0),
            )
        total[idx] += survival[idx] * integral
        survival[idx] *= np.exp(-disc * np.where(np.isfinite(hold), hold, 0.0))

        uniforms = rng.random(len(idx))
        following = (cumulative[here] < uniforms[:, None]).sum(axis=1)
        following = np.minimum(following, dimension - 1)
        state[idx] = following
        alive[idx] = ~frozen & inside[following]
    if alive.any():
        raise PreconditionError(
            f"paths still inside C after {max_jumps} jumps", "simulate_ctmc_fte"
        )
    mean = float(total.mean())
    stderr = float(total.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return mean, stderr
