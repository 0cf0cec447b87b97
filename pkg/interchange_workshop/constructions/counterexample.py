"""
counterexample.py - The halving chain on [0, 1]

P_inf(x, .) = delta_{x/2}. The n-th perturbation P_n agrees with it above
2^-n, jumps to 1 from (2^-n-1, 2^-n], and restarts uniformly on the dyadic
points {2^-j : 0 <= j <= n} from [0, 2^-n-1]. P_n converges to P_inf and pi_n
converges to delta_0 weakly, yet from any x the chain P_n sits at 1 at a time
that grows with n, so the marginals never approach each other uniformly in time.

Everything here is exact: atoms are dyadic multiples of x and powers of two,
built with math.ldexp so halving never rounds.
"""

import logging
import math
from typing import Dict, Union

from scipy import sparse

from interchange_workshop.errors import PreconditionError
from interchange_workshop.specs.data_models import (
    AtomicMeasure,
    CounterexampleReport,
    StochasticMatrix,
)

logger = logging.getLogger(__name__)

Level = Union[int, float]


def _check_level(n: Level, operation: str) -> None:
    if n != math.inf and (n < 0 or n != int(n)):
        raise PreconditionError(f"n must be a non-negative integer or inf, got {n}", operation)


def _dyadic_points(n: int):
    return [math.ldexp(1.0, -j) for j in range(n + 1)]


def counterexample_step(n: Level, x: float) -> AtomicMeasure:
    """One-step law P_n(x, .); n = math.inf gives P_inf."""
    _check_level(n, "counterexample_step")
    if not 0.0 <= x <= 1.0:
        raise PreconditionError(f"x must lie in [0, 1], got {x}", "counterexample_step")
    if n == math.inf:
        return AtomicMeasure.dirac(math.ldexp(x, -1))
    n = int(n)
    if x > math.ldexp(1.0, -n):
        return AtomicMeasure.dirac(math.ldexp(x, -1))
    if x > math.ldexp(1.0, -n - 1):
        return AtomicMeasure.dirac(1.0)
    return AtomicMeasure.uniform(_dyadic_points(n))


def counterexample_marginal(n: Level, x: float, m: int) -> AtomicMeasure:
    """Exact law of X_m from x, pushing every atom forward m times."""
    if m < 0:
        raise PreconditionError(f"m must be >= 0, got {m}", "counterexample_marginal")
    atoms: Dict[float, float] = {float(x): 1.0}
    for _ in range(m):
        following: Dict[float, float] = {}
        for location, mass in atoms.items():
            for target, share in counterexample_step(n, location).atoms:
                following[target] = following.get(target, 0.0) + mass * share
        atoms = following
    return AtomicMeasure(atoms=tuple(atoms.items()))


def hitting_step_count(n: int, x: float) -> int:
    """Halvings needed to bring x into (2^-n-1, 2^-n].

    Counted by iterating the dynamics; x already inside the interval gives 0.
    """
    _check_level(n, "hitting_step_count")
    if n == math.inf:
        raise PreconditionError("P_inf never enters the jump interval", "hitting_step_count")
    n = int(n)
    lower, upper = math.ldexp(1.0, -n - 1), math.ldexp(1.0, -n)
    if not lower < x <= 1.0:
        raise PreconditionError(
            f"x={x} must lie in (2^-{n + 1}, 1] to reach the jump interval by halving",
            "hitting_step_count",
        )
    steps = 0
    while x > upper:
        x = math.ldexp(x, -1)
        steps += 1
    return steps


def counterexample_stationary(n: int) -> AtomicMeasure:
    """pi_n: uniform over {2^-j : 0 <= j <= n}."""
    _check_level(n, "counterexample_stationary")
    if n == math.inf:
        return AtomicMeasure.dirac(0.0)
    return AtomicMeasure.uniform(_dyadic_points(int(n)))


def counterexample_report(n: int, x: float) -> CounterexampleReport:
    """Mass at 1 one step after entering the jump interval (always 1), and W1(pi_n, delta_0)."""
    m_hit = hitting_step_count(n, x)
    probe = counterexample_marginal(n, x, m_hit + 1).mass_at(1.0)
    w1 = counterexample_stationary(n).wasserstein1(AtomicMeasure.dirac(0.0))
    logger.debug(f"counterexample n={n} x={x}: m_hit={m_hit} probe={probe!r} w1={w1!r}")
    return CounterexampleReport(
        n=n, x=x, m_hit=m_hit, probe_mass_at_1=probe, w1_pi_n_to_delta0=w1
    )


def counterexample_chain(n: Level, depth: int) -> StochasticMatrix:
    """Finite analog on the points 2^-j (state j, 0 <= j <= depth) and 0 (state depth + 1).

    For finite n (n < depth) the rows follow P_n. For n = inf the points halve
    down to 2^-depth, which steps to 0, and 0 is absorbing.
    """
    _check_level(n, "counterexample_chain")
    if n != math.inf and not int(n) < depth:
        raise PreconditionError(f"depth {depth} must exceed n={n}", "counterexample_chain")
    zero = depth + 1
    rows, cols, data = [], [], []

    def add(x: int, y: int, p: float) -> None:
        rows.append(x)
        cols.append(y)
        data.append(p)

    if n == math.inf:
        for j in range(depth):
            add(j, j + 1, 1.0)
        add(depth, zero, 1.0)
        add(zero, zero, 1.0)
    else:
        n = int(n)
        share = 1.0 / (n + 1)
        for j in range(zero + 1):
            if j < n:
                add(j, j + 1, 1.0)
            elif j == n:
                add(j, 0, 1.0)
            else:
                for target in range(n + 1):
                    add(j, target, share)
    return StochasticMatrix.from_csr(
        sparse.csr_matrix((data, (rows, cols)), shape=(zero + 1, zero + 1))
    )
