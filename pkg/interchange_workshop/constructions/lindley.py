"""
lindley.py - The waiting-time chain X' = [X + Z]^+ of a single-server queue

Two chains with increment laws Z_a and Z_b are coupled by feeding the same
uniforms to both quantile functions. The coupled mean of |X^a_m - X^b_m| ^ 2
bounds their distance over bounded 1-Lipschitz test functions at every m,
which is what lindley_coupled_sup_distance reports (an upper bound, not the
distance itself). The stationary law is the law of the all-time maximum of
the random walk with increments Z, sampled until the walk drops below -B.
The reported tail bound exp(-theta B) caps the probability that a stopped
walk would still have climbed above 0; by default B makes it 1e-6.
"""

import logging
import math
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from interchange_workshop.errors import (
    ConfigError,
    InternalConsistencyError,
    NonConvergenceError,
    PreconditionError,
)
from interchange_workshop.specs.data_models import (
    AtomicMeasure,
    CouplingEstimate,
    LindleySpec,
    LindleyStationarySample,
)

logger = logging.getLogger(__name__)

MIN_SAMPLES = 100
BARRIER_TAIL = 1e-6
DRIFT_SAMPLES = 100_000
CONTRACTION_SLACK = 1e-12


# --- Increment families --------------------------------------------------------------


def uniform_shift(shift: float = 0.0) -> LindleySpec:
    """Z = U[0, 1] - 0.75 - shift."""
    return LindleySpec(name=f"uniform-shift({shift!r})", quantile=lambda u: u - 0.75 - shift)


def two_point(p_up: float = 0.25) -> LindleySpec:
    """Z = +1 with probability p_up, else -1."""
    return LindleySpec(
        name=f"two-point({p_up!r})", quantile=lambda u: np.where(u < p_up, 1.0, -1.0)
    )


def deterministic(value: float = -1.0) -> LindleySpec:
    return LindleySpec(
        name=f"deterministic({value!r})", quantile=lambda u: np.full(np.shape(u), value)
    )


_FAMILIES: dict = {
    "uniform-shift": lambda n: uniform_shift(0.0 if n is None else 1.0 / n),
    "two-point": lambda n: two_point(0.25 if n is None else 0.25 - 0.125 / n),
    "deterministic": lambda n: deterministic(-1.0 if n is None else -1.0 - 1.0 / n),
}


def drift_family(name: str) -> Callable[[Optional[int]], LindleySpec]:
    """Maps n to the n-th increment law; None gives the limiting law."""
    if name not in _FAMILIES:
        raise ConfigError(
            f"unknown drift family '{name}', expected one of {sorted(_FAMILIES)}", "drift_family"
        )
    return _FAMILIES[name]


# --- Helpers -------------------------------------------------------------------------


def _stream_rngs(seed: int, streams: int, samples: int) -> List[Tuple[np.random.Generator, int]]:
    """Independent generators with their share of the samples, in stream order."""
    children = np.random.SeedSequence(seed).spawn(streams)
    sizes = [len(chunk) for chunk in np.array_split(np.arange(samples), streams)]
    return [(np.random.default_rng(child), size) for child, size in zip(children, sizes) if size]


def check_drift(spec: LindleySpec, seed: int, samples: int = DRIFT_SAMPLES) -> float:
    """Sample mean of Z; fails unless mean + 3 stderr < 0."""
    increments = spec.sample(np.random.default_rng(np.random.SeedSequence(seed)), samples)
    mean = float(increments.mean())
    stderr = float(increments.std(ddof=1) / math.sqrt(samples))
    if not mean + 3.0 * stderr < 0.0:
        raise PreconditionError(
            f"{spec.name}: E Z = {mean:.4g} +- {stderr:.2g} is not negative", "check_drift"
        )
    return mean


# --- Operations ----------------------------------------------------------------------


def lindley_coupled_sup_distance(
    spec_a: LindleySpec,
    spec_b: LindleySpec,
    x: float,
    horizon: int,
    samples: int,
    seed: int,
    streams: int = 1,
) -> CouplingEstimate:
    """max over m <= horizon of the coupled mean of |X^a_m - X^b_m| ^ 2, with standard errors."""
    if samples < MIN_SAMPLES:
        raise PreconditionError(f"need at least {MIN_SAMPLES} samples, got {samples}", "lindley_coupled_sup_distance")
    if x < 0.0 or horizon < 0:
        raise PreconditionError("x and horizon must be non-negative", "lindley_coupled_sup_distance")
    totals = np.zeros(horizon + 1)
    squares = np.zeros(horizon + 1)
    for rng, size in _stream_rngs(seed, streams, samples):
        path_a = np.full(size, float(x))
        path_b = np.full(size, float(x))
        for m in range(1, horizon + 1):
            uniforms = rng.random(size)
            path_a = np.maximum(path_a + spec_a.quantile(uniforms), 0.0)
            path_b = np.maximum(path_b + spec_b.quantile(uniforms), 0.0)
            gap = np.minimum(np.abs(path_a - path_b), 2.0)
            totals[m] += gap.sum()
            squares[m] += (gap * gap).sum()
    means = totals / samples
    variances = np.maximum(squares / samples - means * means, 0.0) * samples / (samples - 1)
    stderrs = np.sqrt(variances / samples)
    argmax = int(np.argmax(means))
    return CouplingEstimate(
        sup_estimate=float(means[argmax]),
        m_argmax=argmax,
        stderr=float(stderrs[argmax]),
        profile_means=tuple(means.tolist()),
        profile_stderrs=tuple(stderrs.tolist()),
    )


def cramer_exponent(
    spec: LindleySpec, seed: int, samples: int = DRIFT_SAMPLES
) -> Optional[float]:
    """Positive root theta of log E exp(theta Z) = 0; None when Z is never positive."""
    increments = spec.sample(np.random.default_rng(np.random.SeedSequence(seed)), samples)
    if not (increments > 0.0).any():
        return None

    def log_mgf(theta: float) -> float:
        top = float(increments.max())
        return theta * top + math.log(float(np.mean(np.exp(theta * (increments - top)))))

    upper = 1.0
    while log_mgf(upper) <= 0.0:
        upper *= 2.0
    lower = upper / 2.0
    while log_mgf(lower) > 0.0 and lower > 1e-12:
        lower /= 2.0
    return float(brentq(log_mgf, lower, upper))


def cramer_barrier(
    spec: LindleySpec, seed: int, samples: int = DRIFT_SAMPLES
) -> Tuple[float, float]:
    """(barrier B, tail bound) with B chosen so the tail bound is 1e-6.

    A walk that has dropped below -B returns above 0 with probability at most
    exp(-theta B). Increments that are never positive need no barrier.
    """
    theta = cramer_exponent(spec, seed, samples)
    if theta is None:
        return 0.0, 0.0
    barrier = math.log(1.0 / BARRIER_TAIL) / theta
    return barrier, math.exp(-theta * barrier)


def lindley_stationary_sample(
    spec: LindleySpec,
    samples: int,
    seed: int,
    barrier: Optional[float] = None,
    max_steps: int = 1_000_000,
) -> LindleyStationarySample:
    """Empirical stationary law: max over k of the walk S(k), run until S(k) < -B."""
    if spec.drift_check:
        check_drift(spec, seed)
    theta = cramer_exponent(spec, seed)
    if barrier is None:
        barrier = 0.0 if theta is None else math.log(1.0 / BARRIER_TAIL) / theta
    if barrier < 0.0:
        raise PreconditionError(
            f"barrier must be non-negative, got {barrier}", "lindley_stationary_sample"
        )
    tail_bound = 0.0 if theta is None else math.exp(-theta * barrier)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    walk = np.zeros(samples)
    maxima = np.zeros(samples)
    alive = np.ones(samples, dtype=bool)
    for _ in range(max_steps):
        idx = np.flatnonzero(alive)
        if len(idx) == 0:
            break
        walk[idx] += spec.sample(rng, len(idx))
        maxima[idx] = np.maximum(maxima[idx], walk[idx])
        alive[idx] = walk[idx] >= -barrier
    if alive.any():
        raise NonConvergenceError(
            f"{int(alive.sum())} walk(s) stayed above -{barrier:.3g} for {max_steps} steps",
            "lindley_stationary_sample",
        )
    logger.debug(f"{spec.name}: barrier {barrier:.4g}, tail bound {tail_bound:.2g}")
    return LindleyStationarySample(
        measure=AtomicMeasure.from_samples(maxima),
        barrier=barrier,
        tail_bound=tail_bound,
        samples=samples,
    )


def check_lindley_contraction(
    spec: LindleySpec, x: float, y: float, steps: int, samples: int, seed: int
) -> float:
    """Runs two starts on common noise and fails if any step widens their gap.

    Returns the largest final gap.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    path_x = np.full(samples, float(x))
    path_y = np.full(samples, float(y))
    gap = np.abs(path_x - path_y)
    for step in range(steps):
        increments = spec.sample(rng, samples)
        path_x = np.maximum(path_x + increments, 0.0)
        path_y = np.maximum(path_y + increments, 0.0)
        following = np.abs(path_x - path_y)
        if np.any(following > gap + CONTRACTION_SLACK):
            raise InternalConsistencyError(
                f"{spec.name}: coupled gap grew at step {step + 1}", "check_lindley_contraction"
            )
        gap = following
    return float(gap.max())
