"""Birth-death and M/M/1 fixtures with geometric stationary laws."""

import logging
import math
from typing import Dict, Optional

import numpy as np

from interchange_workshop.errors import ConfigError, PreconditionError
from interchange_workshop.specs.data_models import (
    CountableKernel,
    KernelSpec,
    ProbDist,
    RateMatrix,
)

logger = logging.getLogger(__name__)

DEFAULT_UP_PROBABILITY = 1.0 / 3.0
# Geometric tails below this are dropped from closed-form laws.
TAIL_CUTOFF = 1e-18


def birth_death_kernel(p: float) -> CountableKernel:
    """Reflected random walk: up with probability p, down (or stay at 0) otherwise."""
    if not 0.0 < p < 0.5:
        raise PreconditionError(f"p must lie in (0, 0.5), got {p}", "birth_death_kernel")
    q = 1.0 - p

    def row(x: int) -> Dict[int, float]:
        if x == 0:
            return {0: q, 1: p}
        return {x - 1: q, x + 1: p}

    return CountableKernel(name=f"birth-death(p={p!r})", row_fn=row, support_bound_fn=lambda x: x + 1)


def _geometric(ratio: float, size: Optional[int]) -> ProbDist:
    if size is None:
        size = max(1, math.ceil(math.log(TAIL_CUTOFF) / math.log(ratio)))
    masses = ratio ** np.arange(size)
    return ProbDist.from_dense(masses / masses.sum(), renormalize=True)


def birth_death_stationary(p: float, size: Optional[int] = None) -> ProbDist:
    """pi(x) proportional to rho^x with rho = p / (1 - p).

    With size given the law is conditioned on {0..size-1}; otherwise the
    support stops where the geometric tail is negligible.
    """
    if not 0.0 < p < 0.5:
        raise PreconditionError(f"p must lie in (0, 0.5), got {p}", "birth_death_stationary")
    return _geometric(p / (1.0 - p), size)


def mm1_generator(arrival: float, service: float, n: int) -> RateMatrix:
    """M/M/1 queue with room for n - 1 customers; arrivals to a full queue are lost."""
    if n < 1 or arrival < 0.0 or service < 0.0:
        raise PreconditionError("need n >= 1 and non-negative rates", "mm1_generator")
    rows = []
    for x in range(n):
        row: Dict[int, float] = {}
        if x + 1 < n and arrival > 0.0:
            row[x + 1] = arrival
        if x > 0 and service > 0.0:
            row[x - 1] = service
        row[x] = -math.fsum(row.values())
        rows.append(row)
    return RateMatrix.from_rows(rows, dimension=n)


def mm1_stationary(arrival: float, service: float, n: int) -> ProbDist:
    return _geometric(arrival / service, n)


def build_kernel(spec: KernelSpec) -> CountableKernel:
    """Kernel named in an experiment config."""
    if spec.name == "birth-death":
        p = spec.params.get("p", DEFAULT_UP_PROBABILITY)
        try:
            return birth_death_kernel(p)
        except PreconditionError as e:
            raise ConfigError(str(e), "build_kernel") from e
    raise ConfigError(f"unknown kernel '{spec.name}' (available: birth-death)", "build_kernel")


def build_generator(spec: KernelSpec, n: int) -> RateMatrix:
    """n-state generator named in an experiment config.

    'mm1' takes arrival and service rates (defaults 1 and 2); 'birth-death'
    becomes the M/M/1 queue with arrival p and service 1 - p.
    """
    if spec.name == "mm1":
        arrival = spec.params.get("arrival", 1.0)
        service = spec.params.get("service", 2.0)
    elif spec.name == "birth-death":
        arrival = spec.params.get("p", DEFAULT_UP_PROBABILITY)
        service = 1.0 - arrival
    else:
        raise ConfigError(
            f"unknown generator '{spec.name}' (available: mm1, birth-death)", "build_generator"
        )
    if not 0.0 < arrival < service:
        raise ConfigError(
            f"need 0 < arrival < service for a stable queue, got {arrival} and {service}",
            "build_generator",
        )
    return mm1_generator(arrival, service, n)
