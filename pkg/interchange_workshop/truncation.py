"""
truncation.py - The Cutting Room of the Interchange Workshop

This module houses the construction of finite chains P_n from a countable
kernel: rows 0..n-1 are copied, columns >= n are cut away, and the escaping
mass is reassigned by one of three schemes (redirect to a fixed state,
proportional rescaling, or a self-loop).
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from interchange_workshop.errors import (
    DegenerateRowError,
    DimensionError,
    PreconditionError,
)
from interchange_workshop.specs.data_models import (
    CountableKernel,
    ProbDist,
    SchemeKind,
    StochasticMatrix,
    TruncatedChain,
    TruncationScheme,
)

logger = logging.getLogger(__name__)


def _truncated_row(
    kernel: CountableKernel, x: int, n: int, scheme: TruncationScheme
) -> Tuple[Dict[int, float], float]:
    row = kernel.row(x)
    retained = {y: mass for y, mass in row.pairs() if y < n}
    lost = min(1.0, math.fsum(mass for y, mass in row.pairs() if y >= n))
    if lost == 0.0:
        return retained, 0.0

    if scheme.kind == SchemeKind.REDIRECT:
        z = scheme.target
        retained[z] = retained.get(z, 0.0) + lost
    elif scheme.kind == SchemeKind.SELF_LOOP:
        retained[x] = retained.get(x, 0.0) + lost
    else:
        kept = math.fsum(retained.values())
        if not retained or kept == 0.0:
            raise DegenerateRowError(
                f"row {x} keeps no mass inside {{0..{n - 1}}}; proportional rescaling is undefined",
                "truncate",
                row=x,
            )
        retained = {y: mass / kept for y, mass in retained.items()}
    return retained, lost


def truncate(kernel: CountableKernel, n: int, scheme: TruncationScheme) -> TruncatedChain:
    """Build the n-state truncation of the kernel under the given scheme."""
    if n < 1:
        raise PreconditionError(f"truncation size must be >= 1, got {n}", "truncate")
    if scheme.kind == SchemeKind.REDIRECT and scheme.target >= n:
        raise PreconditionError(
            f"redirect target {scheme.target} must lie below n={n}", "truncate"
        )

    rows: List[Dict[int, float]] = []
    lost_mass: List[float] = []
    for x in range(n):
        row, lost = _truncated_row(kernel, x, n, scheme)
        rows.append(row)
        lost_mass.append(lost)

    matrix = StochasticMatrix.from_rows(rows, dimension=n)
    chain = TruncatedChain(n=n, matrix=matrix, scheme=scheme, lost_mass=tuple(lost_mass))
    logger.debug(
        f"Truncated {kernel.name} at n={n} with {scheme}: max lost mass {chain.max_lost_mass:.3e}"
    )
    return chain


def embed(distribution: ProbDist, into: Optional[int] = None) -> ProbDist:
    """Read a distribution on {0..n-1} as one on a larger index space.

    The stored masses are unchanged; states outside the truncation carry 0.
    """
    if into is not None and distribution.support_max >= into:
        raise DimensionError(
            f"state {distribution.support_max} does not fit in dimension {into}", "embed"
        )
    return distribution


def extend_to(chain: TruncatedChain, dimension: int, z: Optional[int] = None) -> StochasticMatrix:
    """Pad a truncation to `dimension` states; rows >= n jump to z.

    z defaults to the redirect target of the chain's scheme, else 0. Comparing
    truncations of several sizes against one reference needs a common index
    space, and this makes {n..dimension-1} transient.
    """
    n = chain.n
    if dimension < n:
        raise PreconditionError(
            f"cannot extend an n={n} chain to dimension {dimension}", "extend_to"
        )
    if z is None:
        z = chain.scheme.target if chain.scheme.target is not None else 0
    if not 0 <= z < n:
        raise PreconditionError(f"absorbing target {z} must lie below n={n}", "extend_to")
    if dimension == n:
        return chain.matrix
    padding = sparse.csr_matrix(
        (np.ones(dimension - n), (np.arange(dimension - n), np.full(dimension - n, z))),
        shape=(dimension - n, dimension),
    )
    top = sparse.hstack([chain.matrix.csr, sparse.csr_matrix((n, dimension - n))])
    return StochasticMatrix(csr=sparse.vstack([top, padding], format="csr"))


def truncation_sweep(
    kernel: CountableKernel,
    sizes: Sequence[int],
    scheme: TruncationScheme,
    threads: int = 1,
) -> List[TruncatedChain]:
    """Truncations for every size, returned in the order the sizes were given."""
    logger.info(f"Building {len(sizes)} truncations of {kernel.name} ({scheme}) on {threads} thread(s)")
    if threads <= 1:
        return [truncate(kernel, n, scheme) for n in sizes]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda n: truncate(kernel, n, scheme), sizes))
