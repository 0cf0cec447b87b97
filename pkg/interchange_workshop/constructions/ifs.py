"""
ifs.py - Contractive iterated random maps on the line

A chain X' = phi(X) driven by i.i.d. random maps phi with
E|phi(x) - phi(y)| <= r|x - y| and E|phi(x) - x| finite. The backward
composition phi_1 o ... o phi_k (x) converges almost surely, and its distance
to the limit is at most r^k / (1 - r) * E|phi(x) - x| in mean.
"""

import logging
import math
from typing import Callable, Dict, Tuple

import numpy as np

from interchange_workshop.errors import ConfigError, InternalConsistencyError, PreconditionError
from interchange_workshop.specs.data_models import IfsBackwardResult, IfsSpec

logger = logging.getLogger(__name__)

CONTRACTION_SLACK = 1e-12
CONFIDENCE_SIGMAS = 4.0


def deterministic_affine(a: float = 0.5, b: float = 1.0) -> IfsSpec:
    """phi(x) = a x + b every time; fixed point b / (1 - a)."""
    return IfsSpec(
        name=f"deterministic-affine({a!r},{b!r})",
        contraction_ratio=abs(a),
        draw_maps=lambda rng, size: (np.full(size, a), np.full(size, b)),
        apply_maps=lambda params, x: params[0] * x + params[1],
    )


def random_affine() -> IfsSpec:
    """phi(x) = A x + B with A, B independent U[0, 1]; E A = 0.5."""
    return IfsSpec(
        name="random-affine",
        contraction_ratio=0.5,
        draw_maps=lambda rng, size: (rng.random(size), rng.random(size)),
        apply_maps=lambda params, x: params[0] * x + params[1],
    )


_FAMILIES: Dict[str, Callable[[], IfsSpec]] = {
    "deterministic-affine": deterministic_affine,
    "random-affine": random_affine,
}


def ifs_family(name: str) -> IfsSpec:
    if name not in _FAMILIES:
        raise ConfigError(
            f"unknown map family '{name}', expected one of {sorted(_FAMILIES)}", "ifs_family"
        )
    return _FAMILIES[name]()


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stream]))


def _backward(spec: IfsSpec, levels: list, depth: int, x: float, samples: int) -> np.ndarray:
    """phi_1 o ... o phi_depth (x), using the first depth drawn levels."""
    values = np.full(samples, float(x))
    for params in reversed(levels[:depth]):
        values = spec.apply(params, values)
    return values


def _mean_step(spec: IfsSpec, x: float, samples: int, seed: int) -> float:
    params = spec.sample_maps(_rng(seed, 1), samples)
    return float(np.mean(np.abs(spec.apply(params, np.full(samples, float(x))) - x)))


def ifs_backward(spec: IfsSpec, k: int, x: float, samples: int, seed: int) -> IfsBackwardResult:
    """Samples of the depth-k backward composition from x, with its tail bound."""
    if k < 0:
        raise PreconditionError(f"depth must be >= 0, got {k}", "ifs_backward")
    if samples < 1:
        raise PreconditionError(f"need at least one sample, got {samples}", "ifs_backward")
    rng = _rng(seed, 0)
    levels = [spec.sample_maps(rng, samples) for _ in range(k)]
    values = _backward(spec, levels, k, x, samples)
    mean_step = _mean_step(spec, x, samples, seed)
    r = spec.contraction_ratio
    tail_bound = r**k / (1.0 - r) * mean_step
    logger.debug(f"{spec.name}: k={k} tail bound {tail_bound:.4e}")
    return IfsBackwardResult(
        k=k, x=float(x), samples=tuple(values.tolist()), tail_bound=tail_bound, mean_step=mean_step
    )


def ifs_tail_gap(
    spec: IfsSpec, k: int, k_ref: int, x: float, samples: int, seed: int
) -> Tuple[float, float]:
    """(mean, standard error) of |beta(k_ref, x) - beta(k, x)| on shared maps.

    beta(k_ref, x) stands in for the limit; both depths reuse the same first
    k levels, so the gap isolates the tail beyond level k.
    """
    if not 0 <= k <= k_ref:
        raise PreconditionError(f"need 0 <= k <= k_ref, got k={k}, k_ref={k_ref}", "ifs_tail_gap")
    if samples < 2:
        raise PreconditionError(f"need at least two samples, got {samples}", "ifs_tail_gap")
    rng = _rng(seed, 0)
    levels = [spec.sample_maps(rng, samples) for _ in range(k_ref)]
    gap = np.abs(
        _backward(spec, levels, k_ref, x, samples) - _backward(spec, levels, k, x, samples)
    )
    return float(gap.mean()), float(gap.std(ddof=1) / math.sqrt(samples))


def check_ifs_contraction(
    spec: IfsSpec, samples: int, seed: int, pairs: int = 16, spread: float = 10.0
) -> float:
    """Empirical E|phi(x) - phi(y)| / |x - y| over random pairs; fails above r + 4 stderr.

    All pairs share one draw of maps. Also requires E|phi(x) - x| to be
    finite. Returns the largest ratio seen.
    """
    rng = _rng(seed, 2)
    starts = rng.uniform(-spread, spread, size=(pairs, 2))
    params = spec.sample_maps(rng, samples)
    worst = 0.0
    for x, y in starts:
        if x == y:
            continue
        moved_x = spec.apply(params, np.full(samples, x))
        moved_y = spec.apply(params, np.full(samples, y))
        if not np.isfinite(np.abs(moved_x - x).mean()):
            raise InternalConsistencyError(
                f"{spec.name}: E|phi(x) - x| is not finite at x={x!r}", "check_ifs_contraction"
            )
        ratios = np.abs(moved_x - moved_y) / abs(x - y)
        stderr = float(ratios.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
        mean = float(ratios.mean())
        if mean > spec.contraction_ratio + CONFIDENCE_SIGMAS * stderr + CONTRACTION_SLACK:
            raise InternalConsistencyError(
                f"{spec.name}: E|phi(x) - phi(y)| / |x - y| = {mean:.4g} exceeds "
                f"r = {spec.contraction_ratio}",
                "check_ifs_contraction",
            )
        worst = max(worst, mean)
    return worst
