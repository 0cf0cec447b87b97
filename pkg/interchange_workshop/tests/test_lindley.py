import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

from interchange_workshop.constructions.lindley import (
    check_drift,
    check_lindley_contraction,
    cramer_barrier,
    cramer_exponent,
    deterministic,
    drift_family,
    lindley_coupled_sup_distance,
    lindley_stationary_sample,
    two_point,
    uniform_shift,
)
from interchange_workshop.errors import ConfigError, PreconditionError
from interchange_workshop.specs.data_models import AtomicMeasure


def test_drift_families():
    family = drift_family("uniform-shift")
    assert family(None).name == "uniform-shift(0.0)"
    assert family(10).name == "uniform-shift(0.1)"
    with pytest.raises(ConfigError):
        drift_family("pareto")


def test_check_drift():
    assert check_drift(uniform_shift(0.0), seed=1) == pytest.approx(-0.25, abs=0.01)
    with pytest.raises(PreconditionError):
        check_drift(uniform_shift(-0.5), seed=1)


def test_identical_laws_have_zero_coupled_distance():
    spec = uniform_shift(0.0)
    estimate = lindley_coupled_sup_distance(spec, spec, 0.0, 30, 200, seed=3)
    assert estimate.sup_estimate == 0.0
    assert estimate.stderr == 0.0
    assert len(estimate.profile_means) == 31


def test_coupled_distance_shrinks_with_the_shift():
    limit = uniform_shift(0.0)
    coarse = lindley_coupled_sup_distance(limit, uniform_shift(0.1), 0.0, 50, 1000, seed=5)
    fine = lindley_coupled_sup_distance(limit, uniform_shift(0.05), 0.0, 50, 1000, seed=5)
    assert 0.0 < fine.sup_estimate <= coarse.sup_estimate
    assert coarse.sup_estimate <= 50 * 0.1
    assert coarse.profile_means[0] == 0.0


def test_coupled_distance_is_reproducible():
    a, b = uniform_shift(0.0), uniform_shift(0.1)
    first = lindley_coupled_sup_distance(a, b, 1.0, 20, 500, seed=9, streams=3)
    second = lindley_coupled_sup_distance(a, b, 1.0, 20, 500, seed=9, streams=3)
    assert first == second


def test_coupled_distance_preconditions():
    spec = uniform_shift(0.0)
    with pytest.raises(PreconditionError):
        lindley_coupled_sup_distance(spec, spec, 0.0, 10, 99, seed=0)
    with pytest.raises(PreconditionError):
        lindley_coupled_sup_distance(spec, spec, -1.0, 10, 100, seed=0)


def test_cramer_barrier():
    assert cramer_barrier(deterministic(-1.0), seed=0) == (0.0, 0.0)
    barrier, tail = cramer_barrier(two_point(0.25), seed=2)
    # E exp(theta Z) = 1 at theta = log 3
    assert barrier == pytest.approx(math.log(1e6) / math.log(3.0), rel=0.05)
    assert tail == pytest.approx(1e-6)


def test_stationary_sample_of_two_point_walk():
    sample = lindley_stationary_sample(two_point(0.25), samples=20000, seed=4)
    # all-time maximum is geometric: P(M >= 1) = 1/3, E M = 1/2
    assert sample.measure.mass_above(0.0) == pytest.approx(1.0 / 3.0, abs=0.02)
    assert sample.measure.mean() == pytest.approx(0.5, abs=0.05)
    assert sample.tail_bound == pytest.approx(1e-6)


def test_stationary_sample_of_deterministic_drift():
    sample = lindley_stationary_sample(deterministic(-1.0), samples=100, seed=0)
    assert sample.measure == AtomicMeasure.dirac(0.0)
    assert sample.barrier == 0.0


def test_contraction_of_coupled_starts():
    gap = check_lindley_contraction(uniform_shift(0.0), 0.0, 3.0, steps=40, samples=500, seed=6)
    assert 0.0 <= gap <= 3.0


def _expanded(sample):
    counts = np.rint(sample.measure.masses * sample.samples).astype(int)
    return np.repeat(sample.measure.locations, counts)


def test_stationary_samples_agree_across_seeds():
    first = lindley_stationary_sample(uniform_shift(0.0), samples=4000, seed=1)
    second = lindley_stationary_sample(uniform_shift(0.0), samples=4000, seed=2)
    assert ks_2samp(_expanded(first), _expanded(second)).pvalue > 1e-3
    assert first.measure.kolmogorov_distance(second.measure) < 0.06


def test_stationary_sample_with_a_given_barrier():
    spec = uniform_shift(0.0)
    sample = lindley_stationary_sample(spec, samples=200, seed=1, barrier=0.5)
    theta = cramer_exponent(spec, seed=1)
    assert sample.barrier == 0.5
    assert sample.tail_bound == pytest.approx(math.exp(-0.5 * theta))
    assert 0.0 < sample.tail_bound < 1.0
    with pytest.raises(PreconditionError):
        lindley_stationary_sample(spec, samples=200, seed=1, barrier=-1.0)


def test_uniform_shift_sweep_decreases_towards_the_limit():
    family = drift_family("uniform-shift")
    limit = family(None)
    estimates = [
        lindley_coupled_sup_distance(limit, family(n), 0.0, 200, 10_000, seed=11)
        for n in (5, 10, 20, 40)
    ]
    sups = [e.sup_estimate for e in estimates]
    assert all(a > b for a, b in zip(sups, sups[1:]))
    for n, estimate in zip((5, 10, 20, 40), estimates):
        assert 0.0 < estimate.sup_estimate <= 200.0 / n
        assert estimate.stderr < estimate.sup_estimate
