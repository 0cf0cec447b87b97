"""
Interchange Workshop - Constructions Submodule

The worked example chains: the birth-death and M/M/1 fixtures with
closed-form stationary laws, the halving counterexample where the plain
limits interchange but the uniform-in-time one fails, the Lindley
waiting-time chain, and contractive iterated random maps.
"""

from .birth_death import (
    birth_death_kernel,
    birth_death_stationary,
    build_generator,
    build_kernel,
    mm1_generator,
    mm1_stationary,
)
from .counterexample import (
    counterexample_chain,
    counterexample_marginal,
    counterexample_report,
    counterexample_stationary,
    counterexample_step,
    hitting_step_count,
)
from .ifs import check_ifs_contraction, ifs_backward, ifs_family, ifs_tail_gap
from .lindley import (
    check_lindley_contraction,
    drift_family,
    lindley_coupled_sup_distance,
    lindley_stationary_sample,
)

__all__ = [
    "birth_death_kernel",
    "birth_death_stationary",
    "build_generator",
    "build_kernel",
    "mm1_generator",
    "mm1_stationary",
    "counterexample_chain",
    "counterexample_marginal",
    "counterexample_report",
    "counterexample_stationary",
    "counterexample_step",
    "hitting_step_count",
    "check_ifs_contraction",
    "ifs_backward",
    "ifs_family",
    "ifs_tail_gap",
    "check_lindley_contraction",
    "drift_family",
    "lindley_coupled_sup_distance",
    "lindley_stationary_sample",
]
