"""
Interchange Workshop - Specifications Submodule

This file makes the 'specs' directory a Python submodule.
This is the "Technical Archives" of the workshop, where the precise
definitions of chains, distributions, reward specifications and reports
are stored, so every department imports the same vocabulary.
"""

from .data_models import (
    AtomicMeasure,
    CountableKernel,
    ExperimentCommand,
    ExperimentConfig,
    FteMethod,
    FteSolution,
    IfsSpec,
    JumpChain,
    LindleySpec,
    ProbDist,
    RateMatrix,
    RewardSpec,
    SchemeKind,
    StochasticMatrix,
    TruncatedChain,
    TruncationScheme,
    UniformBoundReport,
    ValidationReport,
    WeightFunction,
)

__all__ = [
    "AtomicMeasure",
    "CountableKernel",
    "ExperimentCommand",
    "ExperimentConfig",
    "FteMethod",
    "FteSolution",
    "IfsSpec",
    "JumpChain",
    "LindleySpec",
    "ProbDist",
    "RateMatrix",
    "RewardSpec",
    "SchemeKind",
    "StochasticMatrix",
    "TruncatedChain",
    "TruncationScheme",
    "UniformBoundReport",
    "ValidationReport",
    "WeightFunction",
]
