"""
Interchange Workshop Package Root

This file makes the 'interchange_workshop' directory a Python package.
The workshop builds finite truncations of countable-state Markov chains and
jump processes, certifies how closely their marginals track a reference
chain at every time scale, and computes first-transition expectations
(hitting times, discounted rewards) three independent ways.

Departments (submodules):
    specs.data_models   -- the shared vocabulary (pydantic models)
    chain_core          -- distributions, propagation, the two TV distances
    truncation          -- finite approximations of countable kernels
    stationary          -- GTH, power iteration, CTMC stationary laws
    interchange         -- uniform-in-time closeness diagnostics
    fte                 -- first-transition expectations
    jump                -- the continuous-time layer
    constructions       -- the worked example chains
    experiment_manager  -- the orchestrator behind the CLI
"""

__version__ = "0.1.0"
PROJECT_NAME = "Interchange Workshop"
